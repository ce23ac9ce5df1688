"""Per-path congestion control: Cubic, a simplified BBR, and pacing."""

from __future__ import annotations

import math
from collections import deque
from typing import Deque, Optional, Tuple

from .sendtrack import RttEstimator

K_MAX_DATAGRAM_SIZE = 1252  # UDP payload bytes per full packet
K_INITIAL_WINDOW = 10 * K_MAX_DATAGRAM_SIZE
K_MINIMUM_WINDOW = 2 * K_MAX_DATAGRAM_SIZE

K_CUBIC_C = 0.4
K_CUBIC_LOSS_REDUCTION_FACTOR = 0.7
K_CUBIC_SLOW_START_RTT_FACTOR = 1.25

K_BBR_STARTUP_GAIN = 2.89
K_BBR_DRAIN_GAIN = 1 / K_BBR_STARTUP_GAIN
K_BBR_PROBE_CWND_GAIN = 2.0
K_BBR_PROBE_RTT_CWND_GAIN = 0.5
K_BBR_GAIN_CYCLE: Tuple[float, ...] = (1.25, 0.75, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
K_BBR_BW_WINDOW_ROUNDS = 10
K_BBR_MIN_RTT_WINDOW = 10.0  # seconds
K_BBR_PROBE_RTT_DURATION = 0.2
K_BBR_MIN_WINDOW = 4 * K_MAX_DATAGRAM_SIZE
K_BBR_FULL_BW_THRESHOLD = 1.25
K_BBR_FULL_BW_COUNT = 3

K_CUBIC_PACING_FACTOR = 1.25
# pacing never throttles below a couple of packets per initial-RTT guess
K_MIN_PACING_RATE = 2 * K_MAX_DATAGRAM_SIZE / 0.5


class Pacer:
    """Token bucket allowing a single-packet burst."""

    __slots__ = ("rate", "next_send_time")

    def __init__(self) -> None:
        self.rate = math.inf  # bytes per second
        self.next_send_time = 0.0

    def set_rate(self, rate: float) -> None:
        self.rate = max(rate, K_MIN_PACING_RATE)

    def allow(self, nbytes: int, now: float) -> Optional[float]:
        """None when sending is allowed now (and the budget is consumed),
        otherwise the time to retry."""
        if now >= self.next_send_time:
            spacing = 0.0 if math.isinf(self.rate) else nbytes / self.rate
            self.next_send_time = max(self.next_send_time, now) + spacing
            return None
        return self.next_send_time


def cubic_k(w_max_bytes: float) -> float:
    """Time to return to w_max after a reduction, in seconds (MSS units)."""
    w_max_seg = w_max_bytes / K_MAX_DATAGRAM_SIZE
    return (w_max_seg * (1 - K_CUBIC_LOSS_REDUCTION_FACTOR) / K_CUBIC_C) ** (1 / 3)


def cubic_w(t: float, k: float, w_max_bytes: float) -> float:
    """Window at t seconds past the epoch, in bytes."""
    w_max_seg = w_max_bytes / K_MAX_DATAGRAM_SIZE
    return (K_CUBIC_C * (t - k) ** 3 + w_max_seg) * K_MAX_DATAGRAM_SIZE


class CubicCongestionControl:
    """Cubic with an optional early slow-start exit on RTT inflation."""

    def __init__(self, picoquic_variant: bool = True) -> None:
        self.picoquic_variant = picoquic_variant
        self.cwnd = K_INITIAL_WINDOW
        self.ssthresh = math.inf
        self.w_max = 0.0
        self.k = 0.0
        self.epoch_start: Optional[float] = None  # None while in slow start
        self.recovery_start_time = -1.0
        self.pacer = Pacer()
        self.loss_events = 0

    @property
    def in_slow_start(self) -> bool:
        return self.epoch_start is None

    def mode_label(self) -> str:
        return "slow_start" if self.in_slow_start else "avoidance"

    def on_packet_sent(self, nbytes: int, now: float) -> None:
        pass

    def on_ack(
        self,
        acked_bytes: int,
        now: float,
        rtt: RttEstimator,
        delivery_rate: Optional[float] = None,
        app_limited: bool = False,
        bytes_in_flight: int = 0,
        delivered_total: int = 0,
        delivered_at_send: int = 0,
    ) -> None:
        if self.epoch_start is None:
            self.cwnd += acked_bytes
            exit_now = self.cwnd >= self.ssthresh
            if (
                self.picoquic_variant
                and rtt.latest_adjusted is not None
                and rtt.min_rtt is not None
                and rtt.latest_adjusted > K_CUBIC_SLOW_START_RTT_FACTOR * rtt.min_rtt
            ):
                exit_now = True
            if exit_now:
                self._enter_avoidance_from(self.cwnd, now)
        else:
            t = now - self.epoch_start
            self.cwnd = max(K_MINIMUM_WINDOW, cubic_w(t, self.k, self.w_max))
        self._update_pacing(rtt)

    def _enter_avoidance_from(self, window: float, now: float) -> None:
        # epoch placed so the cubic curve passes through the current window
        self.w_max = window
        self.k = cubic_k(self.w_max)
        self.epoch_start = now - self.k

    def on_loss(self, lost_sent_time: float, now: float, rtt: RttEstimator) -> bool:
        """Reduce once per congestion epoch; returns True when applied."""
        if lost_sent_time <= self.recovery_start_time:
            return False
        self.recovery_start_time = now
        self.loss_events += 1
        self.w_max = self.cwnd
        self.cwnd = max(
            K_MINIMUM_WINDOW, K_CUBIC_LOSS_REDUCTION_FACTOR * self.cwnd
        )
        self.ssthresh = self.cwnd
        self.k = cubic_k(self.w_max)
        self.epoch_start = now
        self._update_pacing(rtt)
        return True

    def _update_pacing(self, rtt: RttEstimator) -> None:
        if rtt.smoothed:
            self.pacer.set_rate(K_CUBIC_PACING_FACTOR * self.cwnd / rtt.smoothed)


class BbrCongestionControl:
    """Model-based control: windowed max bandwidth times windowed min RTT."""

    MODE_STARTUP = "startup"
    MODE_DRAIN = "drain"
    MODE_PROBE_BW = "probe_bw"
    MODE_PROBE_RTT = "probe_rtt"

    def __init__(self) -> None:
        self.mode = self.MODE_STARTUP
        self.cwnd = K_INITIAL_WINDOW
        self.pacer = Pacer()
        self.bw_samples: Deque[Tuple[int, float]] = deque()  # (round, bytes/s)
        self.max_bw = 0.0
        self.min_rtt: Optional[float] = None
        self.min_rtt_stamp = 0.0
        self.round_count = 0
        self.next_round_delivered = 0
        self.full_bw = 0.0
        self.full_bw_count = 0
        self.filled_pipe = False
        self.phase_idx = 0
        self.phase_start = 0.0
        self.probe_rtt_done = 0.0
        self.prior_mode = self.MODE_STARTUP
        self.loss_events = 0

    def mode_label(self) -> str:
        return self.mode

    def pacing_gain(self) -> float:
        if self.mode == self.MODE_STARTUP:
            return K_BBR_STARTUP_GAIN
        if self.mode == self.MODE_DRAIN:
            return K_BBR_DRAIN_GAIN
        if self.mode == self.MODE_PROBE_RTT:
            return 1.0
        return K_BBR_GAIN_CYCLE[self.phase_idx]

    def cwnd_gain(self) -> float:
        if self.mode in (self.MODE_STARTUP, self.MODE_DRAIN):
            return K_BBR_STARTUP_GAIN
        if self.mode == self.MODE_PROBE_RTT:
            return K_BBR_PROBE_RTT_CWND_GAIN
        return K_BBR_PROBE_CWND_GAIN

    def expected_cwnd(self) -> float:
        if self.max_bw <= 0 or self.min_rtt is None:
            return K_INITIAL_WINDOW
        return max(K_BBR_MIN_WINDOW, self.cwnd_gain() * self.max_bw * self.min_rtt)

    def on_packet_sent(self, nbytes: int, now: float) -> None:
        pass

    def _push_bw_sample(self, bw: float, app_limited: bool) -> None:
        if app_limited and bw <= self.max_bw:
            return
        self.bw_samples.append((self.round_count, bw))
        horizon = self.round_count - K_BBR_BW_WINDOW_ROUNDS + 1
        while self.bw_samples and self.bw_samples[0][0] < horizon:
            self.bw_samples.popleft()
        self.max_bw = max(bw for _, bw in self.bw_samples)

    def _expire_bw_window(self) -> None:
        horizon = self.round_count - K_BBR_BW_WINDOW_ROUNDS + 1
        changed = False
        while self.bw_samples and self.bw_samples[0][0] < horizon:
            self.bw_samples.popleft()
            changed = True
        if changed:
            self.max_bw = max((bw for _, bw in self.bw_samples), default=0.0)

    def on_ack(
        self,
        acked_bytes: int,
        now: float,
        rtt: RttEstimator,
        delivery_rate: Optional[float] = None,
        app_limited: bool = False,
        bytes_in_flight: int = 0,
        delivered_total: int = 0,
        delivered_at_send: int = 0,
    ) -> None:
        # a round ends when an acked packet was sent after the current
        # round's marker, i.e. its send-time delivered snapshot passed it
        round_start = False
        if delivered_at_send >= self.next_round_delivered:
            self.round_count += 1
            self.next_round_delivered = delivered_total
            round_start = True
            self._expire_bw_window()
        if delivery_rate is not None:
            self._push_bw_sample(delivery_rate, app_limited)
        if rtt.latest is not None:
            if self.min_rtt is None or rtt.latest <= self.min_rtt:
                self.min_rtt = rtt.latest
                self.min_rtt_stamp = now
        self._advance_mode(now, round_start, bytes_in_flight)
        self._apply_model()

    def _advance_mode(self, now: float, round_start: bool, inflight: int) -> None:
        if (
            self.mode != self.MODE_PROBE_RTT
            and self.min_rtt is not None
            and now - self.min_rtt_stamp > K_BBR_MIN_RTT_WINDOW
        ):
            self.prior_mode = self.MODE_PROBE_BW if self.filled_pipe else self.MODE_STARTUP
            self.mode = self.MODE_PROBE_RTT
            self.probe_rtt_done = now + max(
                K_BBR_PROBE_RTT_DURATION, self.min_rtt or 0.0
            )
            return
        if self.mode == self.MODE_PROBE_RTT:
            if now >= self.probe_rtt_done:
                self.min_rtt_stamp = now
                self.mode = self.prior_mode
                self.phase_start = now
            return
        if self.mode == self.MODE_STARTUP and round_start:
            if self.max_bw >= K_BBR_FULL_BW_THRESHOLD * self.full_bw:
                self.full_bw = self.max_bw
                self.full_bw_count = 0
            else:
                self.full_bw_count += 1
                if self.full_bw_count >= K_BBR_FULL_BW_COUNT:
                    self.filled_pipe = True
                    self.mode = self.MODE_DRAIN
            return
        if self.mode == self.MODE_DRAIN:
            if self.min_rtt is not None and inflight <= self.max_bw * self.min_rtt:
                self.mode = self.MODE_PROBE_BW
                self.phase_idx = 0
                self.phase_start = now
            return
        if self.mode == self.MODE_PROBE_BW and self.min_rtt is not None:
            if now - self.phase_start >= self.min_rtt:
                self.phase_idx = (self.phase_idx + 1) % len(K_BBR_GAIN_CYCLE)
                self.phase_start = now

    def _apply_model(self) -> None:
        if self.max_bw <= 0 or self.min_rtt is None:
            self.cwnd = K_INITIAL_WINDOW
            return
        self.cwnd = self.expected_cwnd()
        self.pacer.set_rate(self.pacing_gain() * self.max_bw)

    def on_loss(self, lost_sent_time: float, now: float, rtt: RttEstimator) -> bool:
        # rate/RTT model absorbs losses; no multiplicative reaction
        self.loss_events += 1
        return False


def make_controller(kind: str, cubic_variant: str = "picoquic"):
    if kind == "cubic":
        return CubicCongestionControl(picoquic_variant=cubic_variant == "picoquic")
    if kind == "bbr":
        return BbrCongestionControl()
    raise ValueError(f"unknown congestion controller: {kind}")
