"""Sender-side packet bookkeeping: number spaces, RTT, loss detection.

Loss rules are RACK-flavored but path-aware: a packet can only be declared
lost by comparison with later acknowledged packets sent on the same path,
which matters when one number space is shared by several paths.
"""

from __future__ import annotations

from bisect import bisect_right, insort
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .intervals import IntervalSet

SINGLE_SPACE = "spns"
MULTI_SPACE = "mpns"

RACK_PACKET_THRESHOLD = 3
RACK_TIME_FACTOR = 9 / 8
PTO_SRTT_FACTOR = 3.0
INITIAL_RTT_GUESS = 0.5  # seconds, until a path has a sample

LOSS_THRESHOLD = "threshold"
LOSS_TIME = "time"
LOSS_PTO = "pto"


class ProtocolError(Exception):
    pass


def compute_nonce(design: str, path_id: int, pn: int) -> int:
    """96-bit AEAD nonce input: 32-bit path component above a 62-bit number.

    The shared-space design always uses path component 0, so uniqueness
    rests on the packet number alone.
    """
    component = 0 if design == SINGLE_SPACE else path_id
    if not 0 <= component < (1 << 32):
        raise ProtocolError(f"path component out of range: {component}")
    if not 0 <= pn < (1 << 62):
        raise ProtocolError(f"packet number out of range: {pn}")
    return (component << 62) | pn


class RttEstimator:
    """EWMA smoothed RTT with min tracking.

    `latest` keeps the raw sample (loss detection wants the conservative
    value); `latest_adjusted` has the peer's reported ack delay removed,
    so delay-based heuristics do not mistake deferred acks for queueing.
    """

    __slots__ = ("latest", "latest_adjusted", "smoothed", "variance", "min_rtt")

    def __init__(self) -> None:
        self.latest: Optional[float] = None
        self.latest_adjusted: Optional[float] = None
        self.smoothed: Optional[float] = None
        self.variance = 0.0
        self.min_rtt: Optional[float] = None

    def update(self, sample: float, ack_delay: float = 0.0) -> None:
        self.latest = sample
        if self.smoothed is None:
            self.latest_adjusted = sample
            self.smoothed = sample
            self.variance = sample / 2
            self.min_rtt = sample
            return
        self.min_rtt = min(self.min_rtt, sample)
        adjusted = sample - ack_delay
        if adjusted < self.min_rtt:
            adjusted = sample
        self.latest_adjusted = adjusted
        self.variance = 0.75 * self.variance + 0.25 * abs(self.smoothed - adjusted)
        self.smoothed = 0.875 * self.smoothed + 0.125 * adjusted

    def smoothed_or_default(self) -> float:
        return self.smoothed if self.smoothed is not None else INITIAL_RTT_GUESS


@dataclass(slots=True)
class SentPacketRecord:
    space_id: int
    pn: int
    path_id: int
    sent_time: float
    wire_bytes: int
    ack_eliciting: bool
    stream_ranges: Tuple[Tuple[int, int, int, bool], ...] = ()  # (sid, off, len, fin)
    ack_ranges_carried: Tuple[Tuple[int, Tuple[Tuple[int, int], ...]], ...] = ()
    control_resend: Tuple[Tuple, ...] = ()  # opaque markers the endpoint re-queues
    in_flight: bool = False
    acked: bool = False
    lost: bool = False
    spurious: bool = False
    app_limited: bool = False
    delivered_snapshot: int = 0
    delivered_time_snapshot: float = 0.0


class _PathDelivery:
    __slots__ = ("delivered", "delivered_time")

    def __init__(self) -> None:
        self.delivered = 0
        self.delivered_time = 0.0


class NumberSpace:
    __slots__ = (
        "space_id",
        "next_pn",
        "sent",
        "acked_iv",
        "acked_by_path",
        "max_acked_by_path",
        "largest_acked",
        "scan_floor",
    )

    def __init__(self, space_id: int) -> None:
        self.space_id = space_id
        self.next_pn = 0
        self.sent: Dict[int, SentPacketRecord] = {}
        self.acked_iv = IntervalSet()  # half-open pn intervals already acked
        self.acked_by_path: Dict[int, List[int]] = {}
        self.max_acked_by_path: Dict[int, int] = {}
        self.largest_acked = -1
        self.scan_floor = 0


@dataclass
class AckResult:
    newly_acked: List[SentPacketRecord] = field(default_factory=list)
    spurious: List[SentPacketRecord] = field(default_factory=list)
    rtt_path: Optional[int] = None
    rtt_sample: Optional[float] = None


class SenderTracker:
    """Tracks sent packets across the design's number spaces."""

    def __init__(self, design: str) -> None:
        if design not in (SINGLE_SPACE, MULTI_SPACE):
            raise ValueError(f"unknown design: {design}")
        self.design = design
        self.spaces: Dict[int, NumberSpace] = {}
        self.inflight_bytes: Dict[int, int] = {}
        self.delivery: Dict[int, _PathDelivery] = {}

    def space_id_for_path(self, path_id: int) -> int:
        return 0 if self.design == SINGLE_SPACE else path_id

    def space(self, space_id: int) -> NumberSpace:
        sp = self.spaces.get(space_id)
        if sp is None:
            sp = self.spaces[space_id] = NumberSpace(space_id)
        return sp

    def _delivery(self, path_id: int) -> _PathDelivery:
        d = self.delivery.get(path_id)
        if d is None:
            d = self.delivery[path_id] = _PathDelivery()
        return d

    def assign_pn(self, path_id: int) -> Tuple[int, int]:
        sp = self.space(self.space_id_for_path(path_id))
        pn = sp.next_pn
        sp.next_pn += 1
        return sp.space_id, pn

    def on_packet_sent(self, rec: SentPacketRecord, now: float) -> None:
        sp = self.space(rec.space_id)
        if rec.pn in sp.sent:
            raise ProtocolError(f"packet number reuse: space {rec.space_id} pn {rec.pn}")
        sp.sent[rec.pn] = rec
        d = self._delivery(rec.path_id)
        rec.delivered_snapshot = d.delivered
        rec.delivered_time_snapshot = d.delivered_time or now
        if rec.ack_eliciting:
            rec.in_flight = True
            self.inflight_bytes[rec.path_id] = (
                self.inflight_bytes.get(rec.path_id, 0) + rec.wire_bytes
            )

    def process_ack(
        self,
        space_id: int,
        ranges: Sequence[Tuple[int, int]],
        ack_delay_us: int,
        now: float,
    ) -> AckResult:
        """Apply an ACK frame's ranges to the given space."""
        sp = self.spaces.get(space_id)
        if sp is None:
            raise ProtocolError(f"ack for unknown space {space_id}")
        result = AckResult()
        frame_largest = max(hi for _, hi in ranges)
        if frame_largest >= sp.next_pn:
            raise ProtocolError(
                f"ack of unsent pn {frame_largest} in space {space_id}"
            )
        for lo, hi in ranges:
            for nlo, nhi in sp.acked_iv.subtract_from(lo, hi + 1):
                for pn in range(nlo, nhi):
                    rec = sp.sent.get(pn)
                    if rec is None or rec.acked:
                        continue
                    rec.acked = True
                    if rec.lost:
                        rec.spurious = True
                        result.spurious.append(rec)
                    else:
                        if rec.in_flight:
                            rec.in_flight = False
                            self.inflight_bytes[rec.path_id] -= rec.wire_bytes
                        result.newly_acked.append(rec)
                    if rec.ack_eliciting:
                        lst = sp.acked_by_path.setdefault(rec.path_id, [])
                        insort(lst, pn)
                        prev = sp.max_acked_by_path.get(rec.path_id, -1)
                        if pn > prev:
                            sp.max_acked_by_path[rec.path_id] = pn
            sp.acked_iv.add(lo, hi + 1)
        sp.largest_acked = max(sp.largest_acked, frame_largest)
        # RTT sample only when the frame's largest is newly acked and eliciting
        top = sp.sent.get(frame_largest)
        if (
            top is not None
            and top.ack_eliciting
            and (top in result.newly_acked or top in result.spurious)
        ):
            result.rtt_path = top.path_id
            result.rtt_sample = now - top.sent_time
        for rec in result.newly_acked:
            d = self._delivery(rec.path_id)
            d.delivered += rec.wire_bytes
            d.delivered_time = now
        return result

    def delivery_rate_sample(
        self, rec: SentPacketRecord, now: float
    ) -> Optional[float]:
        """Delivered bytes/s on rec's path over the packet's flight interval."""
        d = self._delivery(rec.path_id)
        interval = now - rec.delivered_time_snapshot
        if interval <= 0:
            return None
        return (d.delivered - rec.delivered_snapshot) / interval

    def detect_losses(
        self, space_id: int, now: float, rtts: Dict[int, RttEstimator]
    ) -> Tuple[List[Tuple[SentPacketRecord, str]], Optional[float]]:
        """Declare losses for one space.

        Returns:
            (list of (record, trigger), earliest future time the time
            threshold could fire, or None)
        """
        sp = self.spaces.get(space_id)
        if sp is None:
            return [], None
        if not sp.max_acked_by_path:
            return [], None
        stop = max(sp.max_acked_by_path.values())
        lost: List[Tuple[SentPacketRecord, str]] = []
        next_time: Optional[float] = None
        pn = sp.scan_floor
        floor_open = True
        while pn <= stop:
            rec = sp.sent.get(pn)
            pn += 1
            if rec is None:
                continue
            if rec.acked or rec.lost or not rec.ack_eliciting:
                if floor_open:
                    sp.scan_floor = pn
                continue
            floor_open = False
            acked_later = sp.acked_by_path.get(rec.path_id)
            if not acked_later:
                continue
            count = len(acked_later) - bisect_right(acked_later, rec.pn)
            if count == 0:
                continue
            if count >= RACK_PACKET_THRESHOLD:
                lost.append((rec, LOSS_THRESHOLD))
                continue
            est = rtts.get(rec.path_id)
            if est is None or est.smoothed is None:
                continue
            threshold = RACK_TIME_FACTOR * max(est.smoothed, est.latest)
            deadline = rec.sent_time + threshold
            # non-strict so a deadline equal to now is resolved here rather
            # than re-armed as a timer for the same instant
            if now >= deadline:
                lost.append((rec, LOSS_TIME))
            elif next_time is None or deadline < next_time:
                next_time = deadline
        for rec, _ in lost:
            self._mark_lost(rec)
        return lost, next_time

    def _mark_lost(self, rec: SentPacketRecord) -> None:
        rec.lost = True
        if rec.in_flight:
            rec.in_flight = False
            self.inflight_bytes[rec.path_id] -= rec.wire_bytes

    def oldest_inflight_on_path(self, path_id: int) -> Optional[SentPacketRecord]:
        best: Optional[SentPacketRecord] = None
        for sp in self.spaces.values():
            for pn in range(sp.scan_floor, sp.next_pn):
                rec = sp.sent.get(pn)
                if rec is None or not rec.in_flight or rec.path_id != path_id:
                    continue
                if best is None or rec.sent_time < best.sent_time:
                    best = rec
                break
        return best

    def mark_lost_pto(self, rec: SentPacketRecord) -> None:
        self._mark_lost(rec)

    def inflight_on_path(self, path_id: int) -> int:
        return self.inflight_bytes.get(path_id, 0)

    def has_eliciting_inflight(self, path_id: int) -> bool:
        return self.inflight_bytes.get(path_id, 0) > 0
