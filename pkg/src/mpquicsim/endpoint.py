"""Connection endpoints: scheduling, flow control, acknowledgment dispatch.

A client requests one stream and acknowledges data; a server serves the
stream over every validated path, round-robin.  Both roles share one
implementation; the asymmetry is only in who has bulk data to send.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from . import wire
from .acktrack import AckAction, AckPolicy, AckTracker, BuiltAck
from .cc import K_MAX_DATAGRAM_SIZE, make_controller
from .intervals import ChunkQueue, IntervalCounter, IntervalSet
from .path import CidRegistry, PathManager, PathState, negotiate
from .sendtrack import (
    INITIAL_RTT_GUESS,
    LOSS_PTO,
    MULTI_SPACE,
    PTO_SRTT_FACTOR,
    SINGLE_SPACE,
    ProtocolError,
    RttEstimator,
    SenderTracker,
    SentPacketRecord,
)
from .trace import TraceRecorder

K_INITIAL_MAX_DATA = 2 * 1024 * 1024
K_MAX_FLOW_WINDOW = 16 * 1024 * 1024
K_HANDSHAKE_PACKET_BYTES = 1200
K_REQUEST_BYTES = 64
K_CLOSE_RESEND_INTERVAL = 0.5
K_CLOSE_RESEND_LIMIT = 8

CLIENT = "client"
SERVER = "server"


@dataclass(slots=True)
class Packet:
    sender: str
    path_id: int
    space_id: int
    pn: int
    frames: Tuple
    wire_bytes: int
    ack_eliciting: bool
    kind: str = "app"  # "app" or "handshake"
    hs_stage: int = 0
    hs_negotiated: Optional[str] = None


@dataclass
class EndpointConfig:
    design: str = SINGLE_SPACE
    cc: str = "cubic"
    cubic_variant: str = "picoquic"
    policy: AckPolicy = field(default_factory=AckPolicy)
    transfer_size: int = 5 * 1024 * 1024
    n_paths: int = 2
    ack_frequency_enabled: bool = True
    client_modes: Optional[frozenset] = None
    server_modes: Optional[frozenset] = None


class _SendStream:
    """Outgoing stream state for one stream id."""

    __slots__ = (
        "size",
        "next_offset",
        "fin_offset",
        "acked",
        "retrans",
        "retrans_counter",
        "retrans_queued_bytes",
        "fin_acked",
    )

    def __init__(self, size: int) -> None:
        self.size = size
        self.next_offset = 0
        self.fin_offset = size
        self.acked = IntervalSet()
        self.retrans = ChunkQueue()
        self.retrans_counter = IntervalCounter()
        self.retrans_queued_bytes = 0
        self.fin_acked = False

    def fully_acked(self) -> bool:
        return self.fin_acked and self.acked.covers(0, self.size)


class _RecvStream:
    __slots__ = ("received", "fin_offset")

    def __init__(self) -> None:
        self.received = IntervalSet()
        self.fin_offset: Optional[int] = None

    def contiguous(self) -> int:
        return self.received.contiguous_from(0)


class Endpoint:
    def __init__(
        self,
        role: str,
        cfg: EndpointConfig,
        trace: TraceRecorder,
        rng: random.Random,
    ) -> None:
        self.role = role
        self.cfg = cfg
        self.trace = trace
        self.rng = rng
        self.design = cfg.design
        self.single_space = cfg.design == SINGLE_SPACE

        self.tracker = SenderTracker(cfg.design)
        # the configured policy governs the data receiver; the data sender
        # acknowledges the sparse reverse traffic with defaults
        self.acks = AckTracker(cfg.policy if role == CLIENT else AckPolicy())
        self.rtts: Dict[int, RttEstimator] = {}
        self.ccs: Dict[int, object] = {}
        self.pathman = PathManager(rng)
        self.cids = CidRegistry()

        self.send_stream: Optional[_SendStream] = None
        self.recv_stream = _RecvStream()

        # flow control: what the peer allows us (sender view)
        self.conn_limit = K_INITIAL_MAX_DATA
        self.stream_limit = K_INITIAL_MAX_DATA
        # what we allow the peer (receiver view)
        self.granted_limit = K_INITIAL_MAX_DATA
        self.grant_window = K_INITIAL_MAX_DATA
        self.last_grant_time: Optional[float] = None

        self.handshake_done = False
        self.negotiated: Optional[str] = None
        self.start_time = 0.0
        self.close_sent = False
        self.close_resends = 0
        self.closed = False
        self.completion_time: Optional[float] = None

        self.outgoing: List[Tuple[int, Packet]] = []
        self.timer_requests: List[Tuple[float, str, int, int]] = []
        self._timer_gen: Dict[Tuple[str, int], int] = {}

        self.path_control: Dict[int, List] = {}
        self.control_queue: List[Tuple] = []
        self._rr_ptr = 0
        self.ack_frequency_sent = False
        self.have_request = role == CLIENT
        self.last_ack_time: Dict[int, float] = {}
        self._pto_until: Dict[int, float] = {}

    # ---- infrastructure -------------------------------------------------

    def _cc(self, path_id: int):
        ctl = self.ccs.get(path_id)
        if ctl is None:
            ctl = self.ccs[path_id] = make_controller(self.cfg.cc, self.cfg.cubic_variant)
        return ctl

    def _rtt(self, path_id: int) -> RttEstimator:
        est = self.rtts.get(path_id)
        if est is None:
            est = self.rtts[path_id] = RttEstimator()
        return est

    def arm_timer(self, kind: str, key: int, at: float) -> None:
        gen = self._timer_gen.get((kind, key), 0) + 1
        self._timer_gen[(kind, key)] = gen
        self.timer_requests.append((at, kind, key, gen))

    def cancel_timer(self, kind: str, key: int) -> None:
        self._timer_gen[(kind, key)] = self._timer_gen.get((kind, key), 0) + 1

    def take_outgoing(self) -> List[Tuple[int, Packet]]:
        out, self.outgoing = self.outgoing, []
        return out

    def take_timer_requests(self) -> List[Tuple[float, str, int, int]]:
        out, self.timer_requests = self.timer_requests, []
        return out

    # ---- handshake ------------------------------------------------------

    def start(self, now: float) -> None:
        """Client entry point: first flight at t=0."""
        assert self.role == CLIENT
        self.start_time = now
        self.trace.emit("transfer_started", now, by=self.role)
        self.pathman.add_path(0)
        self.pathman.mark_validated(0, now)
        self.send_stream = _SendStream(K_REQUEST_BYTES)
        pkt = Packet(
            sender=self.role,
            path_id=0,
            space_id=-1,
            pn=-1,
            frames=(),
            wire_bytes=K_HANDSHAKE_PACKET_BYTES,
            ack_eliciting=False,
            kind="handshake",
            hs_stage=1,
            hs_negotiated=None,
        )
        self._emit_packet(0, pkt, now)

    def _on_handshake(self, pkt: Packet, now: float) -> None:
        if self.role == SERVER and pkt.hs_stage == 1:
            client_modes = self.cfg.client_modes or frozenset({self.cfg.design})
            server_modes = self.cfg.server_modes or frozenset(
                {SINGLE_SPACE, MULTI_SPACE}
            )
            self.negotiated = negotiate(set(client_modes), set(server_modes))
            self.handshake_done = True
            self.pathman.add_path(0)
            self.pathman.mark_validated(0, now)
            self.trace.emit(
                "handshake_complete", now, by=self.role, negotiated=self.negotiated
            )
            n_cids = self.cfg.n_paths + 1
            cids = tuple(
                wire.NewConnectionIdFrame(seq=i, cid=self.rng.randbytes(8))
                for i in range(n_cids)
            )
            reply = Packet(
                sender=self.role,
                path_id=0,
                space_id=-1,
                pn=-1,
                frames=cids,
                wire_bytes=K_HANDSHAKE_PACKET_BYTES,
                ack_eliciting=False,
                kind="handshake",
                hs_stage=2,
                hs_negotiated=self.negotiated,
            )
            self._emit_packet(0, reply, now)
            return
        if self.role == CLIENT and pkt.hs_stage == 2:
            self.negotiated = pkt.hs_negotiated
            self.handshake_done = True
            for frame in pkt.frames:
                if isinstance(frame, wire.NewConnectionIdFrame):
                    self.cids.on_new_connection_id(frame.seq, frame.cid)
            self.trace.emit(
                "handshake_complete", now, by=self.role, negotiated=self.negotiated
            )
            self.cids.take()  # path 0 consumed its id during the handshake
            n_paths = self.cfg.n_paths if self.negotiated is not None else 1
            for pid in range(1, n_paths):
                seq = self.cids.take()
                self.pathman.add_path(pid, cid_seq=seq)
                data = self.pathman.start_validation(pid, now)
                self._queue_path_control(pid, ("challenge", pid, data))
                self.trace.emit("path_challenge_sent", now, by=self.role, path=pid)
            self._try_send(now)

    # ---- sending --------------------------------------------------------

    def _queue_path_control(self, path_id: int, marker: Tuple) -> None:
        self.path_control.setdefault(path_id, []).append(marker)

    def _control_frames_for(self, path_id: int, now: float, include_shared: bool = True):
        """Materialize queued control markers into frames."""
        frames = []
        resend_markers = []
        for marker in self.path_control.pop(path_id, []):
            kind = marker[0]
            if kind == "challenge":
                rec = self.pathman.get(marker[1])
                frames.append(wire.PathChallengeFrame(rec.challenge_data))
                resend_markers.append(marker)
            elif kind == "response":
                frames.append(wire.PathResponseFrame(marker[2]))
                resend_markers.append(marker)
        if not include_shared:
            return frames, resend_markers
        queue_rest = []
        for marker in self.control_queue:
            kind = marker[0]
            if kind == "ack_freq":
                frames.append(
                    wire.AckFrequencyFrame(
                        packet_threshold=10,
                        max_ack_delay_us=self.acks.policy.max_ack_delay_us,
                        ignore_reorder=True,
                    )
                )
                resend_markers.append(marker)
            elif kind == "flow":
                frames.append(wire.MaxDataFrame(self.granted_limit))
                frames.append(wire.MaxStreamDataFrame(0, self.granted_limit))
                resend_markers.append(marker)
            elif kind == "close":
                frames.append(wire.ConnectionCloseFrame())
            else:
                queue_rest.append(marker)
        self.control_queue = queue_rest
        return frames, resend_markers

    def _has_control(self, path_id: int) -> bool:
        return bool(self.path_control.get(path_id)) or bool(self.control_queue)

    def _has_stream_data(self) -> bool:
        ss = self.send_stream
        if ss is None or not self.have_request:
            return False
        if ss.retrans:
            return True
        if ss.next_offset < ss.size:
            return ss.next_offset < min(self.conn_limit, self.stream_limit)
        return False

    def _sendable(self, path_id: int) -> bool:
        return self._has_control(path_id) or self._has_stream_data()

    def _try_send(self, now: float) -> None:
        """Round-robin packet emission over validated paths with credit."""
        if self.closed:
            return
        pace_wait: Optional[float] = None
        # validation probes travel on not-yet-validated paths
        for pid in sorted(self.path_control):
            if not self.path_control.get(pid):
                continue
            if pid in self.pathman.usable_paths():
                continue
            ctl = self._cc(pid)
            if self.tracker.inflight_on_path(pid) >= ctl.cwnd:
                continue
            wait = ctl.pacer.allow(K_MAX_DATAGRAM_SIZE, now)
            if wait is not None:
                pace_wait = wait if pace_wait is None else min(pace_wait, wait)
                continue
            pkt = self._build_app_packet(pid, now, data_allowed=False)
            if pkt is not None:
                self._emit_packet(pid, pkt, now)
        usable = self.pathman.usable_paths()
        if not usable:
            if pace_wait is not None:
                self.arm_timer("pace", 0, pace_wait)
            return
        while True:
            n = len(usable)
            start = self._rr_ptr % n
            chosen = None
            for step in range(n):
                pid = usable[(start + step) % n]
                if not self._sendable(pid):
                    continue
                ctl = self._cc(pid)
                if self.tracker.inflight_on_path(pid) >= ctl.cwnd:
                    continue
                wait = ctl.pacer.allow(K_MAX_DATAGRAM_SIZE, now)
                if wait is not None:
                    pace_wait = wait if pace_wait is None else min(pace_wait, wait)
                    continue
                chosen = (pid, (start + step + 1) % n)
                break
            if chosen is None:
                break
            pid, next_ptr = chosen
            pkt = self._build_app_packet(pid, now)
            if pkt is None:
                break
            self._rr_ptr = next_ptr
            self._emit_packet(pid, pkt, now)
        if pace_wait is not None:
            self.arm_timer("pace", 0, pace_wait)

    def _build_app_packet(
        self, path_id: int, now: float, data_allowed: bool = True
    ) -> Optional[Packet]:
        budget = K_MAX_DATAGRAM_SIZE - wire.PACKET_OVERHEAD
        frames: List = []
        control_frames, resend_markers = self._control_frames_for(
            path_id, now, include_shared=data_allowed
        )
        frames.extend(control_frames)
        for f in control_frames:
            budget -= wire.encoded_size(f)

        # opportunistic acknowledgment bundling rides eliciting packets
        carried_acks: List[BuiltAck] = []
        will_elicit = any(wire.is_ack_eliciting(f) for f in frames) or (
            data_allowed and self._has_stream_data()
        )
        if will_elicit:
            for built in self.acks.build_acks(now):
                frame = self.acks.to_frame(built, self.single_space)
                size = wire.encoded_size(frame)
                if size > budget:
                    continue
                frames.append(frame)
                budget -= size
                carried_acks.append(built)
                self._trace_ack_frame(built, frame, path_id, now)

        stream_ranges: List[Tuple[int, int, int, bool]] = []
        ss = self.send_stream
        if data_allowed and ss is not None and self.have_request:
            while budget > 8:
                hdr = 2 + 2  # type + stream id 0 + 2-byte length ceiling
                chunk = None
                retrans = False
                if ss.retrans:
                    hdr = 2 + wire.varint_size(ss.retrans.peek_offset()) + 2
                    chunk = ss.retrans.pop(budget - hdr)
                    retrans = chunk is not None
                if chunk is None and ss.next_offset < ss.size:
                    limit = min(self.conn_limit, self.stream_limit, ss.size)
                    if ss.next_offset < limit:
                        hdr = 2 + wire.varint_size(ss.next_offset) + 2
                        ln = min(budget - hdr, limit - ss.next_offset)
                        if ln > 0:
                            chunk = (ss.next_offset, ss.next_offset + ln)
                            ss.next_offset += ln
                if chunk is None:
                    break
                off, end = chunk
                fin = end >= ss.fin_offset
                frame = wire.StreamFrame(0, off, end - off, fin, retrans=retrans)
                frames.append(frame)
                budget -= wire.encoded_size(frame)
                stream_ranges.append((0, off, end - off, fin))
                self.trace.emit(
                    "stream_send",
                    now,
                    by=self.role,
                    path=path_id,
                    offset=off,
                    len=end - off,
                    fin=fin,
                    retrans=retrans,
                )
        if not frames:
            return None
        eliciting = any(wire.is_ack_eliciting(f) for f in frames)
        app_limited = not self._has_stream_data()
        space_id, pn = self.tracker.assign_pn(path_id)
        pkt = Packet(
            sender=self.role,
            path_id=path_id,
            space_id=space_id,
            pn=pn,
            frames=tuple(frames),
            wire_bytes=wire.PACKET_OVERHEAD + sum(wire.encoded_size(f) for f in frames),
            ack_eliciting=eliciting,
        )
        rec = SentPacketRecord(
            space_id=space_id,
            pn=pn,
            path_id=path_id,
            sent_time=now,
            wire_bytes=pkt.wire_bytes,
            ack_eliciting=eliciting,
            stream_ranges=tuple(stream_ranges),
            ack_ranges_carried=tuple(
                (b.space_id, b.ranges) for b in carried_acks
            ),
            control_resend=tuple(resend_markers),
            app_limited=app_limited,
        )
        self.tracker.on_packet_sent(rec, now)
        cc = self._cc(path_id)
        cc.on_packet_sent(pkt.wire_bytes, now)
        if eliciting and path_id not in self._pto_until:
            # sends do not reset the silence clock, only start it
            self._arm_pto(path_id, now)
        return pkt

    def _emit_packet(self, path_id: int, pkt: Packet, now: float) -> None:
        self.trace.emit(
            "packet_sent",
            now,
            by=self.role,
            path=path_id,
            space=pkt.space_id,
            pn=pkt.pn,
            bytes=pkt.wire_bytes,
            kind=pkt.kind,
            ack_eliciting=pkt.ack_eliciting,
        )
        self.outgoing.append((path_id, pkt))

    def _trace_ack_frame(self, built: BuiltAck, frame, path_id: int, now: float) -> None:
        self.trace.emit(
            "ack_generated",
            now,
            by=self.role,
            path=path_id,
            space=built.space_id,
            n_ranges=len(built.ranges),
            at_limit=built.at_limit,
            bytes=wire.encoded_size(frame),
            largest=built.ranges[0][1],
            ack_delay_us=built.ack_delay_us,
        )

    def _flush_acks(self, now: float, bundle_all: bool = False) -> None:
        built = self.acks.build_acks(now, bundle_all=bundle_all)
        if not built:
            return
        if self.acks.policy.dispatch == "duplicate":
            targets = self.pathman.usable_paths() or [self.acks.last_rx_path or 0]
        else:
            targets = [self.acks.last_rx_path if self.acks.last_rx_path is not None else 0]
        for pid in targets:
            frames = []
            for b in built:
                frame = self.acks.to_frame(b, self.single_space)
                frames.append(frame)
                self._trace_ack_frame(b, frame, pid, now)
            space_id, pn = self.tracker.assign_pn(pid)
            pkt = Packet(
                sender=self.role,
                path_id=pid,
                space_id=space_id,
                pn=pn,
                frames=tuple(frames),
                wire_bytes=wire.PACKET_OVERHEAD
                + sum(wire.encoded_size(f) for f in frames),
                ack_eliciting=False,
            )
            rec = SentPacketRecord(
                space_id=space_id,
                pn=pn,
                path_id=pid,
                sent_time=now,
                wire_bytes=pkt.wire_bytes,
                ack_eliciting=False,
            )
            self.tracker.on_packet_sent(rec, now)
            self._emit_packet(pid, pkt, now)

    # ---- receiving ------------------------------------------------------

    def on_datagram(self, pkt: Packet, now: float) -> None:
        if self.closed:
            return
        if pkt.kind == "handshake":
            self._on_handshake(pkt, now)
            return
        path_id = pkt.path_id
        expected_space = 0 if self.single_space else path_id
        if pkt.space_id != expected_space:
            raise ProtocolError(
                f"packet space {pkt.space_id} does not match path {path_id}"
            )
        decision = self.acks.on_packet_received(
            pkt.space_id, pkt.pn, pkt.ack_eliciting, path_id, now
        )
        self.trace.emit(
            "packet_received",
            now,
            by=self.role,
            path=path_id,
            space=pkt.space_id,
            pn=pkt.pn,
            bytes=pkt.wire_bytes,
        )
        for frame in pkt.frames:
            self._on_frame(frame, path_id, now)
        if self.close_sent and not self.closed:
            self._maybe_resend_close(now)
        self._try_send(now)
        if decision.action == AckAction.SEND_NOW:
            self._flush_acks(now, bundle_all=decision.bundle_all)
        elif decision.action == AckAction.SCHEDULE:
            self.arm_timer("ack", 0, decision.at)

    def _on_frame(self, frame, path_id: int, now: float) -> None:
        if isinstance(frame, wire.StreamFrame):
            self._on_stream_frame(frame, now)
        elif isinstance(frame, (wire.AckFrame, wire.AckMpFrame)):
            space_id = frame.path_id if isinstance(frame, wire.AckMpFrame) else 0
            if self.single_space and isinstance(frame, wire.AckMpFrame):
                raise ProtocolError("path-aware ack under single-space design")
            if not self.single_space and isinstance(frame, wire.AckFrame):
                raise ProtocolError("plain ack under per-path-space design")
            self._on_ack_frame(space_id, frame, now)
        elif isinstance(frame, wire.MaxDataFrame):
            self.conn_limit = max(self.conn_limit, frame.limit)
        elif isinstance(frame, wire.MaxStreamDataFrame):
            self.stream_limit = max(self.stream_limit, frame.limit)
        elif isinstance(frame, wire.PathChallengeFrame):
            self.pathman.on_challenge(path_id, frame.data)
            self._queue_path_control(path_id, ("response", path_id, frame.data))
            rec = self.pathman.get(path_id)
            if rec.state == PathState.UNUSED:
                data = self.pathman.start_validation(path_id, now)
                self._queue_path_control(path_id, ("challenge", path_id, data))
                self.trace.emit("path_challenge_sent", now, by=self.role, path=path_id)
        elif isinstance(frame, wire.PathResponseFrame):
            if self.pathman.on_response(path_id, frame.data, now):
                self.trace.emit("path_validated", now, by=self.role, path=path_id)
        elif isinstance(frame, wire.NewConnectionIdFrame):
            self.cids.on_new_connection_id(frame.seq, frame.cid)
        elif isinstance(frame, wire.AckFrequencyFrame):
            self.acks.apply_ack_frequency(frame.packet_threshold, frame.ignore_reorder)
        elif isinstance(frame, wire.ConnectionCloseFrame):
            self.closed = True
            self.completion_time = now - self.start_time
            self.trace.emit(
                "transfer_complete", now, by=self.role, seconds=self.completion_time
            )

    def _on_stream_frame(self, frame: wire.StreamFrame, now: float) -> None:
        if self.role == SERVER and not self.have_request:
            self.have_request = True
            self.send_stream = _SendStream(self.cfg.transfer_size)
        start, end = frame.offset, frame.offset + frame.length
        new_bytes = self.recv_stream.received.add(start, end)
        if new_bytes < frame.length:
            self.trace.emit(
                "duplicate_received",
                now,
                by=self.role,
                offset=start,
                len=frame.length,
                new_bytes=new_bytes,
            )
        if frame.fin:
            self.recv_stream.fin_offset = end
        if self.role == CLIENT:
            self._maybe_grant_flow(now)

    def _maybe_grant_flow(self, now: float) -> None:
        consumed = self.recv_stream.contiguous()
        if consumed < self.granted_limit - self.grant_window // 2:
            return
        if self.granted_limit >= self.cfg.transfer_size + self.grant_window:
            return
        rtt_hint = self._rtt_hint()
        if (
            self.last_grant_time is not None
            and now - self.last_grant_time < rtt_hint
            and self.grant_window < K_MAX_FLOW_WINDOW
        ):
            self.grant_window = min(self.grant_window * 2, K_MAX_FLOW_WINDOW)
        self.granted_limit = consumed + self.grant_window
        self.last_grant_time = now
        if ("flow",) not in self.control_queue:
            self.control_queue.append(("flow",))
        self.trace.emit("max_data_sent", now, by=self.role, limit=self.granted_limit)

    def _rtt_hint(self) -> float:
        hints = [est.smoothed for est in self.rtts.values() if est.smoothed]
        for pid, rec in self.pathman.paths.items():
            if rec.validated_time and rec.challenge_sent_time < rec.validated_time:
                hints.append(rec.validated_time - rec.challenge_sent_time)
        return max(hints) if hints else INITIAL_RTT_GUESS

    def _on_ack_frame(self, space_id: int, frame, now: float) -> None:
        result = self.tracker.process_ack(
            space_id, frame.ranges, frame.ack_delay_us, now
        )
        if (
            self.role == SERVER
            and self.cfg.ack_frequency_enabled
            and not self.ack_frequency_sent
            and len(frame.ranges) > 1
        ):
            self.ack_frequency_sent = True
            self.control_queue.append(("ack_freq",))
            self.trace.emit("ack_frequency_sent", now, by=self.role)
        if result.rtt_sample is not None:
            est = self._rtt(result.rtt_path)
            est.update(result.rtt_sample, frame.ack_delay_us / 1e6)
            self.trace.emit(
                "rtt_sample",
                now,
                by=self.role,
                path=result.rtt_path,
                latest_us=int(round(result.rtt_sample * 1e6)),
                srtt_us=int(round(est.smoothed * 1e6)),
            )
        acked_paths = set()
        for rec in result.newly_acked:
            acked_paths.add(rec.path_id)
            self._on_record_acked(rec, now, spurious=False)
        for rec in result.spurious:
            self.trace.emit(
                "spurious_loss", now, by=self.role, space=rec.space_id, pn=rec.pn
            )
            self._on_record_acked(rec, now, spurious=True)
        lost, next_loss = self.tracker.detect_losses(space_id, now, self.rtts)
        for rec, trigger in lost:
            self._on_record_lost(rec, trigger, now)
        if next_loss is not None:
            self.arm_timer("loss", space_id, next_loss)
        for pid in sorted(acked_paths):
            self.last_ack_time[pid] = now
            if self.tracker.has_eliciting_inflight(pid):
                self._arm_pto(pid, now)
            else:
                self._cancel_pto(pid)
        self._maybe_close(now)

    def _on_record_acked(self, rec: SentPacketRecord, now: float, spurious: bool) -> None:
        ss = self.send_stream
        if ss is not None:
            for sid, off, ln, fin in rec.stream_ranges:
                ss.acked.add(off, off + ln)
                if fin:
                    ss.fin_acked = True
        for space_id, ranges in rec.ack_ranges_carried:
            sp = self.acks.spaces.get(space_id)
            if sp is not None:
                sp.ranges.prune_confirmed(ranges)
        if spurious:
            return
        cc = self._cc(rec.path_id)
        rate = self.tracker.delivery_rate_sample(rec, now)
        delivered = self.tracker.delivery[rec.path_id].delivered
        cc.on_ack(
            rec.wire_bytes,
            now,
            self._rtt(rec.path_id),
            delivery_rate=rate,
            app_limited=rec.app_limited,
            bytes_in_flight=self.tracker.inflight_on_path(rec.path_id),
            delivered_total=delivered,
            delivered_at_send=rec.delivered_snapshot,
        )

    def _on_record_lost(self, rec: SentPacketRecord, trigger: str, now: float) -> None:
        self.trace.emit(
            "packet_lost",
            now,
            by=self.role,
            space=rec.space_id,
            pn=rec.pn,
            path=rec.path_id,
            trigger=trigger,
        )
        self._queue_retransmission(rec, now)
        if trigger != LOSS_PTO:
            cc = self._cc(rec.path_id)
            reduced = cc.on_loss(rec.sent_time, now, self._rtt(rec.path_id))
            if reduced:
                self.trace.emit(
                    "cc_state",
                    now,
                    by=self.role,
                    path=rec.path_id,
                    cwnd=int(cc.cwnd),
                    mode=cc.mode_label(),
                )

    def _queue_retransmission(self, rec: SentPacketRecord, now: float) -> None:
        ss = self.send_stream
        if ss is not None:
            for sid, off, ln, fin in rec.stream_ranges:
                for a, b in ss.acked.subtract_from(off, off + ln):
                    added = ss.retrans.push(a, b)
                    if added:
                        ss.retrans_queued_bytes += added
                        nth = ss.retrans_counter.increment(a, b)
                        self.trace.emit(
                            "stream_retransmit",
                            now,
                            by=self.role,
                            offset=a,
                            len=b - a,
                            nth_time=nth,
                        )
        for marker in rec.control_resend:
            if marker[0] in ("challenge", "response"):
                pid = marker[1]
                prec = self.pathman.paths.get(pid)
                if marker[0] == "challenge" and prec and prec.state == PathState.PROBING:
                    self._queue_path_control(pid, marker)
                elif marker[0] == "response":
                    self._queue_path_control(pid, marker)
            elif marker == ("ack_freq",) or marker == ("flow",):
                if marker not in self.control_queue:
                    self.control_queue.append(marker)

    def _maybe_close(self, now: float) -> None:
        if self.role != SERVER or self.close_sent:
            return
        ss = self.send_stream
        if ss is None or not self.have_request or not ss.fully_acked():
            return
        self.close_sent = True
        self.control_queue.append(("close",))
        self.trace.emit("connection_close_queued", now, by=self.role)
        self.arm_timer("close", 0, now + K_CLOSE_RESEND_INTERVAL)

    def _maybe_resend_close(self, now: float) -> None:
        if self.close_resends >= K_CLOSE_RESEND_LIMIT:
            return
        if ("close",) not in self.control_queue:
            self.close_resends += 1
            self.control_queue.append(("close",))

    # ---- timers ---------------------------------------------------------

    def _arm_pto(self, path_id: int, now: float) -> None:
        srtt = self._rtt(path_id).smoothed_or_default()
        deadline = now + PTO_SRTT_FACTOR * srtt
        self._pto_until[path_id] = deadline
        self.arm_timer("pto", path_id, deadline)

    def _cancel_pto(self, path_id: int) -> None:
        self._pto_until.pop(path_id, None)
        self.cancel_timer("pto", path_id)

    def on_timer(self, kind: str, key: int, gen: int, now: float) -> None:
        if self._timer_gen.get((kind, key), 0) != gen or self.closed:
            return
        if kind == "ack":
            self._flush_acks(now)
        elif kind == "pace":
            self._try_send(now)
        elif kind == "loss":
            lost, next_loss = self.tracker.detect_losses(key, now, self.rtts)
            for rec, trigger in lost:
                self._on_record_lost(rec, trigger, now)
            if next_loss is not None:
                self.arm_timer("loss", key, next_loss)
            self._try_send(now)
        elif kind == "pto":
            self._on_pto(key, now)
        elif kind == "close":
            if self.close_sent and self.close_resends < K_CLOSE_RESEND_LIMIT:
                self._maybe_resend_close(now)
                self.arm_timer("close", 0, now + K_CLOSE_RESEND_INTERVAL)
                self._try_send(now)

    def _on_pto(self, path_id: int, now: float) -> None:
        self._pto_until.pop(path_id, None)
        if not self.tracker.has_eliciting_inflight(path_id):
            return
        rec = self.tracker.oldest_inflight_on_path(path_id)
        if rec is None:
            return
        self.tracker.mark_lost_pto(rec)
        self._on_record_lost(rec, LOSS_PTO, now)
        self._arm_pto(path_id, now)
        self._try_send(now)
