"""Receiver-side acknowledgment state: range sets, policies, frame building.

Packet-number ranges are inclusive [lo, hi] pairs; adjacent ranges merge.
One tracker instance handles all packet number spaces of a connection
(one space for the shared design, one per path otherwise).
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from .wire import AckFrame, AckMpFrame

DEFAULT_PACKET_THRESHOLD = 2
DEFAULT_MAX_ACK_DELAY_US = 25_000
RAISED_PACKET_THRESHOLD = 10


class RangeSet:
    """Disjoint inclusive packet-number ranges with a stale floor.

    Numbers below the floor were pruned after the peer confirmed an ACK
    carrying them; they are never re-added.
    """

    __slots__ = ("_ranges", "floor")

    def __init__(self) -> None:
        self._ranges: List[List[int]] = []  # ascending [lo, hi]
        self.floor = 0

    def __len__(self) -> int:
        return len(self._ranges)

    def __bool__(self) -> bool:
        return bool(self._ranges)

    def __contains__(self, pn: int) -> bool:
        i = bisect_right(self._ranges, [pn, float("inf")]) - 1
        return i >= 0 and self._ranges[i][0] <= pn <= self._ranges[i][1]

    def ranges(self) -> Tuple[Tuple[int, int], ...]:
        return tuple((lo, hi) for lo, hi in self._ranges)

    @property
    def largest(self) -> Optional[int]:
        return self._ranges[-1][1] if self._ranges else None

    def insert(self, pn: int) -> bool:
        """Record pn; returns False for duplicates and pruned-stale numbers."""
        if pn < self.floor:
            return False
        rs = self._ranges
        i = bisect_right(rs, [pn, float("inf")])
        if i > 0 and rs[i - 1][1] >= pn:
            return False  # duplicate
        # merge with neighbors when adjacent
        left = i > 0 and rs[i - 1][1] == pn - 1
        right = i < len(rs) and rs[i][0] == pn + 1
        if left and right:
            rs[i - 1][1] = rs[i][1]
            del rs[i]
        elif left:
            rs[i - 1][1] = pn
        elif right:
            rs[i][0] = pn
        else:
            rs.insert(i, [pn, pn])
        return True

    def prune_confirmed(self, confirmed: Sequence[Tuple[int, int]]) -> None:
        """Drop ranges the peer has seen, keeping the largest number.

        confirmed holds (lo, hi) ranges previously carried in an ACK frame
        whose packet the peer acknowledged.
        """
        if not self._ranges:
            return
        largest = self._ranges[-1][1]
        keep: List[List[int]] = []
        for lo, hi in self._ranges:
            pieces = [[lo, hi]]
            for clo, chi in confirmed:
                next_pieces = []
                for plo, phi in pieces:
                    if chi < plo or clo > phi:
                        next_pieces.append([plo, phi])
                        continue
                    if plo < clo:
                        next_pieces.append([plo, clo - 1])
                    if phi > chi:
                        next_pieces.append([chi + 1, phi])
                pieces = next_pieces
            keep.extend(pieces)
        if not keep or keep[-1][1] < largest:
            keep.append([largest, largest])
        self._ranges = keep
        self.floor = max(self.floor, keep[0][0])


def select_ranges(
    rs: RangeSet, ab_limit: Optional[int], strategy: str
) -> List[Tuple[int, int]]:
    """Pick the ranges an ACK frame will carry.

    The range holding the largest number is always included so Largest
    Acknowledged stays truthful.  With "largest-first" the frame carries
    the ab_limit + 1 highest ranges, descending.  With "lowest-first" it
    carries the largest range followed by the lowest ranges, ascending.
    An ab_limit of None means no cap.
    """
    ranges = rs.ranges()
    if not ranges:
        raise ValueError("nothing to acknowledge")
    slots = len(ranges) if ab_limit is None else min(len(ranges), ab_limit + 1)
    if strategy == "largest-first":
        return [ranges[-1 - i] for i in range(slots)]
    if strategy == "lowest-first":
        out = [ranges[-1]]
        for r in ranges:
            if len(out) >= slots:
                break
            if r != ranges[-1]:
                out.append(r)
        return out
    raise ValueError(f"unknown range strategy: {strategy}")


@dataclass
class AckPolicy:
    """Receiver acknowledgment behavior knobs."""

    ab_limit: Optional[int] = 32
    strategy: str = "largest-first"
    dispatch: str = "on-path"  # or "duplicate"
    packet_threshold: int = DEFAULT_PACKET_THRESHOLD
    max_ack_delay_us: int = DEFAULT_MAX_ACK_DELAY_US
    pquic_mode: bool = False


class AckAction(Enum):
    NONE = 0
    SCHEDULE = 1
    SEND_NOW = 2


@dataclass(frozen=True)
class AckDecision:
    action: AckAction
    at: float = 0.0
    bundle_all: bool = False


@dataclass
class BuiltAck:
    space_id: int
    ranges: Tuple[Tuple[int, int], ...]  # descending, wire order
    ack_delay_us: int
    at_limit: bool


class _SpaceState:
    __slots__ = ("ranges", "largest_rx_time", "pending_eliciting", "has_news")

    def __init__(self) -> None:
        self.ranges = RangeSet()
        self.largest_rx_time = 0.0
        self.pending_eliciting = 0
        self.has_news = False


class AckTracker:
    """Tracks received packet numbers and decides when to acknowledge."""

    def __init__(self, policy: AckPolicy) -> None:
        self.policy = policy
        self.packet_threshold = policy.packet_threshold
        self.ignore_reorder = False
        self.spaces: Dict[int, _SpaceState] = {}
        self.last_rx_path: Optional[int] = None
        self.timer_armed = False
        self.duplicates = 0

    def space(self, space_id: int) -> _SpaceState:
        sp = self.spaces.get(space_id)
        if sp is None:
            sp = self.spaces[space_id] = _SpaceState()
        return sp

    def apply_ack_frequency(self, packet_threshold: int, ignore_reorder: bool) -> None:
        self.packet_threshold = packet_threshold
        self.ignore_reorder = ignore_reorder

    def on_packet_received(
        self, space_id: int, pn: int, ack_eliciting: bool, path_id: int, now: float
    ) -> AckDecision:
        sp = self.space(space_id)
        self.last_rx_path = path_id
        prev_largest = sp.ranges.largest
        if not sp.ranges.insert(pn):
            self.duplicates += 1
            return AckDecision(AckAction.NONE)
        if prev_largest is None or pn > prev_largest:
            sp.largest_rx_time = now
        if not ack_eliciting:
            return AckDecision(AckAction.NONE)
        sp.pending_eliciting += 1
        sp.has_news = True
        if self.policy.pquic_mode:
            if sp.pending_eliciting >= 2:
                return AckDecision(AckAction.SEND_NOW, bundle_all=True)
            return self._schedule(now)
        if sp.pending_eliciting >= self.packet_threshold:
            return AckDecision(AckAction.SEND_NOW)
        reordered = prev_largest is not None and pn != prev_largest + 1
        if reordered and not self.ignore_reorder:
            return AckDecision(AckAction.SEND_NOW)
        return self._schedule(now)

    def _schedule(self, now: float) -> AckDecision:
        if self.timer_armed:
            return AckDecision(AckAction.NONE)
        self.timer_armed = True
        return AckDecision(
            AckAction.SCHEDULE, at=now + self.policy.max_ack_delay_us / 1e6
        )

    def build_acks(self, now: float, bundle_all: bool = False) -> List[BuiltAck]:
        """Materialize pending acknowledgment content and reset counters."""
        out: List[BuiltAck] = []
        for space_id in sorted(self.spaces):
            sp = self.spaces[space_id]
            if not sp.ranges:
                continue
            if not bundle_all and not sp.has_news:
                continue
            selected = select_ranges(sp.ranges, self.policy.ab_limit, self.policy.strategy)
            ordered = tuple(sorted(selected, key=lambda r: r[1], reverse=True))
            delay_us = max(0, int(round((now - sp.largest_rx_time) * 1e6)))
            at_limit = (
                self.policy.ab_limit is not None
                and len(ordered) == self.policy.ab_limit + 1
            )
            out.append(BuiltAck(space_id, ordered, delay_us, at_limit))
            sp.pending_eliciting = 0
            sp.has_news = False
        self.timer_armed = False
        return out

    def to_frame(self, built: BuiltAck, single_space: bool):
        if single_space:
            return AckFrame(built.ranges[0][1], built.ack_delay_us, built.ranges)
        return AckMpFrame(
            built.space_id, built.ranges[0][1], built.ack_delay_us, built.ranges
        )
