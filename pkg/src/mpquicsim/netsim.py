"""Deterministic discrete-event network: links, queues, the event loop."""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass
from typing import Any, Callable, Deque, List, Optional, Tuple

BUFFER_BDP_FACTOR = 1.5


class EventQueue:
    """Min-heap on (time, insertion sequence): FIFO among equal times."""

    __slots__ = ("_heap", "_seq")

    def __init__(self) -> None:
        self._heap: List[Tuple[float, int, Any]] = []
        self._seq = 0

    def push(self, time: float, payload: Any) -> None:
        heapq.heappush(self._heap, (time, self._seq, payload))
        self._seq += 1

    def pop(self) -> Tuple[float, Any]:
        time, _, payload = heapq.heappop(self._heap)
        return time, payload

    def __len__(self) -> int:
        return len(self._heap)

    def __bool__(self) -> bool:
        return bool(self._heap)


def buffer_capacity(bandwidth_bps: float, rtt_s: float) -> int:
    """Drop-tail buffer size in bytes for a path's bandwidth and RTT."""
    return int(BUFFER_BDP_FACTOR * bandwidth_bps * rtt_s / 8)


class Link:
    """One direction of a path: serializer plus propagation delay.

    The byte-counted drop-tail buffer covers packets queued or being
    serialized.  FIFO by construction, so per-link delivery preserves
    enqueue order.
    """

    __slots__ = (
        "bandwidth_bps",
        "delay_s",
        "capacity_bytes",
        "busy_until",
        "_queued",
        "queued_bytes",
        "enqueued",
        "delivered",
        "dropped",
    )

    def __init__(self, bandwidth_bps: float, delay_s: float, capacity_bytes: int) -> None:
        self.bandwidth_bps = bandwidth_bps
        self.delay_s = delay_s
        self.capacity_bytes = capacity_bytes
        self.busy_until = 0.0
        self._queued: Deque[Tuple[float, int]] = deque()  # (serialized_at, bytes)
        self.queued_bytes = 0
        self.enqueued = 0
        self.delivered = 0
        self.dropped = 0

    def _drain(self, now: float) -> None:
        q = self._queued
        while q and q[0][0] <= now:
            self.queued_bytes -= q.popleft()[1]

    def enqueue(self, nbytes: int, now: float) -> Optional[float]:
        """Returns the arrival time at the far end, or None when tail-dropped."""
        self._drain(now)
        self.enqueued += 1
        if self.queued_bytes + nbytes > self.capacity_bytes:
            self.dropped += 1
            return None
        serialization = nbytes * 8 / self.bandwidth_bps
        done = max(self.busy_until, now) + serialization
        self.busy_until = done
        self._queued.append((done, nbytes))
        self.queued_bytes += nbytes
        self.delivered += 1
        return done + self.delay_s


@dataclass
class PathLinks:
    to_server: Link
    to_client: Link


def make_path_links(bandwidth_bps: float, rtt_s: float) -> PathLinks:
    capacity = buffer_capacity(bandwidth_bps, rtt_s)
    half = rtt_s / 2
    return PathLinks(
        to_server=Link(bandwidth_bps, half, capacity),
        to_client=Link(bandwidth_bps, half, capacity),
    )


class SimulationClock:
    __slots__ = ("now",)

    def __init__(self) -> None:
        self.now = 0.0


def run_until_idle(
    queue: EventQueue,
    clock: SimulationClock,
    dispatch: Callable[[float, Any], None],
    stop: Callable[[], bool],
    max_time: float = math.inf,
) -> float:
    """Drive the event loop; returns the final clock value."""
    while queue:
        if stop():
            break
        time, payload = queue.pop()
        if time > max_time:
            raise RuntimeError(
                f"simulation exceeded max_time={max_time}s at t={time:.3f}s"
            )
        if time < clock.now:
            raise RuntimeError("event time went backwards")
        clock.now = time
        dispatch(time, payload)
    return clock.now
