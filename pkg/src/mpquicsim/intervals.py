"""Byte-interval bookkeeping helpers.

Intervals here are half-open [start, end) over stream offsets, unlike the
inclusive packet-number ranges in acktrack.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from typing import Iterable, List, Optional, Tuple


class IntervalSet:
    """Sorted set of disjoint half-open byte intervals."""

    __slots__ = ("_iv",)

    def __init__(self) -> None:
        self._iv: List[List[int]] = []

    def __len__(self) -> int:
        return len(self._iv)

    def __bool__(self) -> bool:
        return bool(self._iv)

    def intervals(self) -> List[Tuple[int, int]]:
        return [(a, b) for a, b in self._iv]

    def total(self) -> int:
        return sum(b - a for a, b in self._iv)

    def add(self, start: int, end: int) -> int:
        """Insert [start, end), merging overlaps.

        Returns:
            Number of bytes newly covered.
        """
        if end <= start:
            return 0
        iv = self._iv
        i = bisect_left(iv, [start])
        if i > 0 and iv[i - 1][1] >= start:
            i -= 1
        new_bytes = end - start
        lo, hi = start, end
        j = i
        while j < len(iv) and iv[j][0] <= hi:
            new_bytes -= min(hi, iv[j][1]) - max(lo, iv[j][0])
            lo = min(lo, iv[j][0])
            hi = max(hi, iv[j][1])
            j += 1
        iv[i:j] = [[lo, hi]]
        return max(new_bytes, 0)

    def covers(self, start: int, end: int) -> bool:
        if end <= start:
            return True
        iv = self._iv
        i = bisect_right(iv, [start, float("inf")]) - 1
        return i >= 0 and iv[i][0] <= start and iv[i][1] >= end

    def contiguous_from(self, start: int = 0) -> int:
        """Highest offset reachable from start without a hole."""
        iv = self._iv
        i = bisect_right(iv, [start, float("inf")]) - 1
        if i >= 0 and iv[i][0] <= start <= iv[i][1]:
            return iv[i][1]
        return start

    def subtract_from(self, start: int, end: int) -> List[Tuple[int, int]]:
        """Parts of [start, end) not covered by this set."""
        out = []
        cur = start
        for a, b in self._iv:
            if b <= cur:
                continue
            if a >= end:
                break
            if a > cur:
                out.append((cur, min(a, end)))
            cur = max(cur, b)
            if cur >= end:
                break
        if cur < end:
            out.append((cur, end))
        return out


class IntervalCounter:
    """Piecewise-constant per-byte counter over offsets."""

    __slots__ = ("_pieces",)

    def __init__(self) -> None:
        # disjoint sorted [start, end, count] with count > 0
        self._pieces: List[List[int]] = []

    def increment(self, start: int, end: int) -> int:
        """Add 1 over [start, end); returns the max count now in the span."""
        if end <= start:
            return 0
        pieces = self._pieces
        j = bisect_right(pieces, [start, float("inf")]) - 1
        i = j if j >= 0 and pieces[j][1] > start else j + 1
        k = i
        mid: List[List[int]] = []
        cur = start
        max_count = 1
        while k < len(pieces) and pieces[k][0] < end:
            a, b, c = pieces[k]
            if a > cur:
                mid.append([cur, a, 1])
                cur = a
            elif a < cur:
                mid.append([a, cur, c])
            hi = min(b, end)
            if cur < hi:
                mid.append([cur, hi, c + 1])
                if c + 1 > max_count:
                    max_count = c + 1
                cur = hi
            if b > end:
                mid.append([end, b, c])
            k += 1
        if cur < end:
            mid.append([cur, end, 1])
        # merge equal-count neighbors so pieces stay proportional to the
        # number of distinct retransmission regions, not to sends
        if i > 0 and pieces[i - 1][1] == mid[0][0] and pieces[i - 1][2] == mid[0][2]:
            mid[0] = [pieces[i - 1][0], mid[0][1], mid[0][2]]
            i -= 1
        merged: List[List[int]] = []
        for p in mid:
            if merged and merged[-1][1] == p[0] and merged[-1][2] == p[2]:
                merged[-1][1] = p[1]
            else:
                merged.append(p)
        if k < len(pieces) and pieces[k][0] == merged[-1][1] and pieces[k][2] == merged[-1][2]:
            merged[-1][1] = pieces[k][1]
            k += 1
        pieces[i:k] = merged
        return max_count

    def max_count(self) -> int:
        return max((c for _, _, c in self._pieces), default=0)


class ChunkQueue:
    """FIFO queue of byte ranges awaiting (re)send, merged on overlap."""

    __slots__ = ("_chunks", "queued_bytes")

    def __init__(self) -> None:
        self._chunks: List[List[int]] = []
        self.queued_bytes = 0

    def __bool__(self) -> bool:
        return bool(self._chunks)

    def peek_offset(self) -> Optional[int]:
        return self._chunks[0][0] if self._chunks else None

    def push(self, start: int, end: int) -> int:
        """Queue [start, end); returns bytes actually added (overlap skipped)."""
        added = 0
        for a, b in IntervalSet_from(self._chunks).subtract_from(start, end):
            self._chunks.append([a, b])
            added += b - a
        self.queued_bytes += added
        return added

    def pop(self, max_bytes: int) -> Tuple[int, int] | None:
        """Dequeue up to max_bytes from the oldest chunk."""
        if not self._chunks or max_bytes <= 0:
            return None
        a, b = self._chunks[0]
        take = min(max_bytes, b - a)
        if take == b - a:
            self._chunks.pop(0)
        else:
            self._chunks[0][0] = a + take
        self.queued_bytes -= take
        return (a, a + take)


def IntervalSet_from(chunks: Iterable[Iterable[int]]) -> IntervalSet:
    s = IntervalSet()
    for a, b in chunks:
        s.add(a, b)
    return s
