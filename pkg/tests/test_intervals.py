"""Interval containers against brute-force per-byte oracles."""

import random

from mpquicsim.intervals import ChunkQueue, IntervalCounter, IntervalSet

SPAN = 400


def test_interval_set_basic():
    s = IntervalSet()
    assert s.add(0, 10) == 10
    assert s.add(5, 15) == 5  # only new bytes counted
    assert s.add(5, 15) == 0
    assert s.intervals() == [(0, 15)]
    assert s.total() == 15
    assert s.covers(0, 15)
    assert not s.covers(0, 16)
    assert s.contiguous_from(0) == 15
    assert s.contiguous_from(20) == 20


def test_interval_set_merging_adjacent():
    s = IntervalSet()
    s.add(0, 5)
    s.add(5, 10)
    assert s.intervals() == [(0, 10)]


def test_interval_set_subtract_from():
    s = IntervalSet()
    s.add(10, 20)
    s.add(30, 40)
    assert s.subtract_from(0, 50) == [(0, 10), (20, 30), (40, 50)]
    assert s.subtract_from(12, 18) == []
    assert s.subtract_from(15, 35) == [(20, 30)]


def test_interval_set_oracle():
    rng = random.Random(101)
    for _ in range(200):
        s = IntervalSet()
        member = [False] * SPAN
        for _ in range(rng.randrange(1, 40)):
            a = rng.randrange(0, SPAN - 1)
            b = a + rng.randrange(1, 40)
            b = min(b, SPAN)
            added = s.add(a, b)
            assert added == sum(1 for x in range(a, b) if not member[x])
            for x in range(a, b):
                member[x] = True
            assert s.total() == sum(member)
            ivs = s.intervals()
            for (l1, r1), (l2, r2) in zip(ivs, ivs[1:]):
                assert r1 < l2  # disjoint, non-adjacent, sorted
            flat = [False] * SPAN
            for lo, hi in ivs:
                for x in range(lo, min(hi, SPAN)):
                    flat[x] = True
            assert flat == member


def test_interval_counter_oracle():
    rng = random.Random(42)
    for _ in range(200):
        ic = IntervalCounter()
        oracle = [0] * SPAN
        for _ in range(rng.randrange(1, 50)):
            a = rng.randrange(0, SPAN - 40)
            b = a + rng.randrange(1, 40)
            got = ic.increment(a, b)
            for x in range(a, b):
                oracle[x] += 1
            assert got == max(oracle[a:b])
            flat = [0] * SPAN
            for s, e, c in ic._pieces:
                assert c > 0 and s < e
                for x in range(s, e):
                    flat[x] = c
            assert flat == oracle
        assert ic.max_count() == max(oracle)


def test_interval_counter_merges_equal_neighbors():
    ic = IntervalCounter()
    ic.increment(0, 10)
    ic.increment(10, 20)
    ic.increment(20, 30)
    assert ic._pieces == [[0, 30, 1]]
    ic.increment(5, 15)
    assert ic._pieces == [[0, 5, 1], [5, 15, 2], [15, 30, 1]]


def test_interval_counter_empty_and_degenerate():
    ic = IntervalCounter()
    assert ic.increment(5, 5) == 0
    assert ic.increment(7, 3) == 0
    assert ic.max_count() == 0


def test_chunk_queue_fifo_and_merge():
    q = ChunkQueue()
    assert q.peek_offset() is None
    assert q.pop(100) is None
    q.push(0, 100)
    q.push(200, 300)
    assert q.peek_offset() == 0
    assert q.pop(60) == (0, 60)
    assert q.pop(60) == (60, 100)
    assert q.pop(1000) == (200, 300)
    assert q.pop(1) is None


def test_chunk_queue_overlap_skipped():
    q = ChunkQueue()
    assert q.push(0, 100) == 100
    assert q.push(50, 150) == 50  # overlap with queued bytes not re-queued
    assert q.queued_bytes == 150
    assert q.pop(1000) == (0, 100)
    assert q.pop(1000) == (100, 150)
    assert q.pop(1) is None
    assert q.queued_bytes == 0
