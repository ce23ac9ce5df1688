"""Receiver-side range tracking, selection, and ack scheduling."""

import random

import pytest

from mpquicsim.acktrack import (
    DEFAULT_MAX_ACK_DELAY_US,
    AckAction,
    AckPolicy,
    AckTracker,
    RangeSet,
    select_ranges,
)
from mpquicsim.wire import AckFrame, AckMpFrame


def test_rangeset_walkthrough_inserts():
    rs = RangeSet()
    for pn in (0, 2, 1, 3, 5):
        assert rs.insert(pn)
    assert rs.ranges() == ((0, 3), (5, 5))
    assert rs.insert(7)
    assert rs.ranges() == ((0, 3), (5, 5), (7, 7))
    assert rs.largest == 7


def test_rangeset_gap_fill_merges():
    rs = RangeSet()
    for pn in (0, 1, 2, 3, 5):
        rs.insert(pn)
    rs.insert(4)
    assert rs.ranges() == ((0, 5),)


def test_rangeset_duplicate_flagged():
    rs = RangeSet()
    assert rs.insert(3)
    assert not rs.insert(3)
    assert rs.ranges() == ((3, 3),)


def test_rangeset_bitset_oracle():
    rng = random.Random(77)
    for _ in range(300):
        rs = RangeSet()
        present = set()
        for _ in range(rng.randrange(1, 120)):
            pn = rng.randrange(0, 200)
            assert rs.insert(pn) == (pn not in present)
            present.add(pn)
        ranges = rs.ranges()
        covered = set()
        for lo, hi in ranges:
            assert lo <= hi
            covered.update(range(lo, hi + 1))
        assert covered == present
        for (l1, h1), (l2, h2) in zip(ranges, ranges[1:]):
            assert h1 + 1 < l2  # sorted, disjoint, non-adjacent


def test_rangeset_prune_keeps_largest():
    rs = RangeSet()
    for pn in range(10):
        rs.insert(pn)
    rs.prune_confirmed([(0, 9)])
    assert rs.ranges() == ((9, 9),)


def test_rangeset_prune_subset():
    rs = RangeSet()
    for pn in (0, 1, 2, 3, 5):
        rs.insert(pn)
    rs.prune_confirmed([(0, 3)])
    assert rs.ranges() == ((5, 5),)


def test_rangeset_prune_nothing():
    rs = RangeSet()
    for pn in (0, 1, 5):
        rs.insert(pn)
    rs.prune_confirmed([])
    assert rs.ranges() == ((0, 1), (5, 5))


def test_rangeset_pruned_numbers_never_readded():
    rs = RangeSet()
    for pn in range(10):
        rs.insert(pn)
    rs.prune_confirmed([(0, 9)])
    assert not rs.insert(4)  # below the floor now
    assert rs.ranges() == ((9, 9),)


def _rs(*ranges):
    rs = RangeSet()
    for lo, hi in ranges:
        for pn in range(lo, hi + 1):
            rs.insert(pn)
    return rs


def test_select_ranges_largest_first():
    rs = _rs((0, 3), (5, 5), (7, 7))
    assert select_ranges(rs, 1, "largest-first") == [(7, 7), (5, 5)]


def test_select_ranges_lowest_first():
    rs = _rs((0, 3), (5, 5), (7, 7))
    assert select_ranges(rs, 1, "lowest-first") == [(7, 7), (0, 3)]


def test_select_ranges_single_range_any_budget():
    rs = _rs((0, 9))
    assert select_ranges(rs, 0, "largest-first") == [(0, 9)]
    assert select_ranges(rs, 0, "lowest-first") == [(0, 9)]


def test_select_ranges_uncapped():
    rs = _rs((0, 1), (3, 3), (5, 6), (8, 8))
    got = select_ranges(rs, None, "largest-first")
    assert got == [(8, 8), (5, 6), (3, 3), (0, 1)]


def test_select_ranges_empty_error():
    with pytest.raises(ValueError):
        select_ranges(RangeSet(), 4, "largest-first")


def test_select_ranges_sort_slice_oracle():
    rng = random.Random(31)
    for _ in range(400):
        rs = RangeSet()
        for _ in range(rng.randrange(1, 90)):
            rs.insert(rng.randrange(0, 160))
        all_ranges = rs.ranges()
        ab = rng.randrange(0, 8)
        budget = ab + 1
        largest = all_ranges[-1]

        got_lf = select_ranges(rs, ab, "largest-first")
        want_lf = list(sorted(all_ranges, key=lambda r: r[1], reverse=True))[
            :budget
        ]
        assert got_lf == want_lf
        assert got_lf[0] == largest
        assert len(got_lf) <= budget

        got_lo = select_ranges(rs, ab, "lowest-first")
        assert got_lo[0] == largest
        assert len(got_lo) <= budget
        assert set(got_lo).issubset(set(all_ranges))
        if len(all_ranges) <= budget:
            want_rest = [r for r in all_ranges if r != largest]
        else:
            want_rest = [r for r in all_ranges if r != largest][: budget - 1]
        assert got_lo[1:] == want_rest


def test_on_packet_received_threshold_and_delay():
    tr = AckTracker(AckPolicy())
    d1 = tr.on_packet_received(0, 0, True, 0, 10.0)
    assert d1.action == AckAction.SCHEDULE
    assert d1.at == 10.0 + DEFAULT_MAX_ACK_DELAY_US / 1e6
    d2 = tr.on_packet_received(0, 1, True, 0, 10.001)
    assert d2.action == AckAction.SEND_NOW


def test_on_packet_received_non_eliciting_none():
    tr = AckTracker(AckPolicy())
    d = tr.on_packet_received(0, 0, False, 0, 1.0)
    assert d.action == AckAction.NONE
    # the number is still recorded for future frames
    assert tr.space(0).ranges.ranges() == ((0, 0),)


def test_schedule_only_arms_one_timer():
    tr = AckTracker(AckPolicy(packet_threshold=5))
    d1 = tr.on_packet_received(0, 0, True, 0, 1.0)
    assert d1.action == AckAction.SCHEDULE
    d2 = tr.on_packet_received(0, 1, True, 0, 1.001)
    assert d2.action == AckAction.NONE  # timer already armed


def test_reorder_triggers_immediate():
    tr = AckTracker(AckPolicy(packet_threshold=10))
    d0 = tr.on_packet_received(0, 0, True, 0, 1.0)
    assert d0.action == AckAction.SCHEDULE
    d1 = tr.on_packet_received(0, 2, True, 0, 1.001)  # gap: pn 1 missing
    assert d1.action == AckAction.SEND_NOW


def test_ignore_reorder_suppresses_immediate():
    tr = AckTracker(AckPolicy())
    tr.apply_ack_frequency(packet_threshold=10, ignore_reorder=True)
    decisions = []
    pns = [0, 2, 4, 6, 8, 10, 12, 14, 16, 18]
    for i, pn in enumerate(pns):
        d = tr.on_packet_received(0, pn, True, 0, 1.0 + i * 0.001)
        decisions.append(d.action)
    assert AckAction.SEND_NOW not in decisions[:-1]
    assert decisions[-1] == AckAction.SEND_NOW  # raised threshold reached


def test_duplicate_counted_not_fatal():
    tr = AckTracker(AckPolicy())
    tr.on_packet_received(0, 0, True, 0, 1.0)
    d = tr.on_packet_received(0, 0, True, 0, 1.1)
    assert d.action == AckAction.NONE
    assert tr.duplicates == 1


def test_pquic_mode_two_packets_bundles_all():
    tr = AckTracker(AckPolicy(pquic_mode=True))
    d1 = tr.on_packet_received(0, 0, True, 0, 1.0)
    assert d1.action == AckAction.SCHEDULE
    d2 = tr.on_packet_received(0, 1, True, 0, 1.0)
    assert d2.action == AckAction.SEND_NOW
    assert d2.bundle_all


def test_build_acks_at_limit_flag():
    pol = AckPolicy(ab_limit=4)
    tr = AckTracker(pol)
    for pn in range(0, 14, 2):  # 7 isolated ranges
        tr.on_packet_received(0, pn, True, 0, 1.0)
    built = tr.build_acks(2.0)
    assert len(built) == 1
    assert len(built[0].ranges) == 5
    assert built[0].at_limit


def test_build_acks_wire_order_descending():
    tr = AckTracker(AckPolicy(ab_limit=2, strategy="lowest-first"))
    for pn in (0, 2, 4, 6):
        tr.on_packet_received(0, pn, True, 0, 1.0)
    built = tr.build_acks(1.5)[0]
    # lowest-first selection, but the frame itself is descending by hi
    assert built.ranges == ((6, 6), (2, 2), (0, 0))


def test_build_acks_resets_pending():
    tr = AckTracker(AckPolicy())
    tr.on_packet_received(0, 0, True, 0, 1.0)
    tr.on_packet_received(0, 1, True, 0, 1.0)
    assert tr.build_acks(1.5)
    assert not tr.build_acks(1.6)  # nothing new since last frame


def test_bundle_all_includes_quiet_spaces():
    tr = AckTracker(AckPolicy(pquic_mode=True))
    tr.on_packet_received(0, 0, True, 0, 1.0)
    tr.on_packet_received(1, 0, True, 1, 1.0)
    built = tr.build_acks(1.2, bundle_all=True)
    assert [b.space_id for b in built] == [0, 1]
    # nothing new, but bundle_all still re-sends every space's state
    built_again = tr.build_acks(1.4, bundle_all=True)
    assert [b.space_id for b in built_again] == [0, 1]


def test_ack_delay_measured_from_largest():
    tr = AckTracker(AckPolicy())
    tr.on_packet_received(0, 0, True, 0, 1.0)
    tr.on_packet_received(0, 1, True, 0, 1.25)
    built = tr.build_acks(1.5)
    assert built[0].ack_delay_us == 250_000


def test_ack_delay_nonnegative():
    tr = AckTracker(AckPolicy())
    tr.on_packet_received(0, 0, True, 0, 1.0)
    built = tr.build_acks(1.0)
    assert built[0].ack_delay_us == 0


def test_to_frame_space_mapping():
    tr = AckTracker(AckPolicy())
    tr.on_packet_received(1, 0, True, 1, 1.0)
    built = tr.build_acks(1.1)[0]
    single = tr.to_frame(built, single_space=True)
    multi = tr.to_frame(built, single_space=False)
    assert isinstance(single, AckFrame)
    assert isinstance(multi, AckMpFrame)
    assert multi.path_id == 1
    assert single.largest == multi.largest == 0
