"""Scenario family and design-point tests."""

import numpy as np
import pytest

from mpquicsim.scenarios import (
    BALANCE_RANGE,
    DEFAULT_TRANSFER_BYTES,
    DESK_TRANSFER_BYTES,
    FAMILY_DIMS,
    HOMO2_BANDWIDTH_MBPS,
    HOMO2_RTT_MS,
    PathConfig,
    design_scenarios,
    hetero2_paths,
    hetero3_paths,
    homo2_paths,
    scenario_from_unit,
)
from mpquicsim.wsp import min_pairwise_distance, wsp_design


def test_transfer_sizes():
    assert DEFAULT_TRANSFER_BYTES == 50 * 1024 * 1024
    assert DESK_TRANSFER_BYTES == 5 * 1024 * 1024


def test_path_config_units():
    p = PathConfig(bandwidth_mbps=90.0, rtt_ms=20.0)
    assert p.bandwidth_bps == 90e6
    assert p.rtt_s == pytest.approx(0.02)


def test_homo2_identical_paths():
    a, b = homo2_paths(25.0, 40.0)
    assert a == b == PathConfig(25.0, 40.0)
    with pytest.raises(ValueError):
        homo2_paths(0.0, 40.0)


def test_hetero2_balance_split():
    a, b = hetero2_paths(0.9, 0.1)
    assert a.bandwidth_mbps == pytest.approx(90.0)
    assert a.rtt_ms == pytest.approx(20.0)
    assert b.bandwidth_mbps == pytest.approx(10.0)
    assert b.rtt_ms == pytest.approx(180.0)


def test_hetero2_totals_conserved():
    for bal_bw, bal_rtt in ((0.1, 0.9), (0.5, 0.5), (0.37, 0.62)):
        a, b = hetero2_paths(bal_bw, bal_rtt)
        assert a.bandwidth_mbps + b.bandwidth_mbps == pytest.approx(100.0)
        assert a.rtt_ms + b.rtt_ms == pytest.approx(200.0)


def test_hetero2_balance_bounds():
    with pytest.raises(ValueError):
        hetero2_paths(0.05, 0.5)
    with pytest.raises(ValueError):
        hetero2_paths(0.5, 0.95)


def test_hetero3_weights_normalized():
    paths = hetero3_paths([0.9, 0.1, 0.5], [0.2, 0.3, 0.4])
    assert sum(p.bandwidth_mbps for p in paths) == pytest.approx(100.0)
    assert sum(p.rtt_ms for p in paths) == pytest.approx(300.0)
    # proportions follow the weights
    assert paths[0].bandwidth_mbps == pytest.approx(0.9 / 1.5 * 100.0)
    assert paths[2].rtt_ms == pytest.approx(0.4 / 0.9 * 300.0)


def test_hetero3_validation():
    with pytest.raises(ValueError):
        hetero3_paths([0.9, 0.1], [0.2, 0.3, 0.4])
    with pytest.raises(ValueError):
        hetero3_paths([0.9, 0.1, 0.05], [0.2, 0.3, 0.4])


def test_scenario_from_unit_corners():
    lo = scenario_from_unit("homo2", 0, [0.0, 0.0])
    hi = scenario_from_unit("homo2", 1, [1.0, 1.0])
    assert lo.paths[0].bandwidth_mbps == HOMO2_BANDWIDTH_MBPS[0]
    assert lo.paths[0].rtt_ms == HOMO2_RTT_MS[0]
    assert hi.paths[0].bandwidth_mbps == HOMO2_BANDWIDTH_MBPS[1]
    assert hi.paths[0].rtt_ms == HOMO2_RTT_MS[1]
    het = scenario_from_unit("hetero2", 2, [0.0, 1.0])
    assert het.paths[0].bandwidth_mbps == pytest.approx(10.0)
    assert het.paths[0].rtt_ms == pytest.approx(180.0)
    with pytest.raises(ValueError):
        scenario_from_unit("mesh4", 0, [0.5])


def test_scenario_aggregate_bandwidth():
    sc = scenario_from_unit("hetero2", 0, [0.5, 0.5])
    assert sc.aggregate_bandwidth_bps == pytest.approx(100e6)


def test_design_scenarios_bounds_and_determinism():
    for family, dim in FAMILY_DIMS.items():
        pts_a, scs_a = design_scenarios(family, 20, seed=3)
        pts_b, scs_b = design_scenarios(family, 20, seed=3)
        assert np.array_equal(pts_a, pts_b)
        assert scs_a == scs_b
        assert pts_a.shape == (20, dim)
        assert len(scs_a) == 20
        for sc in scs_a:
            for p in sc.paths:
                assert p.bandwidth_mbps > 0
                assert p.rtt_ms > 0
    diff = design_scenarios("hetero2", 20, seed=4)[0]
    assert not np.array_equal(pts_a, diff)


def test_hetero2_design_within_balance_box():
    _, scs = design_scenarios("hetero2", 30, seed=3)
    lo = BALANCE_RANGE[0] * 100.0
    hi = BALANCE_RANGE[1] * 100.0
    for sc in scs:
        assert lo <= sc.paths[0].bandwidth_mbps <= hi


# --- design sampler ---


def test_wsp_deterministic_and_bounded():
    a = wsp_design(95, 2, seed=7)
    b = wsp_design(95, 2, seed=7)
    assert np.array_equal(a, b)
    assert a.shape == (95, 2)
    assert np.all((a >= 0.0) & (a < 1.0))


def test_wsp_single_point():
    a = wsp_design(1, 3, seed=1)
    assert a.shape == (1, 3)


def test_wsp_full_pool_passthrough():
    a = wsp_design(16, 2, seed=5, n_candidates=16)
    assert a.shape == (16, 2)


def test_wsp_rejects_oversized_request():
    with pytest.raises(ValueError):
        wsp_design(100, 2, seed=1, n_candidates=50)
    with pytest.raises(ValueError):
        wsp_design(0, 2, seed=1)


def test_wsp_spreads_better_than_uniform():
    # pruning should beat the raw first-n uniform prefix on maximin distance
    from mpquicsim.wsp import generate_candidates

    pruned = wsp_design(40, 2, seed=11)
    uniform = generate_candidates(4096, 2, seed=11)[:40]
    assert min_pairwise_distance(pruned) > min_pairwise_distance(uniform)
