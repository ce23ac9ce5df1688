"""Experiment scenario families and their parameter spaces.

Three families: homogeneous 2-path (both paths identical), heterogeneous
2-path (fixed totals split by balance factors), heterogeneous 3-path
(fixed totals split by normalized weights).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

from .wsp import wsp_design

DEFAULT_TRANSFER_BYTES = 50 * 1024 * 1024
DESK_TRANSFER_BYTES = 5 * 1024 * 1024

HOMO2_BANDWIDTH_MBPS = (2.5, 100.0)
HOMO2_RTT_MS = (5.0, 100.0)
BALANCE_RANGE = (0.1, 0.9)
HETERO2_TOTAL_BANDWIDTH_MBPS = 100.0
HETERO2_TOTAL_RTT_MS = 200.0
HETERO3_TOTAL_BANDWIDTH_MBPS = 100.0
HETERO3_TOTAL_RTT_MS = 300.0

FAMILIES = ("homo2", "hetero2", "hetero3")

# dimensionality of each family's unit design cube
FAMILY_DIMS = {"homo2": 2, "hetero2": 2, "hetero3": 6}


@dataclass(frozen=True)
class PathConfig:
    bandwidth_mbps: float
    rtt_ms: float

    @property
    def bandwidth_bps(self) -> float:
        return self.bandwidth_mbps * 1e6

    @property
    def rtt_s(self) -> float:
        return self.rtt_ms / 1e3


@dataclass(frozen=True)
class Scenario:
    family: str
    index: int
    paths: Tuple[PathConfig, ...]

    @property
    def aggregate_bandwidth_bps(self) -> float:
        return sum(p.bandwidth_bps for p in self.paths)


def homo2_paths(bandwidth_mbps: float, rtt_ms: float) -> List[PathConfig]:
    if bandwidth_mbps <= 0 or rtt_ms <= 0:
        raise ValueError("path parameters must be positive")
    p = PathConfig(bandwidth_mbps, rtt_ms)
    return [p, p]


def hetero2_paths(bal_bw: float, bal_rtt: float) -> List[PathConfig]:
    """Split the 2-path totals by balance factors in [0.1, 0.9]."""
    for bal in (bal_bw, bal_rtt):
        if not BALANCE_RANGE[0] <= bal <= BALANCE_RANGE[1]:
            raise ValueError(f"balance {bal} outside {BALANCE_RANGE}")
    return [
        PathConfig(
            bal_bw * HETERO2_TOTAL_BANDWIDTH_MBPS, bal_rtt * HETERO2_TOTAL_RTT_MS
        ),
        PathConfig(
            (1 - bal_bw) * HETERO2_TOTAL_BANDWIDTH_MBPS,
            (1 - bal_rtt) * HETERO2_TOTAL_RTT_MS,
        ),
    ]


def hetero3_paths(
    weights_bw: Sequence[float], weights_rtt: Sequence[float]
) -> List[PathConfig]:
    """Split the 3-path totals in proportion to per-path weights."""
    if len(weights_bw) != 3 or len(weights_rtt) != 3:
        raise ValueError("three weights per dimension required")
    for w in (*weights_bw, *weights_rtt):
        if not BALANCE_RANGE[0] <= w <= BALANCE_RANGE[1]:
            raise ValueError(f"weight {w} outside {BALANCE_RANGE}")
    bw_sum = sum(weights_bw)
    rtt_sum = sum(weights_rtt)
    return [
        PathConfig(
            weights_bw[i] / bw_sum * HETERO3_TOTAL_BANDWIDTH_MBPS,
            weights_rtt[i] / rtt_sum * HETERO3_TOTAL_RTT_MS,
        )
        for i in range(3)
    ]


def _lerp(u: float, lo: float, hi: float) -> float:
    return lo + u * (hi - lo)


def scenario_from_unit(family: str, index: int, u: Sequence[float]) -> Scenario:
    """Map a unit-cube design point to concrete path parameters."""
    u = [float(x) for x in u]  # design rows may be numpy scalars
    if family == "homo2":
        paths = homo2_paths(
            _lerp(u[0], *HOMO2_BANDWIDTH_MBPS), _lerp(u[1], *HOMO2_RTT_MS)
        )
    elif family == "hetero2":
        paths = hetero2_paths(
            _lerp(u[0], *BALANCE_RANGE), _lerp(u[1], *BALANCE_RANGE)
        )
    elif family == "hetero3":
        w = [_lerp(x, *BALANCE_RANGE) for x in u[:6]]
        paths = hetero3_paths(w[:3], w[3:])
    else:
        raise ValueError(f"unknown family: {family}")
    return Scenario(family, index, tuple(paths))


def design_scenarios(family: str, n_points: int, seed: int):
    """Space-filling scenario set; returns (unit points, scenarios)."""
    dim = FAMILY_DIMS.get(family)
    if dim is None:
        raise ValueError(f"unknown family: {family}")
    points = wsp_design(n_points, dim, seed)
    scenarios = [
        scenario_from_unit(family, i, row) for i, row in enumerate(points)
    ]
    return points, scenarios
