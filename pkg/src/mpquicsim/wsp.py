"""Space-filling experiment design by iterative minimum-distance pruning.

From a fixed pool of seeded uniform candidates, scan in order keeping a
point whenever it is at least dmin from every kept point; bisect dmin so
at least n_points survive and return the first n_points survivors.  The
whole procedure is deterministic for a given seed.
"""

from __future__ import annotations

import math

import numpy as np

DEFAULT_CANDIDATES = 4096
_BISECT_STEPS = 48


def generate_candidates(n_candidates: int, dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.random((n_candidates, dim))


def prune_by_distance(candidates: np.ndarray, dmin: float) -> np.ndarray:
    """Scan-order maximin pruning; returns indices of surviving points."""
    n = len(candidates)
    alive = np.ones(n, dtype=bool)
    dmin2 = dmin * dmin
    kept = []
    for i in range(n):
        if not alive[i]:
            continue
        kept.append(i)
        if i + 1 < n:
            d2 = np.sum((candidates[i + 1 :] - candidates[i]) ** 2, axis=1)
            alive[i + 1 :] &= d2 >= dmin2
    return np.asarray(kept, dtype=int)


def min_pairwise_distance(points: np.ndarray) -> float:
    n = len(points)
    if n < 2:
        return math.inf
    best = math.inf
    for i in range(n - 1):
        d2 = np.sum((points[i + 1 :] - points[i]) ** 2, axis=1)
        best = min(best, float(d2.min()))
    return math.sqrt(best)


def wsp_design(
    n_points: int,
    dim: int,
    seed: int,
    n_candidates: int = DEFAULT_CANDIDATES,
) -> np.ndarray:
    """n_points space-filling points in the unit cube of given dimension."""
    if n_points < 1:
        raise ValueError("n_points must be at least 1")
    if n_points > n_candidates:
        raise ValueError(
            f"n_points {n_points} exceeds candidate pool {n_candidates}"
        )
    candidates = generate_candidates(n_candidates, dim, seed)
    if n_points == n_candidates:
        return candidates.copy()
    lo = 0.0
    hi = math.sqrt(dim)
    best = np.arange(n_candidates)  # dmin=0 keeps everything
    for _ in range(_BISECT_STEPS):
        mid = (lo + hi) / 2
        kept = prune_by_distance(candidates, mid)
        if len(kept) >= n_points:
            lo = mid
            best = kept
        else:
            hi = mid
    return candidates[best[:n_points]]
