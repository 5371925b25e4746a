"""Reference matchings the construction pipeline is compared against.

All three baselines take an equal-count configuration pair and return a
PerfectMatching under the torus metric:

- stable_matching: iterated mutually-nearest pairing, realized as a greedy
  sweep over all pairs sorted by (distance, left index, right index); with
  distinct distances this is the unique two-color stable matching and the
  index tie-break makes it deterministic otherwise.
- optimal_assignment: minimum total distance via the Hungarian-type solver
  (augmenting shortest paths with potentials), capped at a configurable n.
- greedy_nearest: left points in index order, each taking its nearest
  unmatched right point.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DomainError
from .geometry import pairwise_torus_distance
from .matching import PerfectMatching
from .points import ConfigPair

__all__ = [
    "stable_matching",
    "optimal_assignment",
    "greedy_nearest",
    "BASELINES",
]

DEFAULT_ASSIGNMENT_CAP = 2048
BASELINES = ("stable", "optimal", "greedy")


def _distance_matrix(pair: ConfigPair) -> np.ndarray:
    return pairwise_torus_distance(pair.first.points, pair.second.points,
                                   pair.spec, validate=False)


def stable_matching(pair: ConfigPair) -> PerfectMatching:
    """Match and remove the globally mutually nearest pair, repeatedly.

    Equivalent implementation: scan all (left, right) pairs by increasing
    (distance, left, right) and match greedily; the first unmatched pair
    encountered in this order is always a mutually nearest pair.
    """
    n = pair.n
    d = _distance_matrix(pair)
    # stable argsort of the flat matrix: flat index l*n+r supplies the
    # (left, right) tie-break
    order = np.argsort(d.ravel(), kind="stable")
    partner = np.full(n, -1, dtype=np.int64)
    used_right = np.zeros(n, dtype=bool)
    remaining = n
    for k in order:
        l, r = divmod(int(k), n)
        if partner[l] >= 0 or used_right[r]:
            continue
        partner[l] = r
        used_right[r] = True
        remaining -= 1
        if remaining == 0:
            break
    return PerfectMatching(partner=partner,
                           distances=d[np.arange(n), partner],
                           provenance="stable-matching")


def optimal_assignment(pair: ConfigPair, *,
                       cap: int = DEFAULT_ASSIGNMENT_CAP) -> PerfectMatching:
    """Perfect matching minimizing total torus distance."""
    n = pair.n
    if n > cap:
        raise DomainError(
            f"optimal assignment refused: n={n} exceeds the cap {cap}; "
            "raise the cap explicitly to force the cubic solve")
    d = _distance_matrix(pair)
    rows, cols = linear_sum_assignment(d)
    partner = np.empty(n, dtype=np.int64)
    partner[rows] = cols
    return PerfectMatching(partner=partner,
                           distances=d[np.arange(n), partner],
                           provenance="optimal-assignment")


def greedy_nearest(pair: ConfigPair) -> PerfectMatching:
    """Left points in index order each take the nearest unmatched right
    point (ties to the smaller right index)."""
    n = pair.n
    d = _distance_matrix(pair)
    partner = np.empty(n, dtype=np.int64)
    used = np.zeros(n, dtype=bool)
    for l in range(n):
        row = np.where(used, np.inf, d[l])
        r = int(np.argmin(row))
        partner[l] = r
        used[r] = True
    return PerfectMatching(partner=partner,
                           distances=d[np.arange(n), partner],
                           provenance="greedy-nearest")
