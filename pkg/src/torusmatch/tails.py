"""Ensemble survival curves, stretched-exponential fits, and tail checks.

Survival S(r) is the fraction of pooled samples strictly exceeding r,
with a binomial standard error per radius gridpoint.  The stretched
exponential S(r) = exp(-c r^gamma) linearizes to
log(-log S) = log c + gamma log r, fitted by ordinary least squares over
the gridpoints with S in [0.01, 0.9]; the fit refuses windows of fewer
than 5 points (below 0.01 the empirical tail is noise at desk-scale
counts, above 0.9 the asymptotic regime has not set in).

The mass-transport identity and the two-sided bound check are exact
counting statements about one realization and one pooled ensemble
respectively; both are recorded with margins rather than assumed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .allocation import CellStats
from .errors import DomainError
from .matching import PerfectMatching
from .points import ConfigPair

__all__ = [
    "TailEstimate",
    "FitResult",
    "BoundCheckRow",
    "BoundCheckReport",
    "survival_from_samples",
    "matching_distance_tail",
    "cell_diameter_tail",
    "nearest_point_tail",
    "fit_stretched_exponent",
    "mass_transport_check",
    "two_sided_bound_check",
    "FIT_WINDOW",
    "MIN_FIT_POINTS",
]

FIT_WINDOW = (0.01, 0.9)
MIN_FIT_POINTS = 5


@dataclass(frozen=True)
class FitResult:
    gamma: float
    c: float
    stderr: float
    window_lo: float
    window_hi: float
    window_points: int
    method: str = "ols log(-log S) vs log r"


@dataclass(frozen=True)
class TailEstimate:
    """Empirical survival on a radii grid, pooled over an ensemble."""

    radii: np.ndarray
    survival: np.ndarray
    count: int
    stderr: np.ndarray
    label: str = ""
    fit: FitResult | None = None

    def __post_init__(self):
        radii = np.asarray(self.radii, dtype=np.float64)
        surv = np.asarray(self.survival, dtype=np.float64)
        errs = np.asarray(self.stderr, dtype=np.float64)
        if radii.ndim != 1 or np.any(np.diff(radii) <= 0):
            raise DomainError("radii must be 1-D strictly increasing")
        if surv.shape != radii.shape or errs.shape != radii.shape:
            raise DomainError("survival and stderr must match the radii grid")
        if np.any(surv < 0) or np.any(surv > 1) or np.any(np.diff(surv) > 0):
            raise DomainError("survival must be nonincreasing within [0, 1]")
        for arr in (radii, surv, errs):
            arr.setflags(write=False)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "survival", surv)
        object.__setattr__(self, "stderr", errs)

    def with_fit(self, fit: FitResult) -> "TailEstimate":
        return replace(self, fit=fit)

    def at(self, r: float) -> tuple[float, float]:
        """(survival, stderr) at a radius that must be a gridpoint."""
        i = int(np.searchsorted(self.radii, r))
        if i >= self.radii.size or self.radii[i] != r:
            raise DomainError(f"radius {r!r} is not on the tail grid")
        return float(self.survival[i]), float(self.stderr[i])


def survival_from_samples(samples: np.ndarray, radii: np.ndarray,
                          label: str = "") -> TailEstimate:
    """S(r) = fraction of samples strictly greater than r."""
    samples = np.sort(np.asarray(samples, dtype=np.float64))
    radii = np.asarray(radii, dtype=np.float64)
    if samples.size == 0:
        raise DomainError("cannot estimate a tail from zero samples")
    k = samples.size
    surv = 1.0 - np.searchsorted(samples, radii, side="right") / k
    stderr = np.sqrt(surv * (1.0 - surv) / k)
    return TailEstimate(radii=radii, survival=surv, count=k, stderr=stderr,
                        label=label)


def matching_distance_tail(ensemble: list[PerfectMatching],
                           radii: np.ndarray) -> TailEstimate:
    """Pooled survival of matched-pair distances across realizations."""
    if not ensemble:
        raise DomainError("ensemble is empty")
    pooled = np.concatenate([pm.distances for pm in ensemble])
    label = ensemble[0].provenance or "matching"
    return survival_from_samples(pooled, radii, label=label)


def cell_diameter_tail(ensemble: list[CellStats],
                       radii: np.ndarray) -> TailEstimate:
    """Pooled survival of allocation cell diameters."""
    if not ensemble:
        raise DomainError("ensemble is empty")
    if any(cs.approximate for cs in ensemble):
        label = "cell-diameter (approximate)"
    else:
        label = "cell-diameter"
    pooled = np.concatenate([cs.diameters for cs in ensemble])
    return survival_from_samples(pooled, radii, label=label)


def nearest_point_tail(pairs: list[ConfigPair],
                       radii: np.ndarray) -> TailEstimate:
    """Survival of the distance from each first-process point to the
    nearest second-process point."""
    if not pairs:
        raise DomainError("ensemble is empty")
    radii = np.asarray(radii, dtype=np.float64)
    L = pairs[0].spec.L
    if np.any(radii >= L / 2):
        raise DomainError(f"radii must stay below L/2 = {L / 2}")
    chunks = []
    for pair in pairs:
        tree = cKDTree(pair.second.points, boxsize=pair.spec.L)
        dist, _ = tree.query(pair.first.points, k=1)
        chunks.append(np.atleast_1d(dist))
    return survival_from_samples(np.concatenate(chunks), radii,
                                 label="nearest-point")


def fit_stretched_exponent(tail: TailEstimate) -> FitResult:
    """OLS fit of log(-log S) against log r over the standard window.

    Returns (gamma, c, stderr) packed with the window actually used;
    refuses (with diagnostics) when fewer than MIN_FIT_POINTS gridpoints
    carry S inside FIT_WINDOW.
    """
    lo, hi = FIT_WINDOW
    mask = (tail.survival >= lo) & (tail.survival <= hi) & (tail.radii > 0)
    k = int(mask.sum())
    if k < MIN_FIT_POINTS:
        smin = float(tail.survival.min()) if tail.survival.size else float("nan")
        smax = float(tail.survival.max()) if tail.survival.size else float("nan")
        raise DomainError(
            f"fit window too small: {k} gridpoints with S in [{lo}, {hi}] "
            f"(need >= {MIN_FIT_POINTS}); survival spans [{smin:.4g}, {smax:.4g}] "
            f"over radii [{tail.radii[0]:.4g}, {tail.radii[-1]:.4g}]; "
            "widen or refine the radii grid")
    x = np.log(tail.radii[mask])
    y = np.log(-np.log(tail.survival[mask]))
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    slope = float(((x - xm) * (y - ym)).sum() / sxx)
    intercept = ym - slope * xm
    resid = y - (intercept + slope * x)
    dof = max(k - 2, 1)
    stderr = float(np.sqrt((resid**2).sum() / dof / sxx))
    return FitResult(gamma=slope, c=float(np.exp(intercept)), stderr=stderr,
                     window_lo=float(tail.radii[mask][0]),
                     window_hi=float(tail.radii[mask][-1]),
                     window_points=k)


def mass_transport_check(matching: PerfectMatching, diam2: CellStats,
                         r: float) -> tuple[int, int]:
    """Count mass sent and received for the rule: y sends 1 to x = m^-1(y)
    when the second-process cell of y has diameter > r.

    sent counts senders over y; received counts recipients over x through
    the matching; the two are computed along independent routes and agree
    exactly because m is a bijection.
    """
    if matching.n != diam2.diameters.size:
        raise DomainError("matching and cell stats disagree on n")
    sent = int(np.sum(diam2.diameters > r))
    received = int(np.sum(diam2.diameters[matching.partner] > r))
    return sent, received


@dataclass(frozen=True)
class BoundCheckRow:
    r: float
    lhs: float
    rhs: float
    margin: float
    passed: bool


@dataclass(frozen=True)
class BoundCheckReport:
    rows: tuple[BoundCheckRow, ...]
    all_passed: bool


def two_sided_bound_check(match_tail: TailEstimate, diam1_tail: TailEstimate,
                          diam2_tail: TailEstimate,
                          radii: np.ndarray | None = None) -> BoundCheckReport:
    """Check S_match(2r) <= S_diam1(r) + S_diam2(r) + 3 * combined stderr.

    Evaluated at gridpoints u of the match tail (u = 2r, so the diameter
    tails are read at u/2, which must be on their grids).  When radii is
    omitted, u ranges over the match tail's standard fit window.
    """
    if radii is None:
        lo, hi = FIT_WINDOW
        mask = ((match_tail.survival >= lo) & (match_tail.survival <= hi)
                & (match_tail.radii > 0))
        radii = match_tail.radii[mask]
    rows = []
    all_passed = True
    for u in np.asarray(radii, dtype=np.float64):
        s_match, se_m = match_tail.at(float(u))
        s1, se1 = diam1_tail.at(float(u) / 2.0)
        s2, se2 = diam2_tail.at(float(u) / 2.0)
        rhs = s1 + s2 + 3.0 * float(np.sqrt(se_m**2 + se1**2 + se2**2))
        margin = rhs - s_match
        passed = s_match <= rhs
        all_passed &= passed
        rows.append(BoundCheckRow(r=float(u) / 2.0, lhs=s_match, rhs=rhs,
                                  margin=margin, passed=passed))
    return BoundCheckReport(rows=tuple(rows), all_passed=bool(all_passed))
