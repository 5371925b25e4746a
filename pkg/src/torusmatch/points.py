"""Seeded sampling of point configurations on the torus.

Two sampling modes exist: a plain Poisson sampler (random count), and the
equal-count conditioned pair sampler the matching pipeline uses.  On a
finite torus the two processes must carry the same number of points for a
perfect matching to exist, and the equal-capacity allocation additionally
needs every point to sit in its own grid site; both conditions are imposed
here, at sampling time, and recorded in the provenance of every run.

Randomness comes from counter-based Philox streams.  The stream for one
(seed, realization, process label) triple is derived by hashing, so any
subset of realizations can be regenerated independently and in parallel
with identical results; the rule is named in configs and manifests.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import ConfigurationError, DomainError
from .geometry import TorusSpec, site_of_point

__all__ = [
    "RNG_RULE",
    "SeedProvenance",
    "PointConfig",
    "ConfigPair",
    "RootedView",
    "rng_stream",
    "sample_poisson_config",
    "sample_conditioned_pair",
    "palm_average_frame",
    "wrap_coordinates",
]

RNG_RULE = "sha256-philox128-v1"


def rng_stream(seed: int, realization: int, label: int) -> np.random.Generator:
    """Philox generator keyed by sha256(f"{seed}:{realization}:{label}").

    The first 16 digest bytes, read little-endian, form the 128-bit Philox
    key.  This is the package-wide stream derivation rule ``RNG_RULE``.
    """
    digest = hashlib.sha256(f"{seed}:{realization}:{label}".encode()).digest()
    key = int.from_bytes(digest[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class SeedProvenance:
    base_seed: int
    realization: int
    label: int
    rule: str = RNG_RULE


@dataclass(frozen=True)
class PointConfig:
    """One process's configuration: ``n`` points in [0, L)^d plus the seed
    record that produced them."""

    spec: TorusSpec
    label: int
    points: np.ndarray
    provenance: SeedProvenance | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != self.spec.d:
            raise DomainError(f"points must have shape (n, {self.spec.d})")
        if pts.shape[0] < 1:
            raise DomainError("a configuration needs at least one point")
        if np.any(pts < 0) or np.any(pts >= self.spec.L):
            raise DomainError("points outside [0, L)")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise DomainError("configuration points must be pairwise distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def occupied_sites(self) -> np.ndarray:
        return site_of_point(self.points, self.spec)


@dataclass(frozen=True)
class ConfigPair:
    """Equal-count pair of configurations sharing one torus."""

    first: PointConfig
    second: PointConfig

    def __post_init__(self):
        if self.first.spec != self.second.spec:
            raise ConfigurationError("configs of a pair must share the torus spec")
        if self.first.n != self.second.n:
            raise ConfigurationError(
                f"point counts differ: {self.first.n} vs {self.second.n}")
        if self.spec.M % self.n != 0:
            raise ConfigurationError(
                f"point count n={self.n} must divide the site count M={self.spec.M}")

    @property
    def spec(self) -> TorusSpec:
        return self.first.spec

    @property
    def n(self) -> int:
        return self.first.n


def wrap_coordinates(points, L: float) -> np.ndarray:
    """Reduce coordinates mod L into [0, L), guarding the float edge where
    the remainder rounds up to L exactly."""
    out = np.mod(np.asarray(points, dtype=np.float64), L)
    out[out >= L] = 0.0
    return out


def _draw_uniform(rng: np.random.Generator, count: int, spec: TorusSpec) -> np.ndarray:
    return rng.random((count, spec.d)) * spec.L


def _resample_site_collisions(points: np.ndarray, rng: np.random.Generator,
                              spec: TorusSpec) -> np.ndarray:
    """Redraw points until all occupy distinct grid sites.

    Keeps the earliest point of each colliding site (index order) and
    redraws the rest, so the result is deterministic given the stream.
    """
    points = points.copy()
    for _ in range(10_000):
        sites = site_of_point(points, spec)
        _, first_idx = np.unique(sites, return_index=True)
        keep = np.zeros(len(points), dtype=bool)
        keep[first_idx] = True
        bad = np.flatnonzero(~keep)
        if bad.size == 0:
            return points
        points[bad] = _draw_uniform(rng, bad.size, spec)
    raise ConfigurationError(
        f"could not place {len(points)} points in distinct sites of M={spec.M}")


def sample_poisson_config(spec: TorusSpec, intensity: float, seed: int, *,
                          label: int = 1, realization: int = 0) -> PointConfig:
    """Poisson sample: count ~ Poisson(intensity * L**d), locations i.i.d.
    uniform.

    A zero count is redrawn (the empty configuration is excluded), so the
    count is zero-truncated Poisson; at any mean of practical interest the
    truncation is negligible.  Exact duplicate locations are redrawn.
    """
    if not (intensity > 0):
        raise DomainError(f"intensity must be positive, got {intensity}")
    rng = rng_stream(seed, realization, label)
    mean = intensity * spec.L**spec.d
    n = 0
    while n == 0:
        n = int(rng.poisson(mean))
    points = _draw_uniform(rng, n, spec)
    while np.unique(points, axis=0).shape[0] != n:
        # astronomically unlikely; replace the full batch for determinism
        points = _draw_uniform(rng, n, spec)
    return PointConfig(spec, label, points,
                       SeedProvenance(seed, realization, label))


def sample_conditioned_pair(spec: TorusSpec, n: int, seed: int, *,
                            realization: int = 0) -> ConfigPair:
    """Two independent configurations of exactly ``n`` uniform points each.

    Conditioning applied (and required by the allocation stage):
    equal counts, n | M, and one point per grid site within each process.
    Each process draws from its own derived stream, so the two
    configurations are independent and individually reproducible.
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if spec.M % n != 0:
        raise ConfigurationError(
            f"n={n} does not divide the site count M={spec.M}")
    configs = []
    for label in (1, 2):
        rng = rng_stream(seed, realization, label)
        points = _resample_site_collisions(_draw_uniform(rng, n, spec), rng, spec)
        configs.append(PointConfig(spec, label, points,
                                   SeedProvenance(seed, realization, label)))
    return ConfigPair(configs[0], configs[1])


@dataclass(frozen=True)
class RootedView:
    """The pair recentered so one configuration point sits at the origin."""

    root_index: int
    root: np.ndarray
    first: np.ndarray
    second: np.ndarray


def palm_average_frame(pair: ConfigPair, process: int = 1) -> Iterator[RootedView]:
    """Yield each point of the designated process as root, exactly once,
    with both point sets translated so the root lands at the origin.

    Averaging a root-centered functional over these views is the torus
    estimate of the root-conditioned expectation: exchangeability of the
    conditioned sample makes every point an equally valid origin.
    """
    if process not in (1, 2):
        raise DomainError(f"process must be 1 or 2, got {process}")
    base = pair.first if process == 1 else pair.second
    L = pair.spec.L
    for i in range(base.n):
        root = base.points[i]
        yield RootedView(
            root_index=i,
            root=root.copy(),
            first=wrap_coordinates(pair.first.points - root, L),
            second=wrap_coordinates(pair.second.points - root, L),
        )
