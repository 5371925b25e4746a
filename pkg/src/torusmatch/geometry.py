"""Periodic geometry on a discretized d-dimensional torus.

All coordinates live in the half-open box [0, L)^d with opposite faces
identified.  The grid splits each axis into G equal steps, giving M = G**d
sites; a site is represented by its flat index and its center coordinates.
Every other module builds on the distance and indexing primitives here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError

__all__ = [
    "TorusSpec",
    "site_tuple_to_index",
    "site_index_to_tuple",
    "site_coordinates",
    "site_of_point",
    "site_centers",
    "torus_delta",
    "torus_distance",
    "pairwise_torus_distance",
    "set_diameter",
]


@dataclass(frozen=True)
class TorusSpec:
    """Torus geometry: dimension ``d``, side length ``L``, ``G`` grid steps
    per axis.

    Derived quantities: ``M = G**d`` total sites (exact integer), ``step``
    the site side length L/G, and ``site_volume = step**d``.
    """

    d: int
    L: float
    G: int

    def __post_init__(self):
        if self.d < 2:
            raise DomainError(f"dimension must be >= 2, got {self.d}")
        if self.G < 2:
            raise DomainError(f"grid subdivisions must be >= 2, got {self.G}")
        if not (self.L > 0):
            raise DomainError(f"side length must be positive, got {self.L}")

    @property
    def M(self) -> int:
        return self.G**self.d

    @property
    def step(self) -> float:
        return self.L / self.G

    @property
    def site_volume(self) -> float:
        return self.step**self.d

    @property
    def max_distance(self) -> float:
        """Upper bound (L/2)*sqrt(d) on any torus distance."""
        return 0.5 * self.L * float(np.sqrt(self.d))


def site_tuple_to_index(tup, spec: TorusSpec):
    """Flatten per-axis indices (row-major) to flat site indices."""
    tup = np.asarray(tup, dtype=np.int64)
    if np.any(tup < 0) or np.any(tup >= spec.G):
        raise DomainError("per-axis index outside [0, G)")
    return np.ravel_multi_index(tuple(np.moveaxis(tup, -1, 0)), (spec.G,) * spec.d)


def site_index_to_tuple(idx, spec: TorusSpec):
    """Inverse of :func:`site_tuple_to_index`; returns shape (..., d)."""
    idx = np.asarray(idx, dtype=np.int64)
    if np.any(idx < 0) or np.any(idx >= spec.M):
        raise DomainError(f"site index outside [0, {spec.M})")
    return np.stack(np.unravel_index(idx, (spec.G,) * spec.d), axis=-1)


def site_coordinates(idx, spec: TorusSpec):
    """Center coordinates (i + 0.5) * L/G of the given site(s)."""
    tup = site_index_to_tuple(idx, spec)
    return (tup + 0.5) * spec.step


def site_of_point(points, spec: TorusSpec):
    """Flat index of the grid site containing each point."""
    points = _check_coords(points, spec)
    tup = np.minimum((points * (spec.G / spec.L)).astype(np.int64), spec.G - 1)
    return np.ravel_multi_index(tuple(np.moveaxis(tup, -1, 0)), (spec.G,) * spec.d)


@lru_cache(maxsize=8)
def site_centers(spec: TorusSpec) -> np.ndarray:
    """All M site centers, shape (M, d), cached per spec. Read-only."""
    centers = site_coordinates(np.arange(spec.M), spec)
    centers.setflags(write=False)
    return centers


def _check_coords(points, spec: TorusSpec) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.shape[-1] != spec.d:
        raise DomainError(f"expected last axis {spec.d}, got {points.shape[-1]}")
    if np.any(points < 0) or np.any(points >= spec.L):
        raise DomainError("coordinates outside [0, L)")
    return points


def torus_delta(a, b, spec: TorusSpec) -> np.ndarray:
    """Componentwise minimal periodic displacement a - b (no validation).

    Both inputs are assumed to lie in [0, L), so the raw difference sits in
    (-L, L) and a single conditional fold per side suffices; exact half-gap
    components keep the sign of the raw difference at magnitude L/2.
    """
    delta = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    half = 0.5 * spec.L
    np.subtract(delta, spec.L, out=delta, where=delta > half)
    np.add(delta, spec.L, out=delta, where=delta < -half)
    return delta


def torus_distance(a, b, spec: TorusSpec):
    """Euclidean length of the minimal periodic displacement between points.

    Both inputs must lie in [0, L)^d; broadcasting over leading axes is
    supported.  The result never exceeds (L/2)*sqrt(d).
    """
    a = _check_coords(a, spec)
    b = _check_coords(b, spec)
    delta = torus_delta(a, b, spec)
    return np.sqrt(np.sum(delta * delta, axis=-1))


def pairwise_torus_distance(a, b, spec: TorusSpec, validate: bool = True) -> np.ndarray:
    """Distance matrix of shape (len(a), len(b)) under the torus metric."""
    a = _check_coords(a, spec) if validate else np.asarray(a, dtype=np.float64)
    b = _check_coords(b, spec) if validate else np.asarray(b, dtype=np.float64)
    delta = torus_delta(a[:, None, :], b[None, :, :], spec)
    return np.sqrt(np.sum(delta * delta, axis=-1))


_DIAMETER_CHUNK = 2048


def set_diameter(sites, spec: TorusSpec) -> float:
    """Maximum pairwise torus distance between the centers of ``sites``.

    Exact (all pairs are examined, in chunks); 0 for a singleton.
    """
    sites = np.asarray(list(sites) if isinstance(sites, (set, frozenset)) else sites,
                       dtype=np.int64)
    if sites.ndim != 1:
        raise DomainError("sites must be a 1-d collection of flat indices")
    if sites.size == 0:
        raise DomainError("diameter of an empty site set is undefined")
    if sites.size == 1:
        return 0.0
    centers = site_centers(spec)[sites]
    best = 0.0
    for start in range(0, sites.size, _DIAMETER_CHUNK):
        block = centers[start:start + _DIAMETER_CHUNK]
        d = pairwise_torus_distance(block, centers[start:], spec, validate=False)
        m = float(d.max())
        if m > best:
            best = m
    return best
