"""Finite hyperfiniteness witness for the cell-intersection graph.

Pipeline: build the proximity graph on the merged point sets (edge iff
torus distance <= 2N), prune vertices of degree >= D, properly color the
survivors greedily, take the largest color class X (pairwise > 2N apart by
properness), partition all grid sites by nearest X-point (Voronoi with
index tie-break), and remove U1 (vertices with an intersection-graph edge
longer than r) and U2 (remaining vertices whose allocation cell touches a
partition boundary).  The verification report then checks that every
surviving component of the intersection graph sits inside one partition
class, and records the removed-vertex density against the target epsilon
and the boundary-site fraction against the bound 2^d r / N.

Parameter derivation mirrors the order of choices the construction needs:
r as a pilot quantile of edge spans, then the smallest grid-multiple N
with 2^d r / N < epsilon/2, then the smallest degree cutoff D that keeps
at least half the points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .allocation import AllocationField
from .errors import ConfigurationError, WitnessFailureError
from .geometry import TorusSpec, pairwise_torus_distance, site_centers
from .matching import IntersectionGraph

__all__ = [
    "WitnessParams",
    "ProximityGraph",
    "PartitionWitness",
    "WitnessReport",
    "build_proximity_graph",
    "prune_high_degree",
    "greedy_proper_coloring",
    "select_separated_set",
    "voronoi_partition",
    "compute_removal_sets",
    "verify_witness",
    "derive_scale_params",
    "derive_degree_cutoff",
    "run_witness",
]


@dataclass(frozen=True)
class WitnessParams:
    """Scales of the witness: target density epsilon, edge-reach radius r,
    separation scale N, degree cutoff D, in dimension d."""

    epsilon: float
    r: float
    N: float
    D: int
    d: int

    def __post_init__(self):
        if not (0 < self.epsilon < 1):
            raise ConfigurationError(f"epsilon must lie in (0,1), got {self.epsilon}")
        if not (self.r > 0 and self.N > 0):
            raise ConfigurationError("r and N must be positive")
        if self.D < 1:
            raise ConfigurationError(f"D must be >= 1, got {self.D}")
        if not (2**self.d * self.r / self.N < self.epsilon / 2):
            raise ConfigurationError(
                f"scale inequality violated: 2^d*r/N = "
                f"{2**self.d * self.r / self.N:.6g} is not < epsilon/2 = "
                f"{self.epsilon / 2:.6g}")


@dataclass(frozen=True)
class ProximityGraph:
    """Undirected graph on merged points: edge iff torus distance <= 2N."""

    points: np.ndarray
    N: float
    spec: TorusSpec
    edges: np.ndarray

    @property
    def m(self) -> int:
        return self.points.shape[0]

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.m, dtype=np.int64)
        if self.edges.size:
            np.add.at(deg, self.edges[:, 0], 1)
            np.add.at(deg, self.edges[:, 1], 1)
        return deg

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.m)]
        for i, j in self.edges:
            adj[int(i)].append(int(j))
            adj[int(j)].append(int(i))
        return adj


def build_proximity_graph(points: np.ndarray, N: float,
                          spec: TorusSpec) -> ProximityGraph:
    if N <= 0:
        raise ConfigurationError(f"N must be positive, got {N}")
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[0] >= 2:
        pairs = cKDTree(pts, boxsize=spec.L).query_pairs(
            2.0 * N, output_type="ndarray")
        pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
    else:
        pairs = np.empty((0, 2), dtype=np.int64)
    return ProximityGraph(points=pts, N=float(N), spec=spec,
                          edges=pairs.astype(np.int64))


def prune_high_degree(graph: ProximityGraph, D: int) -> np.ndarray:
    """Vertices of degree < D in the original graph."""
    if D < 1:
        raise ConfigurationError(f"D must be >= 1, got {D}")
    survivors = np.flatnonzero(graph.degrees() < D)
    if survivors.size == 0:
        raise WitnessFailureError(
            f"degree cutoff D={D} deleted every vertex")
    return survivors


def greedy_proper_coloring(graph: ProximityGraph,
                           survivors: np.ndarray) -> np.ndarray:
    """Sequential greedy coloring of the induced subgraph, in vertex-index
    order; returns colors (length m, -1 for pruned vertices).  Uses at
    most (induced max degree + 1) colors."""
    alive = np.zeros(graph.m, dtype=bool)
    alive[survivors] = True
    adj = graph.adjacency()
    colors = np.full(graph.m, -1, dtype=np.int64)
    for v in np.sort(survivors):
        v = int(v)
        taken = {colors[u] for u in adj[v] if alive[u] and colors[u] >= 0}
        c = 0
        while c in taken:
            c += 1
        colors[v] = c
    return colors


def select_separated_set(colors: np.ndarray, points: np.ndarray,
                         N: float) -> np.ndarray:
    """Largest color class (smallest color id on ties); pairwise > 2N apart
    because same-colored vertices are non-adjacent in the 2N graph."""
    colored = colors[colors >= 0]
    if colored.size == 0:
        raise WitnessFailureError("coloring left no vertices to select from")
    counts = np.bincount(colored)
    best = int(np.argmax(counts))
    return np.flatnonzero(colors == best)


def voronoi_partition(x_points: np.ndarray, spec: TorusSpec,
                      *, chunk: int = 65536) -> np.ndarray:
    """Assign every site to the nearest x point (torus metric); exact ties
    go to the smallest x index."""
    x_points = np.asarray(x_points, dtype=np.float64)
    if x_points.ndim != 2 or x_points.shape[0] == 0:
        raise WitnessFailureError("voronoi partition needs a nonempty X")
    centers = site_centers(spec)
    out = np.empty(spec.M, dtype=np.int64)
    for lo in range(0, spec.M, chunk):
        hi = min(lo + chunk, spec.M)
        d = pairwise_torus_distance(centers[lo:hi], x_points, spec,
                                    validate=False)
        out[lo:hi] = np.argmin(d, axis=1)
    return out


def _boundary_sites(partition_id: np.ndarray, spec: TorusSpec) -> np.ndarray:
    """Boolean mask: site has a face-adjacent grid neighbor (periodic) in a
    different partition class."""
    arr = partition_id.reshape((spec.G,) * spec.d)
    mask = np.zeros_like(arr, dtype=bool)
    for axis in range(spec.d):
        mask |= arr != np.roll(arr, 1, axis=axis)
        mask |= arr != np.roll(arr, -1, axis=axis)
    return mask.reshape(spec.M)


def compute_removal_sets(graph: IntersectionGraph, field1: AllocationField,
                         field2: AllocationField, partition_id: np.ndarray,
                         params: WitnessParams) -> tuple[np.ndarray, np.ndarray]:
    """U1: vertices with an incident intersection edge of span > r.
    U2: other vertices whose allocation cell contains a boundary site.
    Both returned as boolean masks over the 2n merged vertices (left
    process first)."""
    n = graph.n
    spans = graph.edge_lengths()
    max_span = np.zeros(2 * n)
    np.maximum.at(max_span, graph.left, spans)
    np.maximum.at(max_span, graph.right + n, spans)
    u1 = max_span > params.r

    boundary = _boundary_sites(partition_id, graph.spec)
    touches = np.concatenate([
        boundary[field1.cells()].any(axis=1),
        boundary[field2.cells()].any(axis=1),
    ])
    u2 = touches & ~u1
    return u1, u2


@dataclass(frozen=True)
class PartitionWitness:
    params: WitnessParams
    x_indices: np.ndarray
    x_points: np.ndarray
    partition_id: np.ndarray
    u1: np.ndarray
    u2: np.ndarray


@dataclass(frozen=True)
class WitnessReport:
    """Verification outcome; violations are recorded, never raised."""

    epsilon: float
    density: float
    density_ok: bool
    component_count: int
    components_single_class: bool
    boundary_fraction: float
    boundary_bound: float
    boundary_ok: bool
    x_separated: bool
    ball_containment_ok: bool
    violations: tuple[str, ...]


def verify_witness(graph: IntersectionGraph, u1: np.ndarray, u2: np.ndarray,
                   partition_id: np.ndarray, *, field1: AllocationField,
                   field2: AllocationField, params: WitnessParams,
                   x_points: np.ndarray) -> WitnessReport:
    """Check the witness conclusions on one realization.

    (a) every component of the intersection graph minus U1 u U2 has all
    its members' cells inside a single partition class, (b) the removed
    density |U1 u U2| / (2n) against epsilon, (c) the fraction of sites
    within r of a partition boundary against the bound 2^d r / N, plus the
    exact 2N-separation of X and N-ball containment of the Voronoi classes.
    """
    spec = graph.spec
    n = graph.n
    removed = u1 | u2
    density = float(removed.sum()) / (2 * n)

    # surviving components and their cells' partition classes
    survivors = ~removed
    adj: dict[int, list[int]] = {}
    for e in range(graph.left.size):
        l, r = int(graph.left[e]), int(graph.right[e]) + n
        if survivors[l] and survivors[r]:
            adj.setdefault(l, []).append(r)
            adj.setdefault(r, []).append(l)
    cells1, cells2 = field1.cells(), field2.cells()

    def cell_classes(v: int) -> np.ndarray:
        sites = cells1[v] if v < n else cells2[v - n]
        return partition_id[sites]

    seen = np.zeros(2 * n, dtype=bool)
    seen[removed] = True
    component_count = 0
    components_single_class = True
    for v0 in range(2 * n):
        if seen[v0]:
            continue
        component_count += 1
        stack = [v0]
        seen[v0] = True
        classes: set[int] = set()
        while stack:
            v = stack.pop()
            classes.update(np.unique(cell_classes(v)).tolist())
            for u in adj.get(v, []):
                if not seen[u]:
                    seen[u] = True
                    stack.append(u)
        if len(classes) > 1:
            components_single_class = False

    # boundary neighborhood fraction vs the scale bound
    boundary = _boundary_sites(partition_id, spec)
    bcount = int(boundary.sum())
    if bcount == 0:
        boundary_fraction = 0.0
    else:
        centers = site_centers(spec)
        tree = cKDTree(centers[boundary], boxsize=spec.L)
        dist, _ = tree.query(centers, k=1)
        boundary_fraction = float((dist <= params.r).mean())
    boundary_bound = 2**params.d * params.r / params.N

    # exact separation and ball containment for X
    x_points = np.asarray(x_points, dtype=np.float64)
    x_separated = True
    if x_points.shape[0] >= 2:
        dx = pairwise_torus_distance(x_points, x_points, spec, validate=False)
        np.fill_diagonal(dx, np.inf)
        x_separated = bool(dx.min() > 2 * params.N)
    centers = site_centers(spec)
    ball_ok = True
    for i in range(x_points.shape[0]):
        d = pairwise_torus_distance(centers, x_points[i:i + 1], spec,
                                    validate=False)[:, 0]
        if np.any(partition_id[d <= params.N] != i):
            ball_ok = False
            break

    violations = []
    density_ok = density < params.epsilon
    if not density_ok:
        violations.append(
            f"removed density {density:.4f} not below epsilon {params.epsilon}")
    if not components_single_class:
        violations.append("a surviving component straddles partition classes")
    boundary_ok = boundary_fraction <= boundary_bound
    if not boundary_ok:
        violations.append(
            f"boundary fraction {boundary_fraction:.4f} exceeds bound "
            f"{boundary_bound:.4f}")
    if not x_separated:
        violations.append("X is not 2N-separated")
    if not ball_ok:
        violations.append("a Voronoi class does not contain its center's N-ball")

    return WitnessReport(
        epsilon=params.epsilon, density=density, density_ok=density_ok,
        component_count=component_count,
        components_single_class=components_single_class,
        boundary_fraction=boundary_fraction, boundary_bound=boundary_bound,
        boundary_ok=boundary_ok, x_separated=x_separated,
        ball_containment_ok=ball_ok, violations=tuple(violations))


def derive_scale_params(spans: np.ndarray, epsilon: float,
                        spec: TorusSpec) -> tuple[float, float]:
    """Pilot calibration: r = empirical (1 - epsilon/2) quantile of max
    incident edge spans; N = smallest positive grid-step multiple with
    2^d r / N < epsilon / 2."""
    spans = np.asarray(spans, dtype=np.float64)
    if spans.size == 0 or not (0 < epsilon < 1):
        raise ConfigurationError("need nonempty spans and epsilon in (0,1)")
    r = float(np.quantile(spans, 1 - epsilon / 2, method="higher"))
    if r <= 0:
        r = float(spec.step)
    k = int(np.floor(2**spec.d * r / (epsilon / 2 * spec.step))) + 1
    return r, k * spec.step


def derive_degree_cutoff(degrees: np.ndarray) -> int:
    """Smallest D whose pruning keeps at least half the vertices."""
    degrees = np.sort(np.asarray(degrees, dtype=np.int64))
    if degrees.size == 0:
        raise ConfigurationError("degree histogram is empty")
    h = (degrees.size + 1) // 2
    return max(1, int(degrees[h - 1]) + 1)


def run_witness(graph: IntersectionGraph, field1: AllocationField,
                field2: AllocationField, epsilon: float, *,
                r: float | None = None, N: float | None = None,
                D: int | None = None,
                pilot_spans: np.ndarray | None = None
                ) -> tuple[PartitionWitness, WitnessReport]:
    """End-to-end witness for one realization, deriving any scale
    parameter not given explicitly."""
    spec = graph.spec
    n = graph.n
    if r is None or N is None:
        if pilot_spans is None:
            spans = graph.edge_lengths()
            own = np.zeros(2 * n)
            np.maximum.at(own, graph.left, spans)
            np.maximum.at(own, graph.right + n, spans)
            pilot_spans = own
        dr, dN = derive_scale_params(pilot_spans, epsilon, spec)
        r = dr if r is None else r
        N = dN if N is None else N
    merged = np.concatenate([field1.config.points, field2.config.points])
    prox = build_proximity_graph(merged, N, spec)
    if D is None:
        D = derive_degree_cutoff(prox.degrees())
    params = WitnessParams(epsilon=epsilon, r=float(r), N=float(N), D=int(D),
                           d=spec.d)
    survivors = prune_high_degree(prox, params.D)
    colors = greedy_proper_coloring(prox, survivors)
    x_idx = select_separated_set(colors, merged, params.N)
    x_points = merged[x_idx]
    partition_id = voronoi_partition(x_points, spec)
    u1, u2 = compute_removal_sets(graph, field1, field2, partition_id, params)
    witness = PartitionWitness(params=params, x_indices=x_idx,
                               x_points=x_points, partition_id=partition_id,
                               u1=u1, u2=u2)
    report = verify_witness(graph, u1, u2, partition_id, field1=field1,
                            field2=field2, params=params, x_points=x_points)
    return witness, report
