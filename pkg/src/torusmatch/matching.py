"""Cell-intersection graph, fractional matching, and exact rounding.

The intersection graph of two equal-capacity allocations has an edge
(x, y) weighted by the number of sites owned by x in the first field and
by y in the second.  Row and column weight sums are all exactly M/n, so
dividing by M/n gives a fractional perfect matching with denominator M/n;
all arithmetic stays in integers with that shared denominator.

Rounding repeatedly cancels cycles of the fractional support: the even
cycle's edges are 2-colored alternately, one class is decremented by its
minimum weight delta and the other incremented, zeroing at least one edge
while preserving every vertex sum.  Edges reaching weight M/n are matched
pairs; both endpoints retire.  The class to decrement is chosen by a
policy ("min-length" or "first", see round_to_perfect).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError, IntegrityError, InternalInvariantError
from .geometry import TorusSpec, torus_distance
from .allocation import AllocationField

__all__ = [
    "IntersectionGraph",
    "FractionalMatching",
    "PerfectMatching",
    "ConnectivityReport",
    "build_intersection_graph",
    "as_fractional",
    "round_to_perfect",
    "support_connectivity_report",
    "POLICIES",
]

POLICIES = ("min-length", "first")


@dataclass(frozen=True)
class IntersectionGraph:
    """Bipartite weighted support, edges in canonical (left, right) order."""

    spec: TorusSpec
    n: int
    left: np.ndarray
    right: np.ndarray
    weight: np.ndarray
    left_points: np.ndarray
    right_points: np.ndarray
    scheme: str = ""

    def __post_init__(self):
        if self.spec.M % self.n != 0:
            raise DomainError(f"n={self.n} does not divide M={self.spec.M}")
        left = np.asarray(self.left, dtype=np.int64)
        right = np.asarray(self.right, dtype=np.int64)
        weight = np.asarray(self.weight, dtype=np.int64)
        if not (left.shape == right.shape == weight.shape) or left.ndim != 1:
            raise DomainError("edge arrays must be 1-D and equal length")
        if left.size == 0:
            raise DomainError("graph needs at least one edge")
        for name, arr in (("left", left), ("right", right)):
            if arr.min() < 0 or arr.max() >= self.n:
                raise DomainError(f"{name} indices outside [0, n)")
        if weight.min() < 1:
            raise DomainError("stored edges must have weight >= 1")
        key = left * self.n + right
        if np.any(np.diff(key) <= 0):
            raise DomainError("edges must be strictly sorted by (left, right)")
        for name, pts in (("left", self.left_points), ("right", self.right_points)):
            pts = np.asarray(pts, dtype=np.float64)
            if pts.shape != (self.n, self.spec.d):
                raise DomainError(f"{name}_points must have shape (n, d)")
        for arr in (left, right, weight):
            arr.setflags(write=False)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "weight", weight)

    @property
    def denominator(self) -> int:
        return self.spec.M // self.n

    def vertex_sums(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.bincount(self.left, weights=self.weight, minlength=self.n).astype(np.int64),
                np.bincount(self.right, weights=self.weight, minlength=self.n).astype(np.int64))

    def validate_sums(self) -> None:
        """Raise IntegrityError naming every vertex whose weight sum is off."""
        ls, rs = self.vertex_sums()
        bad_l = np.flatnonzero(ls != self.denominator)
        bad_r = np.flatnonzero(rs != self.denominator)
        if bad_l.size or bad_r.size:
            raise IntegrityError(
                f"vertex weight sums differ from M/n={self.denominator}: "
                f"left {bad_l.tolist()}, right {bad_r.tolist()}")

    def edge_lengths(self) -> np.ndarray:
        return torus_distance(self.left_points[self.left],
                              self.right_points[self.right], self.spec)


def build_intersection_graph(field1: AllocationField,
                             field2: AllocationField) -> IntersectionGraph:
    """Edge (x, y) iff some site is owned by x in field1 and y in field2;
    weight = the count of such sites."""
    if field1.spec != field2.spec:
        raise DomainError("allocation fields do not share a torus spec")
    n = field1.config.n
    if n != field2.config.n:
        raise DomainError("allocation fields have different point counts")
    counts = np.bincount(field1.owner * n + field2.owner, minlength=n * n)
    nz = np.flatnonzero(counts)
    scheme = field1.scheme if field1.scheme == field2.scheme else "mixed"
    graph = IntersectionGraph(
        spec=field1.spec, n=n,
        left=nz // n, right=nz % n, weight=counts[nz],
        left_points=field1.config.points, right_points=field2.config.points,
        scheme=scheme)
    graph.validate_sums()
    return graph


@dataclass(frozen=True)
class FractionalMatching:
    """Integer edge weights with the shared denominator M/n; f(e) = w/(M/n)."""

    graph: IntersectionGraph
    denominator: int

    def __post_init__(self):
        if self.denominator != self.graph.denominator:
            raise IntegrityError(
                f"denominator {self.denominator} != M/n={self.graph.denominator}")

    @property
    def n(self) -> int:
        return self.graph.n

    def fractions(self) -> list[Fraction]:
        return [Fraction(int(w), self.denominator) for w in self.graph.weight]


def as_fractional(graph: IntersectionGraph) -> FractionalMatching:
    """Normalize symbolically by M/n after validating exact vertex sums."""
    graph.validate_sums()
    return FractionalMatching(graph=graph, denominator=graph.denominator)


@dataclass(frozen=True)
class PerfectMatching:
    """Bijection left index -> right index with per-pair torus distances."""

    partner: np.ndarray
    distances: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        partner = np.asarray(self.partner, dtype=np.int64)
        distances = np.asarray(self.distances, dtype=np.float64)
        n = partner.size
        if n < 1 or partner.ndim != 1:
            raise DomainError("partner must be a nonempty 1-D array")
        if not np.array_equal(np.bincount(partner, minlength=n),
                              np.ones(n, dtype=np.int64)):
            raise DomainError("partner is not a bijection")
        if distances.shape != (n,) or np.any(distances < 0):
            raise DomainError("distances must be n nonnegative values")
        partner.setflags(write=False)
        distances.setflags(write=False)
        object.__setattr__(self, "partner", partner)
        object.__setattr__(self, "distances", distances)

    @property
    def n(self) -> int:
        return self.partner.size

    @property
    def total_cost(self) -> float:
        return float(self.distances.sum())


def _pick_cycle(adj: dict[int, dict[int, int]], start: int) -> list[int]:
    """Walk to smallest-index neighbors until a vertex repeats; return the
    cycle's vertex list.  Fractional support has min degree 2, so the walk
    cannot dead-end; if it does, the invariant is broken."""
    path = [start]
    on_path = {start: 0}
    prev = -1
    current = start
    for _ in range(len(adj) + 1):
        nxt = -1
        for u in sorted(adj[current]):
            if u != prev:
                nxt = u
                break
        if nxt < 0:
            raise InternalInvariantError(
                f"fractional vertex {current} has degree < 2")
        if nxt in on_path:
            return path[on_path[nxt]:]
        on_path[nxt] = len(path)
        path.append(nxt)
        prev, current = current, nxt
    raise InternalInvariantError("cycle walk exceeded the vertex count")


def round_to_perfect(fm: FractionalMatching,
                     policy: str = "min-length", *,
                     stats: dict | None = None) -> PerfectMatching:
    """Cancel cycles of the fractional support until the matching is integral.

    Each rotation 2-colors an even cycle alternately and shifts weights by
    +/-delta with delta = the minimum weight of the class the policy picks
    for decrementing:

    - "min-length": the class whose removal changes total (weight x torus
      edge length) the least, i.e. the signed change delta*(sum of other
      class lengths - sum of chosen class lengths) is minimized; ties go
      to the class whose sorted edge list is lexicographically smaller.
    - "first": the class containing the lexicographically smallest
      (left, right) edge of the cycle.

    All weight arithmetic is exact integer with denominator M/n.  When a
    dict is passed as ``stats`` it receives the rotation count and the
    initial support edge count.
    """
    if policy not in POLICIES:
        raise DomainError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    graph = fm.graph
    den = fm.denominator
    n = graph.n
    lengths = {}
    matched: dict[int, int] = {}
    adj: dict[int, dict[int, int]] = {}
    edge_len = graph.edge_lengths()
    for e in range(graph.left.size):
        l, r = int(graph.left[e]), int(graph.right[e]) + n
        w = int(graph.weight[e])
        lengths[(l, r)] = float(edge_len[e])
        if w == den:
            matched[l] = r - n
        else:
            adj.setdefault(l, {})[r] = w
            adj.setdefault(r, {})[l] = w
    max_rotations = graph.left.size
    rotations = 0

    def edge_key(u: int, v: int) -> tuple[int, int]:
        return (u, v) if u < n else (v, u)

    while adj:
        cycle = _pick_cycle(adj, min(adj))
        m = len(cycle)
        edges = [(cycle[i], cycle[(i + 1) % m]) for i in range(m)]
        cls = [[edge_key(*e) for e in edges[0::2]],
               [edge_key(*e) for e in edges[1::2]]]
        deltas = [min(adj[a][b] for a, b in c) for c in cls]
        if policy == "first":
            smallest = min(min(c) for c in cls)
            dec = 0 if smallest in cls[0] else 1
        else:
            sums = [sum(lengths[e] for e in c) for c in cls]
            change = [deltas[0] * (sums[1] - sums[0]),
                      deltas[1] * (sums[0] - sums[1])]
            if change[0] != change[1]:
                dec = 0 if change[0] < change[1] else 1
            else:
                dec = 0 if sorted(cls[0]) <= sorted(cls[1]) else 1
        delta = deltas[dec]
        assert delta >= 1
        touched = set()
        for j, c in enumerate(cls):
            shift = -delta if j == dec else delta
            for a, b in c:
                w = adj[a][b] + shift
                adj[a][b] = adj[b][a] = w
                touched.add((a, b))
        if __debug__:
            for a, b in touched:
                assert 0 <= adj[a][b] <= den
        for a, b in sorted(touched):
            w = adj.get(a, {}).get(b)
            if w is None:
                continue
            if w == 0:
                del adj[a][b]
                del adj[b][a]
            elif w == den:
                matched[a] = b - n
                for u, v in ((a, b), (b, a)):
                    others = [x for x in adj[u] if x != v]
                    if any(adj[u][x] != 0 for x in others):
                        raise InternalInvariantError(
                            "saturated edge with nonzero siblings")
                    for x in others:
                        del adj[u][x]
                        del adj[x][u]
                del adj[a][b]
                del adj[b][a]
        for v in [v for v in adj if not adj[v]]:
            del adj[v]
        rotations += 1
        if rotations > max_rotations:
            raise InternalInvariantError(
                f"rotation count exceeded the initial edge count {max_rotations}")

    if stats is not None:
        stats["rotations"] = rotations
        stats["initial_edges"] = max_rotations
    if len(matched) != n:
        raise InternalInvariantError(
            f"rounding matched {len(matched)} of {n} left vertices")
    partner = np.array([matched[l] for l in range(n)], dtype=np.int64)
    distances = np.array([lengths[(l, partner[l] + n)] for l in range(n)])
    return PerfectMatching(partner=partner, distances=distances,
                           provenance=f"rounding[{policy}]")


@dataclass(frozen=True)
class ConnectivityReport:
    component_count: int
    sizes: tuple[int, ...]


def support_connectivity_report(graph: IntersectionGraph) -> ConnectivityReport:
    """Connected-component census of the bipartite support (BFS)."""
    n = graph.n
    adj: dict[int, list[int]] = {v: [] for v in range(2 * n)}
    for e in range(graph.left.size):
        l, r = int(graph.left[e]), int(graph.right[e]) + n
        adj[l].append(r)
        adj[r].append(l)
    seen = np.zeros(2 * n, dtype=bool)
    sizes = []
    for v0 in range(2 * n):
        if seen[v0]:
            continue
        stack = [v0]
        seen[v0] = True
        size = 0
        while stack:
            v = stack.pop()
            size += 1
            for u in adj[v]:
                if not seen[u]:
                    seen[u] = True
                    stack.append(u)
        sizes.append(size)
    sizes.sort(reverse=True)
    return ConnectivityReport(component_count=len(sizes), sizes=tuple(sizes))
