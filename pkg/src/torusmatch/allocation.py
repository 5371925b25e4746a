"""Equal-capacity allocation of grid sites to configuration points.

Every point of an n-point configuration receives exactly M/n sites (its
cell), it always owns the site it occupies, and the owner map is total.
Two schemes are provided:

stable
    Capacity-constrained stable assignment between sites and points with
    the global preference order (distance, point index, site index).  Under
    this shared order the stable allocation is unique and equals the greedy
    sweep: process all site-point pairs by increasing (distance, point
    index, site index) and assign whenever the site is free and the point
    has spare capacity.  The implementation runs that sweep over sorted
    candidate tiers (nearest-point prefixes per site, escalated and rerun
    for the rare sites whose prefix is exhausted), which avoids sorting
    all M*n pairs.

dyadic
    Ascending dyadic subdivision: each point first claims its own site;
    then, for box side 2, 4, ..., G, unclaimed sites in each box are
    claimed greedily by (distance, point index, site index) among the
    box's points with remaining capacity.  Totality is forced at the top
    level where capacity and unclaimed counts balance exactly.  Unlike the
    stable scheme, this one is translation-equivariant only under shifts
    that preserve the box structure (multiples of G/2 grid steps).

Points are required to occupy pairwise distinct sites; self-ownership is
unsatisfiable otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigurationError, DomainError, InternalInvariantError
from .geometry import (
    TorusSpec,
    pairwise_torus_distance,
    set_diameter,
    site_centers,
    torus_delta,
)
from .points import PointConfig

try:
    from numba import njit as _njit
except ImportError:  # pragma: no cover - accelerator only
    _njit = None

__all__ = [
    "AllocationField",
    "CellStats",
    "stable_allocation",
    "dyadic_hierarchical_allocation",
    "cell_stats",
    "blocking_pairs",
    "SCHEMES",
]

SCHEMES = ("stable", "dyadic")

# candidate tiers larger than this are sorted lazily, one bucket at a time
_BUCKET_PAIRS = 1 << 18


@dataclass(frozen=True)
class AllocationField:
    """Total owner map: site index -> point index, exact capacity M/n."""

    spec: TorusSpec
    config: PointConfig
    owner: np.ndarray
    scheme: str

    def __post_init__(self):
        own = np.asarray(self.owner, dtype=np.int64)
        n, M = self.config.n, self.spec.M
        if own.shape != (M,):
            raise DomainError(f"owner map must have length M={M}")
        if own.min() < 0 or own.max() >= n:
            raise DomainError("owner map contains indices outside [0, n)")
        counts = np.bincount(own, minlength=n)
        if not np.all(counts == M // n):
            bad = int(np.flatnonzero(counts != M // n)[0])
            raise DomainError(
                f"point {bad} owns {counts[bad]} sites, expected {M // n}")
        self_sites = self.config.occupied_sites()
        if not np.array_equal(own[self_sites], np.arange(n)):
            raise DomainError("some point does not own its own site")
        own.setflags(write=False)
        object.__setattr__(self, "owner", own)

    @property
    def capacity(self) -> int:
        return self.spec.M // self.config.n

    def cells(self) -> np.ndarray:
        """(n, capacity) array: row p lists the sites owned by point p,
        ascending."""
        order = np.argsort(self.owner, kind="stable")
        return order.reshape(self.config.n, self.capacity)


@dataclass(frozen=True)
class CellStats:
    """Per-point cell diameters and site counts for one allocation."""

    diameters: np.ndarray
    counts: np.ndarray
    realization: int | None = None
    approximate: bool = False

    def __post_init__(self):
        if np.any(self.diameters < 0):
            raise DomainError("cell diameters must be nonnegative")


def _require_spec_match(config: PointConfig, spec: TorusSpec | None) -> TorusSpec:
    if spec is not None and spec != config.spec:
        raise DomainError("spec argument disagrees with the config's spec")
    return config.spec


def _self_sites(config: PointConfig) -> np.ndarray:
    sites = config.occupied_sites()
    if np.unique(sites).size != sites.size:
        raise DomainError(
            "two points share a grid site; allocation needs one point per site")
    return sites


def _sort_pairs(dist, point, site):
    """Order one candidate tier by (distance, point index, site index)."""
    if dist.size <= 1 << 17:
        order = np.lexsort((site, point, dist))
        return dist[order], point[order], site[order]
    # stable distance sort, then exact tie repair; genuine float ties only
    # occur on symmetric fixtures, which take the small branch above
    order = np.argsort(dist, kind="stable")
    dist, point, site = dist[order], point[order], site[order]
    ties = np.flatnonzero(dist[1:] == dist[:-1])
    if ties.size:
        starts = ties[np.diff(ties, prepend=-2) > 1]
        for a in starts:
            b = a + 1
            while b + 1 < dist.size and dist[b + 1] == dist[a]:
                b += 1
            run = slice(a, b + 1)
            sub = np.lexsort((site[run], point[run]))
            point[run] = point[run][sub]
            site[run] = site[run][sub]
    return dist, point, site


def _stream_greedy_py(dist, point, site, pos, seg_hi, barrier, owner, rem, todo):
    """Greedy sweep over pre-sorted pair streams, merged on the fly.

    Pairs are consumed in (distance, point, site) order; a pair is accepted
    when its site is unowned and its point has remaining capacity.  The
    sweep halts at the barrier (pairs at or beyond it may still be pending
    in unsorted buckets elsewhere) or when every stream is drained.
    Mutates pos/owner/rem in place and returns the unassigned-site count.
    """
    ns = pos.size
    while todo > 0:
        best = -1
        bd = 0.0
        bp = -1
        bs = -1
        for j in range(ns):
            q = pos[j]
            if q < seg_hi[j]:
                dj = dist[q]
                if (best == -1 or dj < bd
                        or (dj == bd and (point[q] < bp
                                          or (point[q] == bp and site[q] < bs)))):
                    best = j
                    bd = dj
                    bp = point[q]
                    bs = site[q]
        if best == -1 or bd >= barrier:
            break
        pos[best] += 1
        if owner[bs] >= 0:
            continue
        if rem[bp] > 0:
            owner[bs] = bp
            rem[bp] -= 1
            todo -= 1
    return todo


if _njit is not None:
    _stream_greedy = _njit(cache=True)(_stream_greedy_py)
else:  # pragma: no cover - exercised only without the accelerator
    _stream_greedy = _stream_greedy_py


def stable_allocation(config: PointConfig, spec: TorusSpec | None = None, *,
                      initial_rank: int = 3) -> AllocationField:
    """Unique stable allocation under the (distance, point, site) order.

    Self sites are assigned by fiat before the market opens, so each point
    allocates capacity-1 market slots.  Each market site starts with its
    `initial_rank` nearest points as candidates; the greedy sweep runs over
    the merged sorted tiers, and any site left unassigned (its whole prefix
    was consumed by capacity) gets a deeper prefix before the sweep reruns
    from scratch.  A rerun is exact because candidate sets are always
    distance prefixes: the sweep can only differ from the full-pair sweep
    at a pair some site was missing, and a site assigned within its prefix
    is missing none below its assignment.
    """
    spec = _require_spec_match(config, spec)
    n, M, L = config.n, spec.M, spec.L
    if M % n != 0:
        raise DomainError(f"n={n} does not divide M={M}")
    cap = M // n
    owner0 = np.full(M, -1, dtype=np.int64)
    owner0[_self_sites(config)] = np.arange(n)
    market = np.flatnonzero(owner0 < 0)
    S = market.size
    if S == 0:
        return AllocationField(spec, config, owner0, "stable")
    rem0 = np.full(n, cap - 1, dtype=np.int64)
    centers = site_centers(spec)
    tree = cKDTree(config.points, boxsize=L) if n > initial_rank else None

    def tier(sites, k):
        """Raw candidate pairs for the k nearest points of each given site."""
        if k >= n or tree is None:
            # full rows, chunked to bound the (chunk, n, d) delta temporary
            step = max(1, 4_000_000 // n)
            d = np.concatenate([
                pairwise_torus_distance(centers[sites[a:a + step]],
                                        config.points, spec,
                                        validate=False).ravel()
                for a in range(0, sites.size, step)])
            p = np.tile(np.arange(n, dtype=np.int64), sites.size)
        else:
            qd, qi = tree.query(centers[sites], k=k)
            d = qd.reshape(sites.size, k).ravel()
            p = qi.reshape(sites.size, k).astype(np.int64, copy=False).ravel()
        s = np.repeat(sites, min(k, n))
        return d, p, s

    # one geometrically grown buffer per pair column; appending a segment
    # must not re-copy the pairs already streamed
    buf_cap = 0
    buf_len = 0
    dist = np.empty(0)
    point = np.empty(0, dtype=np.int64)
    site = np.empty(0, dtype=np.int64)
    seg_lo: list[int] = []
    seg_hi: list[int] = []
    pending: list[list] = []  # [min distance, raw d, raw p, raw s]

    def append_sorted(d, p, s):
        nonlocal buf_cap, buf_len, dist, point, site
        d, p, s = _sort_pairs(d, p, s)
        end = buf_len + d.size
        if end > buf_cap:
            buf_cap = max(2 * buf_cap, end)
            for name, src in (("dist", dist), ("point", point), ("site", site)):
                grown = np.empty(buf_cap, dtype=src.dtype)
                grown[:buf_len] = src[:buf_len]
                if name == "dist":
                    dist = grown
                elif name == "point":
                    point = grown
                else:
                    site = grown
        dist[buf_len:end] = d
        point[buf_len:end] = p
        site[buf_len:end] = s
        seg_lo.append(buf_len)
        seg_hi.append(end)
        buf_len = end

    def add_tier(sites_arr, k):
        """Sort a tier now, or bucket a large full-row tier lazily.

        Full rows span the whole distance range but the sweep rarely
        consumes their far end, so those pairs wait unsorted until the
        barrier logic proves they are needed.  Prefix tiers are consumed
        nearly whole and go in sorted.
        """
        d, p, s = tier(sites_arr, k)
        if k < n or d.size <= (_BUCKET_PAIRS * 3) // 2:
            append_sorted(d, p, s)
            return
        nb = -(-d.size // _BUCKET_PAIRS)
        cuts = [d.size * i // nb for i in range(1, nb)]
        part = np.argpartition(d, cuts)
        bounds = [0] + cuts + [d.size]
        blk = part[:cuts[0]]
        append_sorted(d[blk], p[blk], s[blk])
        for i in range(1, nb):
            blk = part[bounds[i]:bounds[i + 1]]
            pending.append([float(d[part[bounds[i]]]), d[blk], p[blk], s[blk]])

    k0 = min(initial_rank, n)
    rank = np.zeros(M, dtype=np.int64)
    rank[market] = k0
    add_tier(market, k0)
    owner = owner0.copy()
    rem = rem0.copy()
    todo = S
    pos = np.array(seg_lo, dtype=np.int64)
    for _ in range(4096):
        if pos.size < len(seg_lo):
            pos = np.append(pos, np.array(seg_lo[pos.size:], dtype=np.int64))
        barrier = min((b[0] for b in pending), default=np.inf)
        hi = np.array(seg_hi, dtype=np.int64)
        # drained segments never revive; keep the merge loop short
        alive = np.flatnonzero(pos < hi)
        if alive.size:
            pos_alive = pos[alive]
            todo = _stream_greedy(dist, point, site, pos_alive, hi[alive],
                                  barrier, owner, rem, todo)
            pos[alive] = pos_alive
        if todo == 0:
            return AllocationField(spec, config, owner, "stable")
        if pending:
            j = min(range(len(pending)), key=lambda i: pending[i][0])
            _, d, p, s = pending.pop(j)
            append_sorted(d, p, s)
            continue
        failed = np.flatnonzero(owner < 0)
        if np.any(rank[failed] >= n):
            raise InternalInvariantError(
                "a site with a full candidate row stayed unassigned")
        # escalated sites requery from rank 0: duplicates of already
        # streamed pairs are skipped at an owned site, never accepted twice
        for kc in np.unique(rank[failed]):
            grp = failed[rank[failed] == kc]
            add_tier(grp, min(int(kc) * 8, n))
            rank[grp] = min(int(kc) * 8, n)
        owner = owner0.copy()
        rem = rem0.copy()
        todo = S
        pos = np.array(seg_lo, dtype=np.int64)
    raise InternalInvariantError("candidate escalation failed to converge")


def dyadic_hierarchical_allocation(config: PointConfig,
                                   spec: TorusSpec | None = None) -> AllocationField:
    """Ascending dyadic box allocation (see module docstring)."""
    spec = _require_spec_match(config, spec)
    n, M, G, d = config.n, spec.M, spec.G, spec.d
    if G & (G - 1) != 0:
        raise ConfigurationError(
            f"dyadic scheme needs G to be a power of 2, got G={G}")
    if M % n != 0:
        raise DomainError(f"n={n} does not divide M={M}")
    cap = M // n
    owner = np.full(M, -1, dtype=np.int64)
    self_sites = _self_sites(config)
    owner[self_sites] = np.arange(n)
    remcap = np.full(n, cap - 1, dtype=np.int64)

    centers = site_centers(spec)
    site_tup = np.stack(np.unravel_index(np.arange(M), (G,) * d), axis=1)
    point_tup = site_tup[self_sites]

    B = 2
    while B <= G:
        if not np.any(owner < 0):
            break
        shape = (G // B,) * d
        site_box = np.ravel_multi_index(tuple((site_tup // B).T), shape)
        point_box = np.ravel_multi_index(tuple((point_tup // B).T), shape)
        unclaimed = np.flatnonzero(owner < 0)
        hungry = np.flatnonzero(remcap > 0)
        boxes = np.intersect1d(site_box[unclaimed], point_box[hungry])
        for box in boxes:
            sites = unclaimed[site_box[unclaimed] == box]
            pts = hungry[point_box[hungry] == box]
            if sites.size == 0 or pts.size == 0:
                continue
            dmat = pairwise_torus_distance(centers[sites], config.points[pts],
                                           spec, validate=False)
            si, pi = np.unravel_index(np.argsort(dmat, axis=None, kind="stable"),
                                      dmat.shape)
            # flatten order ties by flat index = (site, point); required
            # order is (distance, point, site), so re-sort ties explicitly
            flat = np.lexsort((sites[si], pts[pi], dmat[si, pi]))
            si, pi = si[flat], pi[flat]
            free = remcap[pts].copy()
            taken = np.zeros(sites.size, dtype=bool)
            budget = min(sites.size, int(free.sum()))
            for a, b in zip(si, pi):
                if budget == 0:
                    break
                if taken[a] or free[b] == 0:
                    continue
                owner[sites[a]] = pts[b]
                taken[a] = True
                free[b] -= 1
                budget -= 1
            remcap[pts] = free
        B *= 2
    if np.any(owner < 0):
        raise InternalInvariantError("dyadic allocation left sites unowned")
    return AllocationField(spec, config, owner, "dyadic")


def _exact_cell_diameters(cells: np.ndarray, field: AllocationField) -> np.ndarray:
    """Exact per-cell diameters without scanning all pairs in every cell.

    With r_i the distance from cell site i to the cell's own point, rmax
    its maximum at site i0, and lb the largest distance from i0 to any
    cell site, a pair with an endpoint j satisfying r_j + rmax <= lb is
    bounded by r_i + r_j <= lb (triangle through the point).  Only pairs
    inside the complement can beat lb, and that candidate set is small for
    any cell that is not badly stretched.
    """
    spec = field.spec
    n, cap = cells.shape
    if cap == 1:
        return np.zeros(n)
    cc = site_centers(spec)[cells]
    rows_idx = np.arange(n)
    r = np.sqrt((torus_delta(cc, field.config.points[:, None, :], spec) ** 2)
                .sum(axis=2))
    anchor = np.argmax(r, axis=1)
    rmax = r[rows_idx, anchor]
    # ping-pong a few farthest-point anchors per cell; each row both
    # tightens the lower bound and tends to land on a diameter endpoint
    lb = np.zeros(n)
    for _ in range(3):
        far = cc[rows_idx, anchor]
        row = np.sqrt((torus_delta(cc, far[:, None, :], spec) ** 2).sum(axis=2))
        lb = np.maximum(lb, row.max(axis=1))
        anchor = np.argmax(row, axis=1)
    cand = (r + rmax[:, None]) > lb[:, None]
    diam = lb.copy()
    sizes = cand.sum(axis=1)
    todo = np.flatnonzero(sizes >= 2)
    # batch cells whose candidate counts share a power-of-2 bucket, padding
    # each block with its first candidate (duplicate rows cannot change a
    # maximum), so one broadcast handles the whole bucket
    buckets = np.zeros(n, dtype=np.int64)
    buckets[todo] = 1 << np.ceil(np.log2(sizes[todo])).astype(np.int64)
    for width in np.unique(buckets[todo]):
        members = todo[buckets[todo] == width]
        m = int(sizes[members].max())
        idx = np.empty((members.size, m), dtype=np.int64)
        for i, p in enumerate(members):
            rows_p = np.flatnonzero(cand[p])
            idx[i, :rows_p.size] = rows_p
            idx[i, rows_p.size:] = rows_p[0]
        step = max(1, 8_000_000 // (m * m))
        half = 0.5 * spec.L
        for a in range(0, members.size, step):
            sub = cc[members[a:a + step, None], idx[a:a + step]]
            acc = np.zeros((sub.shape[0], m, m))
            # axis-at-a-time fold and square keeps the temporaries 3-D
            for ax in range(sub.shape[2]):
                dd = sub[:, :, None, ax] - sub[:, None, :, ax]
                np.subtract(dd, spec.L, out=dd, where=dd > half)
                np.add(dd, spec.L, out=dd, where=dd < -half)
                dd *= dd
                acc += dd
            grp = members[a:a + step]
            diam[grp] = np.maximum(diam[grp], np.sqrt(acc.max(axis=(1, 2))))
    return diam


def cell_stats(field: AllocationField, *, approximate: bool = False,
               sample_pairs: int = 4096, seed: int = 0) -> CellStats:
    """Per-cell diameters (max pairwise site-center distance) and counts.

    The exact mode prunes with a triangle-inequality bound but returns the
    same values as a full scan of all site pairs per cell.  The approximate
    mode samples `sample_pairs` random pairs per cell and is always
    labeled, so downstream reports cannot mistake it for the exact
    statistic.
    """
    spec = field.spec
    cells = field.cells()
    n, cap = cells.shape
    if not approximate or cap * (cap - 1) // 2 <= sample_pairs:
        diam = _exact_cell_diameters(cells, field)
        approximate = False
    else:
        diam = np.empty(n)
        rng = np.random.Generator(np.random.Philox(key=seed))
        centers = site_centers(spec)
        for p in range(n):
            i = rng.integers(0, cap, size=sample_pairs)
            j = rng.integers(0, cap, size=sample_pairs)
            pts = centers[cells[p]]
            delta = torus_delta(pts[i], pts[j], spec)
            diam[p] = float(np.sqrt((delta**2).sum(axis=1)).max())
    prov = field.config.provenance
    return CellStats(
        diameters=diam,
        counts=np.full(n, cap, dtype=np.int64),
        realization=None if prov is None else prov.realization,
        approximate=approximate,
    )


def blocking_pairs(field: AllocationField, *, limit: int = 64) -> list[tuple[int, int]]:
    """Scan for blocking (site, point) pairs over market sites.

    A market site s and point p block the allocation when s strictly
    prefers p to its owner and p strictly prefers s to its worst held
    market site, both under the (distance, point index, site index)
    order.  Self sites are assigned by fiat and sit outside the market on
    both sides of the comparison.  Returns at most `limit` pairs; empty
    means stable.
    """
    spec, config = field.spec, field.config
    n = config.n
    self_sites = config.occupied_sites()
    is_self = np.zeros(spec.M, dtype=bool)
    is_self[self_sites] = True
    market = np.flatnonzero(~is_self)
    if market.size == 0:
        return []
    centers = site_centers(spec)[market]
    own = field.owner[market]
    dmat = pairwise_torus_distance(centers, config.points, spec, validate=False)
    d_own = dmat[np.arange(market.size), own]
    # worst held market site per point under (distance, site) order
    worst_d = np.full(n, -np.inf)
    worst_s = np.full(n, -1, dtype=np.int64)
    for row in range(market.size):
        p = own[row]
        key = (d_own[row], market[row])
        if key > (worst_d[p], worst_s[p]):
            worst_d[p], worst_s[p] = key[0], key[1]
    out: list[tuple[int, int]] = []
    for row in range(market.size):
        s = market[row]
        for p in range(n):
            if p == own[row]:
                continue
            prefers_site = (dmat[row, p], p) < (d_own[row], own[row])
            prefers_point = (dmat[row, p], s) < (worst_d[p], worst_s[p])
            if prefers_site and prefers_point:
                out.append((int(s), int(p)))
                if len(out) >= limit:
                    return out
    return out
