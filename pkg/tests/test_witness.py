from __future__ import annotations

import numpy as np
import pytest

import oracles
from conftest import make_pair, manual_config
from torusmatch import (
    ConfigurationError,
    TorusSpec,
    WitnessFailureError,
    WitnessParams,
    build_intersection_graph,
    build_proximity_graph,
    compute_removal_sets,
    derive_degree_cutoff,
    derive_scale_params,
    greedy_proper_coloring,
    pairwise_torus_distance,
    prune_high_degree,
    run_witness,
    select_separated_set,
    stable_allocation,
    verify_witness,
    voronoi_partition,
)
from torusmatch.witness import _boundary_sites


def star_graph():
    """One hub within 2N of four leaves; the leaves are pairwise far apart."""
    spec = TorusSpec(d=2, L=8.0, G=8)
    pts = np.array([[4.0, 4.0],
                    [2.1, 4.0], [5.9, 4.0], [4.0, 2.1], [4.0, 5.9]])
    return build_proximity_graph(pts, 1.0, spec), spec


def test_witness_params_validation():
    WitnessParams(epsilon=0.5, r=0.1, N=2.0, D=3, d=2)
    with pytest.raises(ConfigurationError):
        WitnessParams(epsilon=1.5, r=0.1, N=2.0, D=3, d=2)
    with pytest.raises(ConfigurationError):
        WitnessParams(epsilon=0.5, r=-0.1, N=2.0, D=3, d=2)
    with pytest.raises(ConfigurationError):
        WitnessParams(epsilon=0.5, r=0.1, N=2.0, D=0, d=2)
    # 2^d r / N = 0.4 is not < epsilon/2 = 0.25
    with pytest.raises(ConfigurationError, match="scale inequality"):
        WitnessParams(epsilon=0.5, r=0.2, N=2.0, D=3, d=2)


def test_proximity_graph_matches_full_scan():
    spec = TorusSpec(d=3, L=4.0, G=8)
    pair = make_pair(3, 8, 16, 55, L=4.0)
    pts = np.concatenate([pair.first.points, pair.second.points])
    for N in (0.3, 0.7, 1.4):
        g = build_proximity_graph(pts, N, spec)
        assert [tuple(e) for e in g.edges] == oracles.proximity_edges(
            pts, 2.0 * N, spec)
        deg = g.degrees()
        assert deg.sum() == 2 * g.edges.shape[0]
        adj = g.adjacency()
        for i, j in g.edges:
            assert int(j) in adj[int(i)] and int(i) in adj[int(j)]
    with pytest.raises(ConfigurationError):
        build_proximity_graph(pts, 0.0, spec)
    assert build_proximity_graph(pts[:1], 1.0, spec).edges.size == 0


def test_high_degree_pruning_removes_the_hub():
    g, _ = star_graph()
    assert g.degrees().tolist() == [4, 1, 1, 1, 1]
    assert prune_high_degree(g, 4).tolist() == [1, 2, 3, 4]
    assert prune_high_degree(g, 2).tolist() == [1, 2, 3, 4]
    with pytest.raises(WitnessFailureError):
        prune_high_degree(g, 1)


def test_greedy_coloring_is_proper_and_skips_pruned():
    g, _ = star_graph()
    survivors = prune_high_degree(g, 4)
    colors = greedy_proper_coloring(g, survivors)
    assert colors[0] == -1
    assert colors[1:].tolist() == [0, 0, 0, 0]

    pair = make_pair(2, 16, 16, 77)
    pts = np.concatenate([pair.first.points, pair.second.points])
    dense = build_proximity_graph(pts, 0.6, pair.spec)
    surv = prune_high_degree(dense, int(dense.degrees().max()) + 1)
    colors = greedy_proper_coloring(dense, surv)
    assert np.all(colors[surv] >= 0)
    for i, j in dense.edges:
        assert colors[i] != colors[j]


def test_selected_class_is_widely_separated():
    pair = make_pair(2, 16, 16, 78)
    pts = np.concatenate([pair.first.points, pair.second.points])
    N = 0.5
    g = build_proximity_graph(pts, N, pair.spec)
    surv = prune_high_degree(g, int(g.degrees().max()) + 1)
    colors = greedy_proper_coloring(g, surv)
    x = select_separated_set(colors, pts, N)
    counts = np.bincount(colors[colors >= 0])
    assert x.size == counts.max()
    if x.size >= 2:
        dx = pairwise_torus_distance(pts[x], pts[x], pair.spec, validate=False)
        np.fill_diagonal(dx, np.inf)
        assert dx.min() > 2 * N
    with pytest.raises(WitnessFailureError):
        select_separated_set(np.array([-1, -1]), pts[:2], N)


def test_voronoi_partition_antipodal_columns_and_ties():
    spec = TorusSpec(d=2, L=8.0, G=8)
    x = np.array([[2.5, 4.0], [4.5, 4.0]])
    part = voronoi_partition(x, spec).reshape(8, 8)
    # per-column classes; exact ties at x = 3.5 and 7.5 go to index 0
    expected = np.array([0, 0, 0, 0, 1, 1, 1, 0])
    assert np.array_equal(part, np.broadcast_to(expected[:, None], (8, 8)))
    with pytest.raises(WitnessFailureError):
        voronoi_partition(np.empty((0, 2)), spec)


def test_boundary_sites_match_neighbor_scan():
    spec = TorusSpec(d=2, L=4.0, G=8)
    rng = np.random.default_rng(5)
    part = rng.integers(0, 3, size=spec.M)
    mask = _boundary_sites(part, spec)
    for s in range(spec.M):
        assert mask[s] == oracles.grid_neighbor_classes_differ(part, s, spec)
    assert not _boundary_sites(np.zeros(spec.M, dtype=np.int64), spec).any()


def test_removal_sets_split_by_span_then_boundary():
    pair = make_pair(2, 8, 4, 66, L=8.0)
    f1, f2 = stable_allocation(pair.first), stable_allocation(pair.second)
    graph = build_intersection_graph(f1, f2)
    spans = graph.edge_lengths()
    params = WitnessParams(epsilon=0.9, r=float(np.median(spans)), N=60.0,
                           D=3, d=2)
    uniform = np.zeros(graph.spec.M, dtype=np.int64)
    u1, u2 = compute_removal_sets(graph, f1, f2, uniform, params)
    max_span = np.zeros(8)
    for l, r, s in zip(graph.left, graph.right, spans):
        max_span[l] = max(max_span[l], s)
        max_span[4 + r] = max(max_span[4 + r], s)
    assert np.array_equal(u1, max_span > params.r)
    assert not u2.any()

    split = voronoi_partition(np.array([[1.0, 1.0], [3.0, 3.0]]), graph.spec)
    u1b, u2b = compute_removal_sets(graph, f1, f2, split, params)
    assert np.array_equal(u1b, u1)
    assert not (u1b & u2b).any()
    boundary = _boundary_sites(split, graph.spec)
    touches = np.concatenate([boundary[f1.cells()].any(axis=1),
                              boundary[f2.cells()].any(axis=1)])
    assert np.array_equal(u2b, touches & ~u1b)


def test_scale_derivation_uses_upper_quantile_and_minimal_grid_multiple():
    spec = TorusSpec(d=2, L=4.0, G=16)
    r, N = derive_scale_params(np.array([1.0, 2.0, 3.0, 4.0]), 0.5, spec)
    assert r == 4.0
    assert N == pytest.approx(64.25)
    assert 2**spec.d * r / N < 0.25
    assert not (2**spec.d * r / (N - spec.step) < 0.25)
    # degenerate all-zero spans fall back to one grid step
    r0, _ = derive_scale_params(np.zeros(10), 0.5, spec)
    assert r0 == spec.step
    with pytest.raises(ConfigurationError):
        derive_scale_params(np.array([]), 0.5, spec)
    with pytest.raises(ConfigurationError):
        derive_scale_params(np.ones(3), 1.2, spec)


def test_degree_cutoff_keeps_at_least_half():
    assert derive_degree_cutoff(np.array([0, 1, 2, 3])) == 2
    assert derive_degree_cutoff(np.array([5, 5, 5, 5])) == 6
    rng = np.random.default_rng(8)
    for _ in range(20):
        degs = rng.integers(0, 30, size=int(rng.integers(1, 40)))
        D = derive_degree_cutoff(degs)
        h = (degs.size + 1) // 2
        assert np.sum(degs < D) >= h
        if D > 1:
            assert np.sum(degs < D - 1) < h
    with pytest.raises(ConfigurationError):
        derive_degree_cutoff(np.array([]))


def test_run_witness_report_is_self_consistent():
    pair = make_pair(2, 32, 64, 13, L=16.0)
    f1, f2 = stable_allocation(pair.first), stable_allocation(pair.second)
    graph = build_intersection_graph(f1, f2)
    witness, report = run_witness(graph, f1, f2, 0.25)
    n = graph.n
    params = witness.params
    assert 2**params.d * params.r / params.N < params.epsilon / 2
    assert params.N / graph.spec.step == pytest.approx(
        round(params.N / graph.spec.step))
    assert np.array_equal(
        witness.x_points,
        np.concatenate([pair.first.points, pair.second.points])[witness.x_indices])

    removed = witness.u1 | witness.u2
    assert report.density == pytest.approx(removed.sum() / (2 * n))
    assert report.density_ok == (report.density < params.epsilon)

    edges = [(int(l), int(r) + n)
             for l, r in zip(graph.left, graph.right)
             if not removed[l] and not removed[r + n]]
    isolated = int(removed.sum())
    count, _ = oracles.union_find_components(2 * n, edges)
    assert report.component_count == count - isolated

    if witness.x_points.shape[0] >= 2:
        dx = pairwise_torus_distance(witness.x_points, witness.x_points,
                                     graph.spec, validate=False)
        np.fill_diagonal(dx, np.inf)
        assert report.x_separated == bool(dx.min() > 2 * params.N)
    flags = {
        report.density_ok: "density",
        report.components_single_class: "component",
        report.boundary_ok: "boundary fraction",
        report.x_separated: "separated",
        report.ball_containment_ok: "ball",
    }
    joined = " | ".join(report.violations)
    for ok, needle in flags.items():
        if not ok:
            assert needle in joined


def test_run_witness_with_explicit_params_reports_violations_not_raises():
    # with n = 2 the half-torus cells overlap across the clusters, so the
    # long cross edges land every vertex in U1 and the report must record
    # the density failure instead of raising
    spec = TorusSpec(d=2, L=8.0, G=16)
    left = manual_config(spec, [[1.05, 1.05], [5.05, 5.05]], label=1)
    right = manual_config(spec, [[0.95, 0.95], [4.95, 4.95]], label=2)
    f1, f2 = stable_allocation(left), stable_allocation(right)
    graph = build_intersection_graph(f1, f2)
    witness, report = run_witness(graph, f1, f2, 0.5, r=0.2, N=4.0, D=5)
    assert witness.u2.any() or witness.u1.any()
    assert not report.density_ok
    assert report.violations
    assert report.epsilon == 0.5
