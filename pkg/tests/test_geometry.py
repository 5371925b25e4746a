from __future__ import annotations

import numpy as np
import pytest

from torusmatch import (
    DomainError,
    TorusSpec,
    pairwise_torus_distance,
    set_diameter,
    site_centers,
    site_coordinates,
    site_index_to_tuple,
    site_of_point,
    site_tuple_to_index,
    torus_distance,
)
from torusmatch.geometry import torus_delta


def test_spec_derived_quantities():
    spec = TorusSpec(d=3, L=8.0, G=64)
    assert spec.M == 64**3
    assert spec.step == 0.125
    assert spec.site_volume == 0.125**3
    assert spec.max_distance == pytest.approx(4.0 * np.sqrt(3.0))


@pytest.mark.parametrize("d,L,G", [(1, 4.0, 8), (2, 0.0, 8), (2, -1.0, 8),
                                   (2, 4.0, 1), (0, 4.0, 4)])
def test_spec_rejects_degenerate_parameters(d, L, G):
    with pytest.raises(DomainError):
        TorusSpec(d=d, L=L, G=G)


def test_site_index_roundtrip_exhaustive():
    spec = TorusSpec(d=2, L=4.0, G=4)
    idx = np.arange(spec.M)
    tup = site_index_to_tuple(idx, spec)
    assert tup.shape == (spec.M, 2)
    assert np.array_equal(site_tuple_to_index(tup, spec), idx)


def test_site_index_roundtrip_random_d3():
    spec = TorusSpec(d=3, L=8.0, G=16)
    rng = np.random.default_rng(5)
    idx = rng.integers(0, spec.M, size=200)
    assert np.array_equal(site_tuple_to_index(site_index_to_tuple(idx, spec), spec), idx)


def test_site_index_bounds_checked():
    spec = TorusSpec(d=2, L=4.0, G=4)
    with pytest.raises(DomainError):
        site_index_to_tuple(np.array([spec.M]), spec)
    with pytest.raises(DomainError):
        site_tuple_to_index(np.array([[0, 4]]), spec)


def test_site_coordinates_are_cell_centers():
    spec = TorusSpec(d=2, L=4.0, G=8)
    # site (i, j) has center ((i + 0.5) step, (j + 0.5) step)
    coords = site_coordinates(np.array([0, 9]), spec)
    assert np.allclose(coords[0], [0.25, 0.25])
    assert np.allclose(coords[1], [0.75, 0.75])


def test_site_of_point_inverts_centers_and_handles_edges():
    spec = TorusSpec(d=2, L=4.0, G=8)
    centers = site_centers(spec)
    assert np.array_equal(site_of_point(centers, spec), np.arange(spec.M))
    near_top = np.array([[4.0 - 1e-12, 4.0 - 1e-12]])
    assert site_of_point(near_top, spec)[0] == spec.M - 1
    with pytest.raises(DomainError):
        site_of_point(np.array([[4.0, 0.0]]), spec)


def test_site_centers_cached_and_readonly():
    spec = TorusSpec(d=2, L=4.0, G=8)
    c = site_centers(spec)
    assert c is site_centers(TorusSpec(d=2, L=4.0, G=8))
    assert not c.flags.writeable


def test_torus_distance_wraps_around():
    spec = TorusSpec(d=2, L=8.0, G=8)
    a = np.array([0.5, 0.5])
    b = np.array([7.5, 0.5])
    assert torus_distance(a, b, spec) == pytest.approx(1.0)
    assert torus_distance(a, a, spec) == 0.0


def test_torus_distance_symmetric_and_bounded():
    spec = TorusSpec(d=3, L=4.0, G=8)
    rng = np.random.default_rng(11)
    a = rng.random((50, 3)) * spec.L
    b = rng.random((50, 3)) * spec.L
    dab = torus_distance(a, b, spec)
    dba = torus_distance(b, a, spec)
    assert np.allclose(dab, dba)
    assert np.all(dab <= spec.max_distance + 1e-12)


def test_torus_distance_rejects_out_of_range():
    spec = TorusSpec(d=2, L=4.0, G=8)
    with pytest.raises(DomainError):
        torus_distance(np.array([4.0, 0.0]), np.array([0.0, 0.0]), spec)
    with pytest.raises(DomainError):
        torus_distance(np.array([-0.1, 0.0]), np.array([0.0, 0.0]), spec)


def test_torus_delta_half_gap_keeps_magnitude():
    spec = TorusSpec(d=2, L=8.0, G=8)
    a = np.array([4.0, 0.0])
    b = np.array([0.0, 0.0])
    assert np.allclose(np.abs(torus_delta(a, b, spec)), [4.0, 0.0])
    assert np.allclose(np.abs(torus_delta(b, a, spec)), [4.0, 0.0])
    assert torus_distance(a, b, spec) == pytest.approx(4.0)


def test_torus_delta_matches_integer_shift_minimum():
    spec = TorusSpec(d=2, L=4.0, G=8)
    rng = np.random.default_rng(3)
    a = rng.random((40, 2)) * spec.L
    b = rng.random((40, 2)) * spec.L
    delta = torus_delta(a, b, spec)
    # brute force over the three candidate shifts per component
    raw = a - b
    cands = np.stack([raw - spec.L, raw, raw + spec.L])
    expect = np.take_along_axis(
        cands, np.abs(cands).argmin(axis=0)[None], axis=0)[0]
    assert np.array_equal(delta, expect)


def test_pairwise_matches_elementwise():
    spec = TorusSpec(d=2, L=4.0, G=8)
    rng = np.random.default_rng(7)
    a = rng.random((6, 2)) * spec.L
    b = rng.random((9, 2)) * spec.L
    mat = pairwise_torus_distance(a, b, spec)
    assert mat.shape == (6, 9)
    for i in range(6):
        for j in range(9):
            assert mat[i, j] == pytest.approx(
                float(torus_distance(a[i], b[j], spec)), abs=1e-15)


def test_set_diameter_trivial_and_known():
    spec = TorusSpec(d=2, L=8.0, G=8)
    assert set_diameter([11], spec) == 0.0
    # sites (0,0) and (7,0): centers 0.5 and 7.5, wrapped distance 1
    s = site_tuple_to_index(np.array([[0, 0], [7, 0]]), spec)
    assert set_diameter(s, spec) == pytest.approx(1.0)
    assert set_diameter(set(int(x) for x in s), spec) == pytest.approx(1.0)


def test_set_diameter_matches_brute_force():
    spec = TorusSpec(d=2, L=4.0, G=16)
    rng = np.random.default_rng(13)
    for _ in range(5):
        sites = rng.choice(spec.M, size=17, replace=False)
        centers = site_centers(spec)[sites]
        brute = pairwise_torus_distance(centers, centers, spec).max()
        assert set_diameter(sites, spec) == pytest.approx(float(brute))


def test_set_diameter_rejects_empty():
    spec = TorusSpec(d=2, L=4.0, G=8)
    with pytest.raises(DomainError):
        set_diameter([], spec)
