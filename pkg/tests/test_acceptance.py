"""End-to-end acceptance checks.

Each test is one criterion and prints one pass/fail line under
``pytest -v``.  The two committed configs in ``configs/`` pin every seed,
so the ensemble-level numbers asserted here are deterministic; runtime
budgets are asserted where the criterion states one.  The criterion-5
pipeline run is shared (session fixture) by the transport, two-sided
bound, and determinism checks.
"""

import csv
import json
import time
from pathlib import Path

import numpy as np
import pytest

import oracles
from torusmatch import (
    as_fractional,
    build_intersection_graph,
    fit_stretched_exponent,
    load_config,
    nearest_point_tail,
    round_to_perfect,
    run_pipeline,
    sample_conditioned_pair,
    stable_allocation,
    survival_from_samples,
)
from torusmatch.geometry import TorusSpec
from torusmatch.points import rng_stream

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def _load_tail_csv(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    radii = np.array([float(r["r"]) for r in rows])
    surv = np.array([float(r["survival"]) for r in rows])
    return radii, surv


@pytest.fixture(scope="session")
def construction_run(tmp_path_factory):
    """Criterion-5 ensemble: the committed d=3 config, single worker."""
    cfg = load_config(CONFIG_DIR / "construction_d3.ini")
    out = tmp_path_factory.mktemp("constr") / "run"
    t0 = time.perf_counter()
    result = run_pipeline(cfg, out, workers=1)
    wall = time.perf_counter() - t0
    failures = result.manifest["failures"]
    assert failures == [], f"realizations failed: {failures}"
    return cfg, result, wall


def test_fractional_vertex_sums_exact_100_realizations():
    # d=3, G=64, n=512: every vertex weight sum must equal M/n = 512
    # in integer arithmetic, 100 seeded realizations, under 10 minutes.
    spec = TorusSpec(d=3, L=8.0, G=64)
    target = spec.M // 512
    t0 = time.perf_counter()
    for k in range(100):
        pair = sample_conditioned_pair(spec, 512, 1001, realization=k)
        graph = build_intersection_graph(stable_allocation(pair.first),
                                         stable_allocation(pair.second))
        left, right = graph.vertex_sums()
        assert left.dtype.kind == "i" and right.dtype.kind == "i"
        assert np.all(left == target) and np.all(right == target)
    wall = time.perf_counter() - t0
    assert wall < 600.0, f"took {wall:.1f}s, budget is 600s"


def test_rounding_bijection_on_support_with_oracle_100_instances():
    # 100 instances, n <= 8, d=2, G=16: bijection supported on the
    # fractional support, augmenting-path oracle confirms a perfect
    # matching exists, rotations never exceed initial edge count.
    spec = TorusSpec(d=2, L=4.0, G=16)
    for n in (1, 2, 4, 8):
        for rep in range(25):
            pair = sample_conditioned_pair(spec, n, 400 + n, realization=rep)
            graph = build_intersection_graph(stable_allocation(pair.first),
                                             stable_allocation(pair.second))
            support = set(zip(graph.left.tolist(), graph.right.tolist()))
            assert oracles.max_bipartite_matching(n, n, sorted(support)) == n
            stats = {}
            pm = round_to_perfect(as_fractional(graph), stats=stats)
            assert sorted(pm.partner.tolist()) == list(range(n))
            assert all((i, int(pm.partner[i])) in support for i in range(n))
            assert stats["rotations"] <= stats["initial_edges"]


def test_nearest_point_exponent_matches_dimension():
    # Pooled nearest-point tails over 200 realizations at n=512:
    # fitted exponent in [2.8, 3.2] for d=3 and [1.85, 2.15] for d=2,
    # under 15 minutes for both.
    t0 = time.perf_counter()
    spec3 = TorusSpec(d=3, L=8.0, G=64)
    pairs = [sample_conditioned_pair(spec3, 512, 777, realization=k)
             for k in range(200)]
    fit3 = fit_stretched_exponent(
        nearest_point_tail(pairs, np.linspace(0.0, 1.6, 81)))
    spec2 = TorusSpec(d=2, L=64.0, G=256)
    pairs = [sample_conditioned_pair(spec2, 512, 777, realization=k)
             for k in range(200)]
    fit2 = fit_stretched_exponent(
        nearest_point_tail(pairs, np.linspace(0.0, 8.0, 81)))
    wall = time.perf_counter() - t0
    assert 2.8 <= fit3.gamma <= 3.2, f"d=3 gamma {fit3.gamma:.3f}"
    assert 1.85 <= fit2.gamma <= 2.15, f"d=2 gamma {fit2.gamma:.3f}"
    assert wall < 900.0, f"took {wall:.1f}s, budget is 900s"


def test_synthetic_fit_recovers_known_exponents():
    # Inverse-transform samples from exp(-r^gamma): the fitter must
    # recover gamma = 1, 2, 3 within +-0.1, +-0.1, +-0.15 at 1e5 samples.
    radii = np.linspace(0.0, 5.0, 101)
    for gamma, tol in ((1.0, 0.1), (2.0, 0.1), (3.0, 0.15)):
        rng = rng_stream(424242, 0, int(gamma))
        samples = (-np.log(rng.random(10**5))) ** (1.0 / gamma)
        tail = survival_from_samples(samples, radii, label="synthetic")
        fit = fit_stretched_exponent(tail)
        assert abs(fit.gamma - gamma) <= tol, (
            f"gamma {gamma}: fitted {fit.gamma:.4f}")


def test_construction_tail_exponent_and_baseline_domination(construction_run):
    # Committed d=3 ensemble, stable scheme with min-length rounding:
    # fitted exponent >= 2.0 over the standard window, and construction
    # survival <= stable-baseline survival at every gridpoint in the
    # upper half of the fit window.  Under 30 minutes.
    cfg, result, wall = construction_run
    fits = json.loads((result.run_dir / "fits.json").read_text())
    fit = fits["construction"]["fit"]
    assert fit is not None, fits["construction"].get("fit_error")
    assert fit["gamma"] >= 2.0, f"construction gamma {fit['gamma']:.4f}"
    radii, constr = _load_tail_csv(result.run_dir / "tails" /
                                   "tail_construction.csv")
    radii_b, base = _load_tail_csv(result.run_dir / "tails" /
                                   "tail_baseline_stable.csv")
    assert np.array_equal(radii, radii_b)
    mid = 0.5 * (fit["window_lo"] + fit["window_hi"])
    upper = (radii >= mid) & (radii <= fit["window_hi"] + 1e-12)
    assert upper.sum() > 0
    assert np.all(constr[upper] <= base[upper]), (
        "construction tail exceeds stable baseline in upper half window")
    assert wall < 1800.0, f"pipeline took {wall:.1f}s, budget is 1800s"


def test_mass_transport_sent_equals_received(construction_run):
    # Exact identity at 20 radii for the first 50 realizations.
    cfg, result, wall = construction_run
    with open(result.run_dir / "transport.csv") as fh:
        rows = list(csv.DictReader(fh))
    rows = [r for r in rows if int(r["realization"]) < 50]
    radii = {r["r"] for r in rows}
    assert len(radii) == 20
    assert len(rows) == 20 * 50
    assert all(int(r["sent"]) == int(r["received"]) for r in rows)


def test_two_sided_bound_holds_across_fit_window(construction_run):
    # S_match(2r) <= S_diam1(r) + S_diam2(r) + 3*stderr at every
    # gridpoint of the construction fit window.
    cfg, result, wall = construction_run
    fits = json.loads((result.run_dir / "fits.json").read_text())
    bound = json.loads((result.run_dir / "bound_check.json").read_text())
    assert len(bound["rows"]) == fits["construction"]["fit"]["window_points"]
    assert all(row["passed"] for row in bound["rows"])
    assert bound["all_passed"]


def test_witness_report_on_committed_fixture(tmp_path):
    # Committed d=3 fixture, epsilon = 0.25, frozen pilot-calibrated
    # (r, N, D): removal density < 0.25, the selected class is exactly
    # 2N-separated, each partition class contains its center's N-ball
    # at site resolution, and every surviving component stays inside
    # one class.  Under 5 minutes.
    cfg = load_config(CONFIG_DIR / "witness_d3.ini")
    assert cfg.witness_r is not None and cfg.witness_N is not None
    assert cfg.witness_D is not None
    t0 = time.perf_counter()
    result = run_pipeline(cfg, tmp_path / "run", workers=1)
    wall = time.perf_counter() - t0
    report = json.loads((result.run_dir / "witness.json").read_text())
    assert report["density"] < 0.25
    assert report["x_separated"]
    assert report["ball_containment_ok"]
    assert report["components_single_class"]
    assert report["violations"] == []
    assert wall < 300.0, f"took {wall:.1f}s, budget is 300s"


def test_parallel_run_reproduces_identical_data_files(
        construction_run, tmp_path_factory):
    # The criterion-5 config rerun with 8 workers must write
    # byte-identical data CSVs (compared through manifest checksums).
    cfg, result, wall = construction_run
    out = tmp_path_factory.mktemp("constr_par") / "run"
    parallel = run_pipeline(cfg, out, workers=8)
    assert parallel.manifest["failures"] == []
    serial_manifest = json.loads((result.run_dir / "manifest.json").read_text())
    parallel_manifest = json.loads((parallel.run_dir / "manifest.json").read_text())
    serial_csv = {name: sha for name, sha in serial_manifest["files"].items()
                  if name.endswith(".csv")}
    parallel_csv = {name: sha for name, sha in parallel_manifest["files"].items()
                    if name.endswith(".csv")}
    assert serial_csv == parallel_csv
    assert len(serial_csv) > 200
