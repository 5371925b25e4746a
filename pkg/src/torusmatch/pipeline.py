"""Ensemble orchestration: realizations, tails, checks, persistence.

One run = one output directory:

    config.ini                resolved configuration (exact round-trip form)
    realizations/rNNNN/*.csv  per-realization artifacts
    tails/*.csv               pooled survival curves (diameter tails on the
                              half grid so the two-sided check reads exact
                              gridpoints)
    fits.json                 stretched-exponential fit summaries
    bound_check.json          two-sided tail bound report
    transport.csv             mass-transport counts per (realization, r)
    witness.json              hyperfiniteness witness report (if enabled)
    manifest.json             config hash, version, file checksums,
                              failures, timestamps

Realizations are independent jobs: each derives its own RNG streams from
(base_seed, realization, process label), so results are identical for any
worker count and scheduling order; the ensemble reduction is an ordered
fold over realization indices.  A failed realization is recorded in the
manifest and excluded from the fold without corrupting the others.
"""

from __future__ import annotations

import multiprocessing
import time
import traceback
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .allocation import cell_stats, dyadic_hierarchical_allocation, stable_allocation
from .baselines import greedy_nearest, optimal_assignment, stable_matching
from .config import ExperimentConfig, config_sha256, serialize_config
from .errors import ConfigurationError, TorusMatchError
from .io import (bound_report_summary, fmt_float, sha256_file, tail_summary,
                 witness_summary, write_csv, write_cells_csv, write_graph_csv,
                 write_json, write_matching_csv, write_points_csv,
                 write_tail_csv)
from .matching import as_fractional, build_intersection_graph, round_to_perfect
from .points import RNG_RULE, sample_conditioned_pair
from .tails import (cell_diameter_tail, fit_stretched_exponent,
                    mass_transport_check, survival_from_samples,
                    two_sided_bound_check)
from .witness import run_witness

__all__ = ["RunResult", "run_pipeline", "transport_radii"]

_BASELINE_FN = {
    "stable": stable_matching,
    "optimal": optimal_assignment,
    "greedy": greedy_nearest,
}
_SCHEME_FN = {
    "stable": stable_allocation,
    "dyadic": dyadic_hierarchical_allocation,
}


@dataclass(frozen=True)
class RunResult:
    run_dir: Path
    manifest: dict


def transport_radii(radii: np.ndarray, k: int = 20) -> np.ndarray:
    """Deterministic subgrid of at most k radii for the transport check."""
    if radii.size <= k:
        return radii
    idx = np.unique(np.round(np.linspace(0, radii.size - 1, k)).astype(int))
    return radii[idx]


def _realization_job(args: tuple[ExperimentConfig, str, int]) -> tuple[int, dict]:
    config, run_dir, idx = args
    try:
        spec = config.spec()
        pair = sample_conditioned_pair(spec, config.n, config.base_seed,
                                       realization=idx)
        allocate = _SCHEME_FN[config.scheme]
        field1 = allocate(pair.first)
        field2 = allocate(pair.second)
        graph = build_intersection_graph(field1, field2)
        pm = round_to_perfect(as_fractional(graph), config.policy)
        stats1 = cell_stats(field1)
        stats2 = cell_stats(field2)

        rdir = Path(run_dir) / "realizations" / f"r{idx:04d}"
        rdir.mkdir(parents=True, exist_ok=True)
        write_points_csv(pair, rdir / "points.csv")
        write_graph_csv(graph, rdir / "graph.csv")
        write_cells_csv(stats1, rdir / "cells_1.csv")
        write_cells_csv(stats2, rdir / "cells_2.csv")
        write_matching_csv(pm, rdir / "matching_construction.csv")

        baseline_dist = {}
        for name in config.baselines:
            bpm = _BASELINE_FN[name](pair)
            baseline_dist[name] = bpm.distances
            write_matching_csv(bpm, rdir / f"matching_{name}.csv")

        transport = []
        for r in transport_radii(config.radii()):
            sent, received = mass_transport_check(pm, stats2, float(r))
            transport.append((float(r), sent, received))

        spans = np.zeros(2 * config.n)
        lengths = graph.edge_lengths()
        np.maximum.at(spans, graph.left, lengths)
        np.maximum.at(spans, graph.right + config.n, lengths)

        files = sorted(str(p.relative_to(run_dir)) for p in rdir.iterdir())
        return idx, {
            "construction": pm.distances,
            "baselines": baseline_dist,
            "diam1": stats1.diameters,
            "diam2": stats2.diameters,
            "transport": transport,
            "max_span": spans,
            "files": files,
        }
    except Exception as exc:
        return idx, {"error": f"{type(exc).__name__}: {exc}",
                     "trace": traceback.format_exc()}


def _fit_or_note(tail):
    try:
        return tail.with_fit(fit_stretched_exponent(tail)), None
    except TorusMatchError as exc:
        return tail, str(exc)


def run_pipeline(config: ExperimentConfig, out_dir: str | Path | None = None,
                 workers: int = 1) -> RunResult:
    """Execute the full ensemble described by config; returns the run
    directory and the manifest dict (also persisted as manifest.json)."""
    issues = config.issues()
    if issues:
        raise ConfigurationError(
            "invalid config: " + "; ".join(str(i) for i in issues))
    if out_dir is None:
        out_dir = config.output_dir
    if out_dir is None:
        raise ConfigurationError(
            "no output directory: pass out_dir or set [output] directory")
    run_dir = Path(out_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()

    (run_dir / "config.ini").write_text(serialize_config(config),
                                        encoding="utf-8")

    jobs = [(config, str(run_dir), idx) for idx in range(config.realizations)]
    if workers > 1:
        with multiprocessing.Pool(processes=workers) as pool:
            results = pool.map(_realization_job, jobs, chunksize=1)
    else:
        results = [_realization_job(job) for job in jobs]
    results.sort(key=lambda t: t[0])

    payloads = {}
    failures = []
    data_files: list[str] = []
    for idx, payload in results:
        if "error" in payload:
            failures.append({"realization": idx, "error": payload["error"]})
        else:
            payloads[idx] = payload
            data_files.extend(payload["files"])
    ok_indices = sorted(payloads)
    if not ok_indices:
        raise TorusMatchError(
            "every realization failed; first error: "
            + failures[0]["error"] if failures else "no realizations ran")

    radii = config.radii()
    tails_dir = run_dir / "tails"
    tails_dir.mkdir(exist_ok=True)
    fits: dict[str, dict] = {}

    def fold_tail(samples: list[np.ndarray], grid: np.ndarray, label: str,
                  filename: str):
        tail = survival_from_samples(np.concatenate(samples), grid, label=label)
        tail, note = _fit_or_note(tail)
        write_tail_csv(tail, tails_dir / filename)
        data_files.append(f"tails/{filename}")
        summary = tail_summary(tail)
        if note is not None:
            summary["fit_error"] = note
        fits[label] = summary
        return tail

    match_tail = fold_tail([payloads[i]["construction"] for i in ok_indices],
                           radii, "construction", "tail_construction.csv")
    for name in config.baselines:
        fold_tail([payloads[i]["baselines"][name] for i in ok_indices],
                  radii, f"baseline-{name}", f"tail_baseline_{name}.csv")
    diam1_tail = fold_tail([payloads[i]["diam1"] for i in ok_indices],
                           radii / 2.0, "cell-diameter-1", "tail_diam_1.csv")
    diam2_tail = fold_tail([payloads[i]["diam2"] for i in ok_indices],
                           radii / 2.0, "cell-diameter-2", "tail_diam_2.csv")
    write_json(fits, run_dir / "fits.json")

    bound = two_sided_bound_check(match_tail, diam1_tail, diam2_tail)
    write_json(bound_report_summary(bound), run_dir / "bound_check.json")

    rows = []
    for idx in ok_indices:
        for r, sent, received in payloads[idx]["transport"]:
            rows.append([str(idx), fmt_float(r), str(sent), str(received)])
    write_csv(run_dir / "transport.csv",
              ["realization", "r", "sent", "received"], rows)
    data_files.append("transport.csv")

    witness_error = None
    if config.witness_enabled:
        try:
            pilot = [i for i in range(config.pilot_realizations) if i in payloads]
            if not pilot:
                raise TorusMatchError("no pilot realization succeeded")
            spans = np.concatenate([payloads[i]["max_span"] for i in pilot])
            widx = config.witness_realization
            spec = config.spec()
            pair = sample_conditioned_pair(spec, config.n, config.base_seed,
                                           realization=widx)
            allocate = _SCHEME_FN[config.scheme]
            field1 = allocate(pair.first)
            field2 = allocate(pair.second)
            graph = build_intersection_graph(field1, field2)
            witness, report = run_witness(
                graph, field1, field2, config.epsilon,
                r=config.witness_r, N=config.witness_N, D=config.witness_D,
                pilot_spans=spans)
            summary = witness_summary(witness, report)
            summary["realization"] = widx
            summary["pilot_realizations"] = pilot
            write_json(summary, run_dir / "witness.json")
            data_files.append("witness.json")
        except TorusMatchError as exc:
            witness_error = f"{type(exc).__name__}: {exc}"

    manifest = {
        "config_sha256": config_sha256(config),
        "rng_rule": RNG_RULE,
        "version": __version__,
        "workers": workers,
        "realizations_ok": len(ok_indices),
        "failures": failures,
        "witness_error": witness_error,
        "started_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ",
                                     time.gmtime(started)),
        "finished_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "duration_seconds": round(time.time() - started, 3),
        "files": {},
    }
    for rel in sorted(set(data_files)) + ["config.ini", "fits.json",
                                          "bound_check.json"]:
        manifest["files"][rel] = sha256_file(run_dir / rel)
    write_json(manifest, run_dir / "manifest.json")
    return RunResult(run_dir=run_dir, manifest=manifest)
