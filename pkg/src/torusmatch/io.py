"""Deterministic artifact writers: CSV (comma, '.' decimal, header row)
and JSON (sorted keys).

Floats are rendered with repr(), the shortest round-trip form, so a file's
bytes depend only on the values, never on locale, platform defaults, or
worker scheduling.  Every writer ends lines with a bare newline.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .allocation import AllocationField, CellStats
from .matching import IntersectionGraph, PerfectMatching
from .points import ConfigPair
from .tails import BoundCheckReport, TailEstimate
from .witness import PartitionWitness, WitnessReport

__all__ = [
    "fmt_float",
    "write_csv",
    "write_points_csv",
    "write_owner_csv",
    "write_cells_csv",
    "write_graph_csv",
    "write_matching_csv",
    "write_tail_csv",
    "write_json",
    "tail_summary",
    "bound_report_summary",
    "witness_summary",
    "sha256_file",
]


def fmt_float(x: float) -> str:
    return repr(float(x))


def write_csv(path: Path | str, header: list[str], rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_points_csv(pair: ConfigPair, path: Path | str) -> None:
    d = pair.spec.d
    header = ["process_label", "point_index"] + [f"x_{k}" for k in range(d)]
    rows = []
    for config in (pair.first, pair.second):
        for i in range(config.n):
            rows.append([str(config.label), str(i)]
                        + [fmt_float(v) for v in config.points[i]])
    write_csv(path, header, rows)


def write_owner_csv(field: AllocationField, path: Path | str) -> None:
    rows = ([str(s), str(int(o))] for s, o in enumerate(field.owner))
    write_csv(path, ["site_index", "owner"], rows)


def write_cells_csv(stats: CellStats, path: Path | str) -> None:
    rows = ([str(i), fmt_float(stats.diameters[i]), str(int(stats.counts[i]))]
            for i in range(stats.diameters.size))
    write_csv(path, ["point_index", "diameter", "count"], rows)


def write_graph_csv(graph: IntersectionGraph, path: Path | str) -> None:
    rows = ([str(int(l)), str(int(r)), str(int(w))]
            for l, r, w in zip(graph.left, graph.right, graph.weight))
    write_csv(path, ["left_index", "right_index", "weight"], rows)


def write_matching_csv(pm: PerfectMatching, path: Path | str) -> None:
    rows = ([str(i), str(int(pm.partner[i])), fmt_float(pm.distances[i])]
            for i in range(pm.n))
    write_csv(path, ["left_index", "right_index", "distance"], rows)


def write_tail_csv(tail: TailEstimate, path: Path | str) -> None:
    rows = ([fmt_float(r), fmt_float(s), str(tail.count), fmt_float(e)]
            for r, s, e in zip(tail.radii, tail.survival, tail.stderr))
    write_csv(path, ["r", "survival", "count", "stderr"], rows)


def write_json(obj, path: Path | str) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n",
                          encoding="utf-8")


def tail_summary(tail: TailEstimate) -> dict:
    """JSON-ready fit summary; fitted values are empirical surrogates, not
    ground-truth constants."""
    out = {
        "label": tail.label,
        "count": tail.count,
        "radii_min": float(tail.radii[0]),
        "radii_max": float(tail.radii[-1]),
        "fitted_values_are_empirical_surrogates": True,
    }
    if tail.fit is None:
        out["fit"] = None
    else:
        out["fit"] = {
            "gamma": tail.fit.gamma,
            "c": tail.fit.c,
            "stderr": tail.fit.stderr,
            "window_lo": tail.fit.window_lo,
            "window_hi": tail.fit.window_hi,
            "window_points": tail.fit.window_points,
            "method": tail.fit.method,
        }
    return out


def bound_report_summary(report: BoundCheckReport) -> dict:
    return {
        "all_passed": report.all_passed,
        "rows": [
            {"r": row.r, "lhs_match_at_2r": row.lhs, "rhs_bound": row.rhs,
             "margin": row.margin, "passed": row.passed}
            for row in report.rows
        ],
    }


def witness_summary(witness: PartitionWitness, report: WitnessReport) -> dict:
    p = witness.params
    return {
        "params": {"epsilon": p.epsilon, "r": p.r, "N": p.N, "D": p.D,
                   "d": p.d},
        "x_size": int(witness.x_indices.size),
        "x_indices": witness.x_indices.tolist(),
        "u1_size": int(witness.u1.sum()),
        "u2_size": int(witness.u2.sum()),
        "density": report.density,
        "density_ok": report.density_ok,
        "component_count": report.component_count,
        "components_single_class": report.components_single_class,
        "boundary_fraction": report.boundary_fraction,
        "boundary_bound": report.boundary_bound,
        "boundary_ok": report.boundary_ok,
        "x_separated": report.x_separated,
        "ball_containment_ok": report.ball_containment_ok,
        "violations": list(report.violations),
    }


def sha256_file(path: Path | str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()
