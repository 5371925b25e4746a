"""Command-line entry point: run / validate / report.

Exit codes: 0 success, 1 configuration error, 2 pipeline error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .allocation import SCHEMES
from .config import ExperimentConfig, apply_overrides, validate_config
from .errors import ConfigurationError, TorusMatchError
from .matching import POLICIES
from .pipeline import run_pipeline

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="torusmatch",
        description="Matchings between two point processes on a discretized "
                    "torus: allocations, fractional rounding, tail statistics.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute an experiment config")
    run.add_argument("--config", required=True, help="path to the INI config")
    run.add_argument("--out", default=None, help="output directory")
    run.add_argument("--workers", type=int, default=1,
                     help="parallel worker processes (default 1)")
    run.add_argument("--seed", type=int, default=None,
                     help="override the base seed")
    run.add_argument("--scheme", choices=SCHEMES, default=None,
                     help="override the allocation scheme")
    run.add_argument("--policy", choices=POLICIES, default=None,
                     help="override the rounding policy")

    val = sub.add_parser("validate", help="check a config file")
    val.add_argument("--config", required=True, help="path to the INI config")

    rep = sub.add_parser("report", help="summarize a finished run directory")
    rep.add_argument("--out", required=True, help="run directory to summarize")
    return parser


def _load_validated(path: str) -> ExperimentConfig:
    result = validate_config(path)
    if isinstance(result, list):
        for issue in result:
            print(f"config error - {issue}", file=sys.stderr)
        raise ConfigurationError(f"{len(result)} config violation(s)")
    return result


def _cmd_run(args) -> int:
    config = _load_validated(args.config)
    config = apply_overrides(config, seed=args.seed, scheme=args.scheme,
                             policy=args.policy, output_dir=args.out)
    issues = config.issues()
    if issues:
        for issue in issues:
            print(f"config error - {issue}", file=sys.stderr)
        return 1
    result = run_pipeline(config, workers=max(1, args.workers))
    m = result.manifest
    print(f"run complete: {result.run_dir}")
    print(f"  realizations ok: {m['realizations_ok']}, "
          f"failed: {len(m['failures'])}, "
          f"duration: {m['duration_seconds']}s")
    if m["failures"]:
        for f in m["failures"]:
            print(f"  realization {f['realization']} failed: {f['error']}",
                  file=sys.stderr)
    if m.get("witness_error"):
        print(f"  witness failed: {m['witness_error']}", file=sys.stderr)
    return 0


def _cmd_validate(args) -> int:
    config = _load_validated(args.config)
    print(f"config ok: d={config.d} L={config.L} G={config.G} n={config.n} "
          f"realizations={config.realizations} scheme={config.scheme} "
          f"policy={config.policy}")
    return 0


def _cmd_report(args) -> int:
    run_dir = Path(args.out)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.is_file():
        raise TorusMatchError(f"no manifest.json under {run_dir}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    print(f"run {run_dir}")
    print(f"  version {manifest['version']}, rng rule {manifest['rng_rule']}")
    print(f"  realizations ok {manifest['realizations_ok']}, "
          f"failures {len(manifest['failures'])}")
    fits_path = run_dir / "fits.json"
    if fits_path.is_file():
        fits = json.loads(fits_path.read_text(encoding="utf-8"))
        for label in sorted(fits):
            fit = fits[label].get("fit")
            if fit is None:
                print(f"  tail {label}: no fit ({fits[label].get('fit_error', 'window')})")
            else:
                print(f"  tail {label}: gamma={fit['gamma']:.3f} "
                      f"+/- {fit['stderr']:.3f}, c={fit['c']:.4g}, "
                      f"window [{fit['window_lo']:.3g}, {fit['window_hi']:.3g}] "
                      f"({fit['window_points']} pts)")
    bound_path = run_dir / "bound_check.json"
    if bound_path.is_file():
        bound = json.loads(bound_path.read_text(encoding="utf-8"))
        print(f"  two-sided bound: "
              f"{'pass' if bound['all_passed'] else 'FAIL'} "
              f"({len(bound['rows'])} gridpoints)")
    witness_path = run_dir / "witness.json"
    if witness_path.is_file():
        wit = json.loads(witness_path.read_text(encoding="utf-8"))
        print(f"  witness: density={wit['density']:.4f} "
              f"(epsilon={wit['params']['epsilon']}), |X|={wit['x_size']}, "
              f"violations={len(wit['violations'])}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "validate":
            return _cmd_validate(args)
        return _cmd_report(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except TorusMatchError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
