"""Command-line interface.

Subcommands: ``run`` executes a campaign from a JSON config, ``verify``
cross-checks the trajectory solver against the exact oracle on a small
system, ``fit`` re-runs the scaling analysis on an existing bundle, and
``export`` collects the figure CSV data of a bundle into one directory.

Exit codes: 0 success, 1 validation error, 2 numerical failure,
3 verification mismatch.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import shutil
import sys
from pathlib import Path

from . import campaign as campaign_mod
from .analysis import UndefinedConductivityError
from .mcwf import IntegrationError, TrajectoryConfig
from .model import SpecError, SystemSpec
from .oracle import DegenerateSteadyStateError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_VERIFY_MISMATCH = 3


def _default_workers() -> int | None:
    env = os.environ.get("SPINFLUX_WORKERS")
    if env:
        return int(env)
    return os.cpu_count()


def _load_config(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _cmd_run(args) -> int:
    config = _load_config(args.config)
    camp = campaign_mod.campaign_from_config(config)
    if args.seed is not None:
        camp = dataclasses.replace(
            camp, trajectory=dataclasses.replace(camp.trajectory,
                                                 seed=args.seed))
    if args.output is not None:
        camp = dataclasses.replace(camp, output_dir=args.output)
    result = campaign_mod.run_campaign(camp, n_workers=args.workers)
    manifest = result["manifest"]
    print(f"campaign finished in {manifest['wall_time_s']:.1f}s; "
          f"{len(result['points'])} points, "
          f"{len(manifest['failures'])} failures")
    if manifest["failures"]:
        for h, msg in manifest["failures"].items():
            print(f"  point {h}: {msg}", file=sys.stderr)
        return EXIT_NUMERICAL
    if result["summary"] is not None:
        summary = result["summary"]
        print(f"classification: {summary.get('classification')}")
        if summary.get("kappa_infinity") is not None:
            print(f"kappa_infinity = {summary['kappa_infinity']:.6g} "
                  f"+- {summary['kappa_infinity_error']:.2g}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    config = _load_config(args.config)
    spec = SystemSpec(**config.get("system", {}))
    trajectory = TrajectoryConfig(**config.get("trajectory", {}))
    if args.seed is not None:
        trajectory = dataclasses.replace(trajectory, seed=args.seed)
    report = campaign_mod.verify(spec, trajectory,
                                 n_realizations=args.realizations,
                                 n_workers=args.workers)
    for row in report["rows"]:
        print(f"{row['observable']:>22}: {row['estimate']:+.6e} "
              f"+- {row['std_error']:.1e}  exact {row['exact']:+.6e}  "
              f"z = {row['z']:+.2f}")
    print(f"max |z| = {report['max_abs_z']:.2f} "
          f"({'ok' if report['ok'] else 'MISMATCH'})")
    return EXIT_OK if report["ok"] else EXIT_VERIFY_MISMATCH


def _read_bundle_points(bundle: Path) -> list[dict]:
    points_dir = bundle / "points"
    if not points_dir.is_dir():
        raise FileNotFoundError(f"no points/ directory under {bundle}")
    points = [json.loads(p.read_text())
              for p in sorted(points_dir.glob("*.json"))]
    if not points:
        raise FileNotFoundError(f"no completed points under {points_dir}")
    return points


def _cmd_fit(args) -> int:
    bundle = Path(args.bundle)
    points = _read_bundle_points(bundle)
    summary = campaign_mod.analyze_points(points, min_size=args.min_size)
    campaign_mod.write_analysis(bundle, summary)
    print(f"classification: {summary.get('classification')}")
    print(f"current_infinity = {summary['current_infinity']:.6g} "
          f"+- {summary['current_infinity_error']:.2g}")
    if summary.get("kappa_infinity") is not None:
        print(f"kappa_infinity = {summary['kappa_infinity']:.6g} "
              f"+- {summary['kappa_infinity_error']:.2g}")
    return EXIT_OK


def _cmd_export(args) -> int:
    bundle = Path(args.bundle)
    out = Path(args.output) if args.output else bundle / "figures"
    out.mkdir(parents=True, exist_ok=True)
    points = _read_bundle_points(bundle)
    n_copied = 0
    for p in sorted((bundle / "points").glob("*_profile.csv")):
        payload = json.loads(
            (bundle / "points" / f"{p.name[:-len('_profile.csv')]}.json").read_text())
        shutil.copy(p, out / f"profile_size_{payload['size']:03d}.csv")
        n_copied += 1
    for name in ("scaling_current.csv", "scaling_gradient.csv", "fits.json"):
        src = bundle / name
        if src.exists():
            shutil.copy(src, out / name)
            n_copied += 1
    print(f"exported {n_copied} figure files to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinflux",
        description="Stationary transport in boundary-driven spin chains "
                    "and ladders via quantum-jump trajectories.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scan campaign")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--workers", type=int, default=_default_workers())
    p_run.add_argument("--output", default=None)
    p_run.set_defaults(func=_cmd_run)

    p_verify = sub.add_parser("verify",
                              help="compare solver and oracle on a small system")
    p_verify.add_argument("--config", required=True)
    p_verify.add_argument("--seed", type=int, default=None)
    p_verify.add_argument("--realizations", type=int, default=32)
    p_verify.add_argument("--workers", type=int, default=_default_workers())
    p_verify.set_defaults(func=_cmd_verify)

    p_fit = sub.add_parser("fit", help="re-run analysis on an existing bundle")
    p_fit.add_argument("--bundle", required=True)
    p_fit.add_argument("--min-size", type=int, default=None)
    p_fit.set_defaults(func=_cmd_fit)

    p_export = sub.add_parser("export", help="collect figure CSVs of a bundle")
    p_export.add_argument("--bundle", required=True)
    p_export.add_argument("--output", default=None)
    p_export.set_defaults(func=_cmd_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SpecError, ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (IntegrationError, DegenerateSteadyStateError,
            UndefinedConductivityError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
