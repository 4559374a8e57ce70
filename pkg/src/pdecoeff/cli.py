"""Command-line experiment driver.

Subcommands run increasing portions of the pipeline from a YAML config:

    solve     generate synthetic data, write the clean snapshot container
    sample    sample (and optionally noise/filter), write snapshots + CSV
    recover   full recovery, write solution and field/error CSVs
    diagnose  separability and conditioning reports
    run       everything above plus a run manifest
    sweep     repeat recovery across degree / noise / method values

Exit codes: 0 success, 2 config validation, 3 solver instability,
4 non-unique recovery, 5 I/O failure.  The default output root is taken
from $PDECOEFF_OUT when --out is not given.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .data_pipeline import export_snapshot_csv, sample, save_snapshots
from .experiments import ConfigError, ExperimentConfig, _Stage, run_experiment, run_sweep
from .forward_solver import UnstableSolveError
from .recovery import NonUniqueSolutionError

EXIT_VALIDATION = 2
EXIT_UNSTABLE = 3
EXIT_NON_UNIQUE = 4
EXIT_IO = 5


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdecoeff",
        description="Recover advection/diffusion coefficient fields from snapshot data.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "sample", "recover", "diagnose", "run"):
        p = sub.add_parser(name)
        _common_flags(p)
    p = sub.add_parser("sweep")
    _common_flags(p)
    p.add_argument("--parameter", choices=("degree", "noise", "method"), required=True)
    return parser


def _common_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", required=True, help="YAML experiment config")
    p.add_argument("--scale", type=float, default=1.0,
                   help="divide grid sizes and sample counts by this factor")
    p.add_argument("--jobs", type=int, default=1, help="concurrent sweep points")
    p.add_argument("--seed", type=int, default=None, help="override all pipeline seeds")
    p.add_argument("--out", default=None, help="output directory")


def _load_config(args) -> tuple:
    cfg = ExperimentConfig.from_yaml(args.config)
    cfg.apply_scale(args.scale)
    if args.seed is not None:
        cfg.override_seed(args.seed)
    out = args.out or cfg.out_dir or os.environ.get("PDECOEFF_OUT", "out")
    out_dir = Path(out) / Path(args.config).stem if args.out is None and cfg.out_dir is None \
        else Path(out)
    return cfg, out_dir


def _fail(out_dir: Path, code: int, exc: Exception) -> int:
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "error.json", "w") as fh:
            json.dump(record, fh, indent=2, sort_keys=True)
    except OSError:
        pass
    print(json.dumps(record), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg, out_dir = _load_config(args)
    except (ConfigError, FileNotFoundError, KeyError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc),
                          "exit_code": EXIT_VALIDATION}), file=sys.stderr)
        return EXIT_VALIDATION

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "solve":
            stage = _Stage(cfg)
            full = sample(stage.traj, stage.master, stage.master.size, stage.interior,
                          stage.boundary, seed=cfg.sample_seed)
            save_snapshots(full, out_dir / "snapshots.bin")
            export_snapshot_csv(full, out_dir / "snapshots.csv")
        elif args.command == "sample":
            stage = _Stage(cfg)
            snaps, _ = stage.snapshots_and_derivatives(
                cfg.epsilon, cfg.filter_enabled, include_interior=False)
            save_snapshots(snaps, out_dir / "snapshots.bin")
            export_snapshot_csv(snaps, out_dir / "snapshots.csv")
        elif args.command in ("recover", "diagnose", "run"):
            run_experiment(cfg, out_dir)
        elif args.command == "sweep":
            run_sweep(cfg, args.parameter, out_dir, jobs=args.jobs)
    except ConfigError as exc:
        return _fail(out_dir, EXIT_VALIDATION, exc)
    except KeyError as exc:
        return _fail(out_dir, EXIT_VALIDATION, exc)
    except UnstableSolveError as exc:
        return _fail(out_dir, EXIT_UNSTABLE, exc)
    except NonUniqueSolutionError as exc:
        return _fail(out_dir, EXIT_NON_UNIQUE, exc)
    except OSError as exc:
        return _fail(out_dir, EXIT_IO, exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
