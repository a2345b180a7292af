"""The ``arena`` command line: run one experiment, write CSV + figure.

Usage::

    arena <experiment> [--config cfg.json] [--seed N] [--trials N]
          [--out path.csv] [--workers N] [--force]
          [--emit-trials] [--emit-plotdata] [--no-plot]

Exit codes: 0 success, 2 configuration error, 3 infeasible scale without
``--force``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import (
    EXPERIMENTS,
    ConfigError,
    InfeasibleScaleError,
    check_scale,
    default_config,
    load_config_file,
)
from .output import write_csv, write_plotdata
from .runners import run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arena",
        description="forecasting-competition simulator: mechanism guarantees at desk scale",
    )
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="experiment")
    for exp in EXPERIMENTS:
        p = sub.add_parser(exp, help=f"run the {exp} experiment")
        p.add_argument("--config", type=Path, help="JSON config file (defaults built in)")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--trials", type=int, help="trial/path count override")
        p.add_argument("--out", type=Path, help="summary CSV path")
        p.add_argument("--workers", type=int, help="worker processes (default 1)")
        p.add_argument("--force", action="store_true", help="run past the scale cap")
        p.add_argument(
            "--emit-trials", action="store_true", help="also write per-trial CSV"
        )
        p.add_argument(
            "--emit-plotdata",
            action="store_true",
            help="write two-column .dat series next to the CSV",
        )
        p.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            cfg = load_config_file(args.config, args.experiment)
        else:
            cfg = default_config(args.experiment)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.trials is not None:
            cfg.trials = args.trials
        if args.workers is not None:
            cfg.workers = args.workers
        if args.out is not None:
            cfg.out = str(args.out)
        check_scale(cfg, args.force)
    except ConfigError as exc:
        print(f"arena: config error: {exc}", file=sys.stderr)
        return 2
    except InfeasibleScaleError as exc:
        print(f"arena: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"arena: config error: {exc}", file=sys.stderr)
        return 2

    result = run_experiment(cfg)

    out = Path(cfg.out) if cfg.out else Path("runs") / f"{cfg.experiment}_seed{cfg.seed}.csv"
    write_csv(out, result.columns, result.rows)
    print(f"wrote {out}")
    if args.emit_trials and result.trial_rows:
        trials_path = out.with_name(f"{out.stem}__trials.csv")
        write_csv(trials_path, result.trial_columns, result.trial_rows)
        print(f"wrote {trials_path}")
    if args.emit_plotdata and result.plotdata:
        for p in write_plotdata(out, result.plotdata):
            print(f"wrote {p}")
    if not args.no_plot:
        from .plots import render_figure

        print(f"wrote {render_figure(result, out)}")
    for row in result.rows:
        if "passed" in row and not row["passed"]:
            print(f"note: failed check in row: {row}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
