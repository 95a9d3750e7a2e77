"""Command-line entry point: ``laseruav {plan, reproduce-table2, sweep}``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import RunConfig, load_config
from .errors import ConfigParseError, Infeasible, LaserUavError, ValidationError
from .experiments import (
    cmd_plan, cmd_reproduce_table2, cmd_sweep, format_table, sweep_filename, waypoint_rows,
    write_csv,
)
from .scenario import Perspective

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_INFEASIBLE = 5

_PLAN_COLUMNS = ("approach", "feasible", "route", "rest_building", "delta", "rest", "t_total",
                 "eta1", "eta2", "eta3", "E_fl", "E_hv", "E_harv", "note")
_TABLE2_COLUMNS = ("t_max", "perspective", "delta", "ref_delta", "delta_rel_dev", "t_total",
                   "ref_t_total", "eta1", "eta2", "eta3", "eta_abs_dev_pp", "note")
_SWEEP_COLUMNS = ("value", "feasible", "delta", "rest", "t_total", "eta1", "eta2", "eta3",
                  "E_fl", "E_hv", "E_harv", "zeta", "note")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML config file (defaults if omitted)")
    common.add_argument("--perspective", choices=[p.value for p in Perspective],
                        help="state-of-charge perspective (overrides the config)")
    common.add_argument("--out", type=Path, help="output directory (overrides the config)")
    common.add_argument("--workers", type=int, help="parallel workers for sweeps")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="laseruav",
                                 description="Laser-charged UAV mission planning experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("plan", parents=[common], help="optimal plan and benchmark trajectories")
    sub.add_parser("reproduce-table2", parents=[common],
                   help="direct-path perspective comparison against stored reference values")
    sub.add_parser("sweep", parents=[common], help="run the config's parameter sweep")
    return ap


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    changes = {}
    if args.perspective:
        changes["perspective"] = Perspective(args.perspective)
    if args.out:
        changes["output_dir"] = args.out
    if args.workers is not None:
        if args.workers < 1:
            raise ValidationError([f"--workers must be >= 1 (got {args.workers})"])
        changes["workers"] = args.workers
    return replace(cfg, **changes)


def run(args) -> int:
    cfg = resolve_config(args)
    out = Path(cfg.output_dir)
    if args.command == "plan":
        report = cmd_plan(cfg)
        paths = [write_csv(out / "plan.csv", report.rows),
                 write_csv(out / "plan_waypoints.csv", waypoint_rows(report))]
        print(f"chosen plan: {report.chosen} ({cfg.perspective.value} perspective)")
        print(format_table(report.rows, _PLAN_COLUMNS))
        print("\nwaypoints:")
        print(format_table(waypoint_rows(report)))
    elif args.command == "reproduce-table2":
        rows = cmd_reproduce_table2(cfg)
        paths = [write_csv(out / "table2.csv", rows)]
        print(format_table(rows, _TABLE2_COLUMNS))
    else:
        if cfg.sweep is None:
            raise ValidationError(["sweep: the config has no sweep section"])
        rows = cmd_sweep(cfg)
        paths = [write_csv(out / sweep_filename(cfg.sweep), rows)]
        print(f"sweep over {cfg.sweep.variable} ({cfg.sweep.approach}, "
              f"{cfg.perspective.value} perspective)")
        print(format_table(rows, _SWEEP_COLUMNS))
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except ConfigParseError as exc:
        print(f"config parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print("invalid configuration:", file=sys.stderr)
        for p in exc.problems:
            print(f"  - {p}", file=sys.stderr)
        return EXIT_VALIDATION
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (LaserUavError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
