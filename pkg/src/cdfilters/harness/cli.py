"""Command line: ``cdfilters {simulate,estimate,benchmark}``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from ..errors import EstimationError
from ..filters import FILTER_KINDS
from .config import load_config
from .experiment import (
    output_path,
    read_trajectory_csv,
    run_benchmark,
    run_estimation,
    run_simulation,
    write_record_csv,
    write_trajectory_csv,
)


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment file (default: the built-in four-tank setup)")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", default=".", help="output directory (default: current)")

    p = argparse.ArgumentParser(prog="cdfilters", description="Continuous-discrete filter experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="write truth and measurements to simulation.csv")
    est = sub.add_parser("estimate", parents=[common], help="run one filter and write estimate_<filter>.csv")
    est.add_argument("--filter", required=True, choices=FILTER_KINDS)
    est.add_argument("--measurements", help="simulation CSV to filter (default: simulate with the seed)")
    bench = sub.add_parser("benchmark", parents=[common], help="run all filters and write benchmark.csv")
    bench.add_argument("--reps", type=int, help="number of seeds (default: configured)")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.command == "simulate":
            path = output_path(args.out, "simulation.csv")
            write_trajectory_csv(path, run_simulation(cfg))
        elif args.command == "estimate":
            traj = read_trajectory_csv(args.measurements) if args.measurements else run_simulation(cfg)
            rec = run_estimation(cfg, traj.y, args.filter, truth=traj.x)
            path = output_path(args.out, f"estimate_{args.filter}.csv")
            write_record_csv(path, rec)
            print(
                f"{args.filter}: TU {rec.tu_time:.3g} s, MU {rec.mu_time:.3g} s, "
                f"MAPE_x {rec.mape_x:.3g} %, MAPE_d {rec.mape_d:.3g} %"
            )
        else:
            result = run_benchmark(cfg, reps=args.reps)
            path = output_path(args.out, "benchmark.csv")
            result.write_csv(path)
            for label, cells in result.table():
                print(f"{label:<14}" + "".join(f"{k:>6} {cells[k][0]:<11.4g}" for k in result.kinds))
    except (EstimationError, ValueError, OSError) as exc:
        print(f"cdfilters: error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0
