"""Command line front end.

    fairex run <scenario-file> [<scenario-file>...] [--set section.key=value]...
               [--out-base DIR] [--jobs N]
    fairex compare <dirA> <dirB> --metric <name>
    fairex montecarlo --depth D --fanout F --hedge H --iters N --seed S
               [--dist uniform|constant] [--hop-lo-us X] [--hop-hi-us Y]
               [--hop-const-us Z] [--out PATH]

Exit codes: 0 success, 1 a built-in scenario check failed, 2 invalid
configuration or arguments.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor

from .core import ConfigError
from .montecarlo import HedgeModel, dump_cdf_csv, run_model, summarize
from .runner import CheckFailure, compare_runs, run_scenario
from .scenario import load_scenario

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_CONFIG = 2


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fairex")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute scenario files")
    run.add_argument("scenarios", nargs="+", metavar="scenario-file")
    run.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="section.key=value",
        help="override a scenario key (repeatable; wins over file content)",
    )
    run.add_argument("--out-base", default="out", help="base directory for default output dirs")
    run.add_argument("--jobs", type=int, default=1, help="scenarios run in parallel processes")

    cmp_p = sub.add_parser("compare", help="percentile deltas between two run directories")
    cmp_p.add_argument("dir_a")
    cmp_p.add_argument("dir_b")
    cmp_p.add_argument("--metric", required=True)

    mc = sub.add_parser("montecarlo", help="emit a latency CDF for one (depth, fanout, hedge)")
    mc.add_argument("--depth", type=int, default=2)
    mc.add_argument("--fanout", type=int, default=10)
    mc.add_argument("--hedge", type=int, default=0)
    mc.add_argument("--iters", type=int, default=100_000)
    mc.add_argument("--seed", type=int, default=1)
    mc.add_argument("--dist", choices=("uniform", "constant"), default="uniform")
    mc.add_argument("--hop-lo-us", type=int, default=20)
    mc.add_argument("--hop-hi-us", type=int, default=80)
    mc.add_argument("--hop-const-us", type=int, default=50)
    mc.add_argument("--out", default="-", help="CDF CSV path, or - for stdout")
    return ap


def _run_one(path: str, overrides: list[str], out_base: str) -> str:
    scn = load_scenario(path, overrides)
    return run_scenario(scn, out_base)


def _cmd_run(args) -> int:
    try:
        if args.jobs > 1 and len(args.scenarios) > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                futs = [
                    pool.submit(_run_one, p, args.overrides, args.out_base)
                    for p in args.scenarios
                ]
                for path, fut in zip(args.scenarios, futs):
                    out = fut.result()
                    print(f"{path}: ok -> {out}")
        else:
            for path in args.scenarios:
                out = _run_one(path, args.overrides, args.out_base)
                print(f"{path}: ok -> {out}")
    except CheckFailure as e:
        print(f"check failed: {e}", file=sys.stderr)
        return EXIT_CHECK
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def _cmd_compare(args) -> int:
    try:
        deltas, sign = compare_runs(args.dir_a, args.dir_b, args.metric)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    print("metric,delta_p50,delta_p90,delta_p99,sign")
    print(f"{args.metric},{deltas['p50']},{deltas['p90']},{deltas['p99']},{sign}")
    return EXIT_OK


def _cmd_montecarlo(args) -> int:
    try:
        model = HedgeModel(
            depth=args.depth,
            fanout=args.fanout,
            hedge=args.hedge,
            dist=args.dist,
            hop_lo_us=args.hop_lo_us,
            hop_hi_us=args.hop_hi_us,
            hop_const_us=args.hop_const_us,
            iterations=args.iters,
            seed=args.seed,
        )
        summary = summarize(run_model(model))
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out == "-":
        print("latency_us,cum_prob")
        for lat, prob in summary.cdf:
            print(f"{lat:.3f},{prob:.4f}")
    else:
        dump_cdf_csv(args.out, summary)
        print(f"wrote {args.out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "compare":
        return _cmd_compare(args)
    return _cmd_montecarlo(args)


if __name__ == "__main__":
    sys.exit(main())
