"""Command line interface for the closed-loop benchmark.

Subcommands::

    benchmark run    --algorithms rti,as-rti-a,... --scenarios 20 --seed 42 --out results.csv
    benchmark traces --algorithm as-rti-b-2 --scenario 0 --out traces.csv
    benchmark pareto --in results.csv --out pareto.csv

A JSON file passed via ``--config`` overrides model parameters, scenario
ranges, grids and tolerances (see :class:`asrti.benchmark.BenchmarkOptions`).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time

from .runner import (
    DEFAULT_ALGORITHMS,
    BenchmarkOptions,
    run_benchmark,
    run_traces,
    write_pareto_csv,
    write_results_csv,
    write_traces_csv,
)


def _load_options(args) -> BenchmarkOptions:
    options = BenchmarkOptions.from_json(args.config) if args.config else BenchmarkOptions()
    overrides = {}
    if getattr(args, "scenarios", None) is not None:
        overrides["n_scenarios"] = args.scenarios
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if overrides:
        options = dataclasses.replace(
            options, scenario=dataclasses.replace(options.scenario, **overrides)
        )
    return options


def _cmd_run(args):
    options = _load_options(args)
    algorithms = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    t0 = time.perf_counter()
    result = run_benchmark(algorithms, options=options, jobs=args.jobs)
    elapsed = time.perf_counter() - t0
    write_results_csv(result, args.out)
    header = f"{'algorithm':<12} {'prep[ms]':>9} {'fb[ms]':>8} {'subopt[%]':>10} {'1e3|g|':>8} {'|gradL|':>8} {'failed':>6}"
    print(header)
    for r in result.rows:
        print(
            f"{r.algorithm:<12} {r.max_prep_ms:>9.2f} {r.max_feedback_ms:>8.2f} "
            f"{r.rel_subopt_pct:>10.3f} {r.mean_g_norm_x1e3:>8.2f} "
            f"{r.mean_lagrange_grad:>8.2f} {r.failed_scenarios:>6d}"
        )
    print(f"# {options.scenario.n_scenarios} scenarios, {elapsed:.1f} s -> {args.out}")
    return 0


def _cmd_traces(args):
    options = _load_options(args)
    rows = run_traces(args.algorithm, args.scenario, options=options)
    write_traces_csv(rows, args.out)
    print(f"# {len(rows)} trace rows -> {args.out}")
    return 0


def _cmd_pareto(args):
    write_pareto_csv(args.results, args.out)
    print(f"# pareto data -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="benchmark", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run controllers over the scenario set")
    run_p.add_argument("--algorithms", default=",".join(DEFAULT_ALGORITHMS))
    run_p.add_argument("--scenarios", type=int, default=None)
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--out", default="results.csv")
    run_p.add_argument("--config", default=None, help="JSON file with option overrides")
    run_p.add_argument("--jobs", type=int, default=1, help="parallel scenario workers")
    run_p.set_defaults(func=_cmd_run)

    tr_p = sub.add_parser("traces", help="residual traces of one scenario run")
    tr_p.add_argument("--algorithm", required=True)
    tr_p.add_argument("--scenario", type=int, default=0)
    tr_p.add_argument("--seed", type=int, default=None)
    tr_p.add_argument("--out", default="traces.csv")
    tr_p.add_argument("--config", default=None)
    tr_p.set_defaults(func=_cmd_traces)

    pa_p = sub.add_parser("pareto", help="derive pareto CSV from a results CSV")
    pa_p.add_argument("--in", dest="results", required=True)
    pa_p.add_argument("--out", default="pareto.csv")
    pa_p.set_defaults(func=_cmd_pareto)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
