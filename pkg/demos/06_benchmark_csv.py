"""Reduced benchmark run producing the three CSV artifacts.

Runs a 5-scenario version of the closed-loop study (the full 20-scenario
table is the ``benchmark run`` CLI default) and emits results, Pareto and
residual-trace CSV files into the working directory.
"""

import dataclasses

from asrti.benchmark import (
    BenchmarkOptions,
    run_benchmark,
    run_traces,
    write_pareto_csv,
    write_results_csv,
    write_traces_csv,
)

options = BenchmarkOptions()
options = dataclasses.replace(
    options, scenario=dataclasses.replace(options.scenario, n_scenarios=5)
)

algorithms = ("rti", "as-rti-a", "as-rti-b-1", "as-rti-c-1", "as-rti-d-1", "sqp-2")
result = run_benchmark(algorithms, options=options, jobs=1)

print(f"{'algorithm':<12} {'prep ms':>8} {'fb ms':>7} {'subopt %':>9} {'1e3|g|':>8} {'|gradL|':>8}")
for r in result.rows:
    print(
        f"{r.algorithm:<12} {r.max_prep_ms:8.2f} {r.max_feedback_ms:7.2f} "
        f"{r.rel_subopt_pct:9.3f} {r.mean_g_norm_x1e3:8.2f} {r.mean_lagrange_grad:8.2f}"
    )

write_results_csv(result, "demo_results.csv")
write_pareto_csv("demo_results.csv", "demo_pareto.csv")
rows = run_traces("as-rti-b-2", 0, options=options)
write_traces_csv(rows, "demo_traces.csv")
print("\nwrote demo_results.csv, demo_pareto.csv, demo_traces.csv")
print("(full study: `benchmark run --scenarios 20 --seed 42 --out results.csv`)")
