"""
Seeded experiment tables and rate fits
======================================

The harness runs grids of independent cells and writes a CSV plus a JSON
summary. The same runs are available from the command line as
``prw convergence ...`` and ``prw rate-fit ...``.
"""

import os
import tempfile

from prw import ExperimentConfig, fit_rate, run_experiment

config = ExperimentConfig(experiment="convergence", dv_pairs=[(10, 1.0)], k=[2],
                          n_grid=[20, 50, 100, 200], runs=5, n_proj=20, seed=0)
table = run_experiment(config)

for s in table.summary():
    print(f"{s['params']:>14} n={s['n']:<4d} {s['metric']:<5} mean={s['mean']:.4f} std={s['std']:.4f}")

for metric in ("iprw", "prw"):
    rate = fit_rate(table, metric)
    print(f"{metric}: log-log slope {rate.slope:.3f} (r2 {rate.r2:.3f})")

out = os.path.join(tempfile.mkdtemp(), "convergence.csv")
print("summary written to", table.write(out, config))
