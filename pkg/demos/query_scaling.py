"""
Row queries against simulated quantum cost
==========================================

The simulator reads every row classically, so wall-clock time grows like n.
What is compared here is the ledger: classical row queries against the cost a
quantum sampler would be charged.
"""

import math

from kronsketch.cli import RunConfig, cmd_bench_scaling

n_list = [2**k for k in range(10, 19)]
res = cmd_bench_scaling(n_list, RunConfig(d=8, eps=0.5))
rows = res["rows"]

print(f"{'n':>8} {'classical':>10} {'quantum':>9} {'local slope':>11}")
for prev, row in zip([None] + rows, rows):
    slope = "" if prev is None else f"{math.log2(row['quantum_cost'] / prev['quantum_cost']):.3f}"
    print(f"{row['n']:>8} {row['classical_queries']:>10} {row['quantum_cost']:>9} {slope:>11}")

# At small n nearly every sampling probability is clipped to 1, so quantum cost
# grows almost linearly; the local slope falls toward one half as n grows.
print("fitted slopes over the sweep:", res["slopes"])
