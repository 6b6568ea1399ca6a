"""
Repeated halving on one tall matrix
===================================

"""

import numpy as np

from kronsketch import HalvingConfig, RowOracle, gram, repeated_halving, sketched_gram, spectral_check
from kronsketch.generate import gaussian

# Every row read goes through the oracle and lands on its ledger.
A = gaussian(1 << 15, 8, seed=0)
oracle = RowOracle(A)
trace = []
D = repeated_halving(oracle, eps=0.5, cfg=HalvingConfig(c_const=2.0, seed=0), trace=trace)

# The chain halves the matrix down to about d rows, then climbs back up.
# At each level the rows are reweighted against the level below.
print(f"{'level':>5} {'|A_l|':>7} {'kept':>6}")
for rec in trace:
    print(f"{rec.level:>5} {len(rec.members):>7} {len(rec.sample):>6}")

rep = spectral_check(sketched_gram(D, A), gram(A), 0.5)
print("rows kept:", D.nnz, "of", A.n_rows)
print("distortion:", round(rep.measured_distortion, 4), "passes:", rep.passes)

# The ledger separates classical row reads from simulated quantum cost.
for label, (c, q) in oracle.ledger.breakdown.items():
    print(f"{label:>18}  classical {c:>7}  quantum {q:>7}")
