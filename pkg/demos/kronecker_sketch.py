"""
Sketching a Kronecker product without forming it
================================================

"""

import numpy as np

from kronsketch import HalvingConfig, gram, kron_repeated_halving, sketched_gram, spectral_check
from kronsketch.generate import spiked_leverage

n, d = 2048, 4
A1, planted1 = spiked_leverage(n, d, seed=1)
A2, planted2 = spiked_leverage(n, d, seed=2)

# The product would have n^2 = 4M rows. Each factor gets its own halving run,
# and the sketch keeps pairs of kept factor rows.
D = kron_repeated_halving(A1, A2, eps=0.5, cfg=HalvingConfig(c_const=2.0, seed=3))
s1, s2 = D.factor_form
print("factor rows kept:", len(s1), len(s2), "-> pairs:", D.nnz, "of", n * n)

# Its Gram is the Kronecker product of the two factor Grams, so the check
# runs on a 16 x 16 problem.
G = np.kron(gram(A1), gram(A2))
rep = spectral_check(sketched_gram(D, A1, A2), G, 1.5)
print("distortion:", round(rep.measured_distortion, 4))

# High-leverage rows saturate at p = 1, so every planted pair survives.
wanted = (planted1[:, None] * n + planted2[None, :]).ravel()
print("planted pairs kept:", int(np.isin(wanted, D.indices).sum()), "of", len(wanted))

# Drawing pairs jointly by tree sampling instead gives a different
# set with the same per-pair probabilities.
J = kron_repeated_halving(A1, A2, eps=0.5, cfg=HalvingConfig(c_const=2.0, seed=3, final_sampler="joint"))
print("joint sampler pairs:", J.nnz)
