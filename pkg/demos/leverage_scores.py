"""
Leverage scores: exact, generalized and JL-estimated
=====================================================

"""

import numpy as np

from kronsketch import exact_leverage, generalized_leverage, jl_prepare, jl_query_many
from kronsketch.generate import spiked_leverage

# A Gaussian matrix with four planted rows of very large norm. Ordinary rows
# share the total leverage d evenly; the planted ones take almost all of their
# own direction.
A, planted = spiked_leverage(2048, 8, seed=0)
sigma = exact_leverage(A)
print("sum of scores (= rank):", round(sigma.sum(), 6))
print("planted rows:", planted, "scores:", np.round(sigma[planted], 4))
print("median score of the rest:", np.median(np.delete(sigma, planted)))

# Measuring against a subsample B instead of A itself can only raise scores.
rng = np.random.default_rng(1)
B = A.take_rows(np.sort(rng.choice(A.n_rows, 256, replace=False)))
sigma_B = generalized_leverage(A, B)
print("generalized >= exact everywhere:", bool(np.all(sigma_B >= sigma - 1e-9)))

# A row with a component outside the row space of B scores infinity.
flat = np.zeros((4, 3))
flat[:, :2] = rng.standard_normal((4, 2))
print("kernel row:", generalized_leverage(np.array([[0.0, 0.0, 1.0]]), flat))

# The JL estimator precomputes two short projections of B, after which each
# score is two small matrix-vector products.
est = jl_prepare(B, A.n_rows, eps=0.25, seed=2)
approx = jl_query_many(est, A)
ratio = approx / sigma_B
print("projection rows:", est.jl_rows)
print("fraction within 1 +- 0.25:", np.mean(np.abs(ratio - 1) <= 0.25))
