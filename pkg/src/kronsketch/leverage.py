"""
Exact, generalized and Johnson-Lindenstrauss leverage scores.

Infinite generalized scores (rows with a component in ker(B)) are IEEE
``+inf`` in the returned arrays.
"""
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .matrix import RANK_TOL, SparseRowMatrix, as_sparse_rows, gram, pseudoinverse, range_projector

KERNEL_TOL = 1e-8
C_JL = 4.0


def _quadratic_rows(A, M):
    """Row-wise ``a_i^T M a_i``."""
    X = A.csr @ M
    return np.asarray((A.csr.multiply(X)).sum(axis=1)).ravel()


def _row_norms(A):
    return np.sqrt(np.asarray(A.csr.multiply(A.csr).sum(axis=1)).ravel())


def exact_leverage(A, rank_tol=RANK_TOL):
    """sigma_i(A) = a_i^T (A^T A)^+ a_i."""
    A = as_sparse_rows(A)
    scores = _quadratic_rows(A, pseudoinverse(gram(A), rank_tol))
    return np.clip(scores, 0.0, None)


def kernel_residual(A, B, rank_tol=RANK_TOL):
    """Norm of the component of each row of A lying in ker(B)."""
    A, B = as_sparse_rows(A), as_sparse_rows(B)
    P = np.eye(B.n_cols) - range_projector(gram(B), rank_tol)
    R = A.csr @ P
    return np.linalg.norm(R, axis=1)


def generalized_leverage(A, B, kernel_tol=KERNEL_TOL, rank_tol=RANK_TOL):
    """
    Leverage of A's rows measured against B's Gram: a_i^T (B^T B)^+ a_i when
    a_i is orthogonal to ker(B) (relative residual within ``kernel_tol``),
    otherwise ``inf``. Scores may exceed 1.
    """
    A, B = as_sparse_rows(A), as_sparse_rows(B)
    if A.n_cols != B.n_cols:
        raise ValueError(f"column mismatch: A has {A.n_cols}, B has {B.n_cols}")
    G = gram(B)
    scores = np.clip(_quadratic_rows(A, pseudoinverse(G, rank_tol)), 0.0, None)
    resid = kernel_residual(A, B, rank_tol)
    scores[resid > kernel_tol * _row_norms(A)] = np.inf
    return scores


def jl_rows(n, eps, c_jl=C_JL):
    return max(1, math.ceil(c_jl * math.log2(max(n, 2)) / eps**2))


@dataclass(frozen=True)
class JLEstimator:
    C: np.ndarray
    Cprime: np.ndarray
    kernel_tol: float
    eps: float

    @property
    def jl_rows(self):
        return self.C.shape[0], self.Cprime.shape[0]

    @property
    def dim(self):
        return self.C.shape[1]


def _sign_matrix(rng, k, m):
    return (rng.integers(0, 2, size=(k, m)) * 2.0 - 1.0) / math.sqrt(k)


def jl_prepare(B, n_hint, eps, seed, c_jl=C_JL, kernel_tol=KERNEL_TOL, rank_tol=RANK_TOL):
    """
    Precompute C = Pi B (B^T B)^+ and C' = Pi' (I - (B^T B)(B^T B)^+) with
    random-sign sketches Pi, Pi' of ``ceil(c_jl * log2(n_hint) / eps^2)`` rows.
    """
    if not 0 < eps <= 1:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    if n_hint < 1:
        raise ValueError("n_hint must be positive")
    B = as_sparse_rows(B)
    D, d = B.shape
    k = jl_rows(n_hint, eps, c_jl)
    rng = np.random.default_rng(seed)
    Pi = _sign_matrix(rng, k, D)
    Pi_prime = _sign_matrix(rng, k, d)

    G = gram(B)
    G_pinv = pseudoinverse(G, rank_tol)
    kernel_proj = np.eye(d) - range_projector(G, rank_tol)
    PiB = np.asarray((B.csr.T @ Pi.T).T) if D else np.zeros((k, d))
    C = PiB @ G_pinv
    Cprime = Pi_prime @ kernel_proj
    return JLEstimator(C=C, Cprime=Cprime, kernel_tol=kernel_tol, eps=eps)


def jl_query(est, row):
    """Estimated generalized score of one row (dense vector, pairs list or sparse row)."""
    if isinstance(row, list):
        vec = np.zeros(est.dim)
        for j, v in row:
            vec[j] = v
        row = vec
    if sp.issparse(row):
        row = row.toarray()
    row = np.asarray(row, dtype=np.float64).reshape(1, -1)
    return float(jl_query_many(est, SparseRowMatrix(row))[0])


def jl_query_many(est, A, chunk=1 << 22):
    """Vectorized ``jl_query`` over every row of ``A``, in row blocks of about ``chunk`` projected entries."""
    A = as_sparse_rows(A)
    if A.n_cols != est.dim:
        raise ValueError(f"row has {A.n_cols} entries, estimator expects {est.dim}")
    scores = np.zeros(A.n_rows)
    norms = _row_norms(A)
    step = max(1, chunk // max(est.C.shape[0] + est.Cprime.shape[0], 1))
    for lo in range(0, A.n_rows, step):
        block = A.csr[lo:lo + step]
        Ca = np.asarray(block @ est.C.T)
        Cpa = np.asarray(block @ est.Cprime.T)
        part = np.einsum("ij,ij->i", Ca, Ca)
        part[np.linalg.norm(Cpa, axis=1) > est.kernel_tol * norms[lo:lo + step]] = np.inf
        scores[lo:lo + step] = part
    return scores
