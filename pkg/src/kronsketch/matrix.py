"""
Row-sparse matrices, Kronecker algebra, Gram/pseudoinverse routines and the
Loewner-order check used to verify every sketch produced by this package.

Dense symmetric matrices (Grams, pseudoinverses) are plain ``numpy.ndarray``
objects; they are symmetrized on construction.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

RANK_TOL = 1e-10

# index space above this cannot be addressed by int64 row/column indices
_MAX_INDEX = np.iinfo(np.int64).max


class NotPSDError(ValueError):
    pass


class SparseRowMatrix:
    """
    Real n-by-d matrix stored row-wise (canonical CSR: sorted column indices
    within each row, no explicit zeros).

    Wraps a ``scipy.sparse.csr_array``; construct from anything scipy or numpy
    understands as a 2-D matrix.
    """

    def __init__(self, data, shape=None):
        if sp.issparse(data):
            csr = sp.csr_array(data, dtype=np.float64)
        else:
            arr = np.asarray(data, dtype=np.float64)
            if arr.ndim != 2:
                if shape is not None and arr.size == 0:
                    arr = np.zeros(shape)
                else:
                    raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
            csr = sp.csr_array(arr)
        if shape is not None and tuple(csr.shape) != tuple(shape):
            csr = sp.csr_array(csr, shape=shape)
        csr.eliminate_zeros()
        csr.sort_indices()
        csr.sum_duplicates()
        self._csr = csr

    @classmethod
    def from_rows(cls, rows, n_cols):
        """Build from a list of ``[(col, value), ...]`` per row."""
        indptr = [0]
        indices, values = [], []
        for row in rows:
            for j, v in sorted(row):
                if not 0 <= j < n_cols:
                    raise ValueError(f"column index {j} out of range for {n_cols} columns")
                indices.append(j)
                values.append(v)
            indptr.append(len(indices))
        csr = sp.csr_array(
            (np.asarray(values, dtype=np.float64), np.asarray(indices, dtype=np.int64),
             np.asarray(indptr, dtype=np.int64)),
            shape=(len(rows), n_cols),
        )
        return cls(csr)

    @property
    def csr(self):
        return self._csr

    @property
    def shape(self):
        return self._csr.shape

    @property
    def n_rows(self):
        return self._csr.shape[0]

    @property
    def n_cols(self):
        return self._csr.shape[1]

    @property
    def nnz(self):
        return self._csr.nnz

    @property
    def row_sparsity(self):
        """Maximum number of nonzeros in any row (0 for an empty matrix)."""
        if self.n_rows == 0:
            return 0
        return int(np.diff(self._csr.indptr).max())

    def row(self, i):
        """Row ``i`` as a list of ``(column, value)`` pairs."""
        lo, hi = self._csr.indptr[i], self._csr.indptr[i + 1]
        return list(zip(self._csr.indices[lo:hi].tolist(), self._csr.data[lo:hi].tolist()))

    def take_rows(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return SparseRowMatrix(self._csr[idx], shape=(len(idx), self.n_cols))

    def scale_rows(self, scales):
        scales = np.asarray(scales, dtype=np.float64)
        return SparseRowMatrix(sp.diags_array(scales) @ self._csr, shape=self.shape)

    def toarray(self):
        return self._csr.toarray()

    def __matmul__(self, other):
        other = other.csr if isinstance(other, SparseRowMatrix) else other
        out = self._csr @ other
        return SparseRowMatrix(out) if sp.issparse(out) else out

    def __repr__(self):
        return f"SparseRowMatrix(shape={self.shape}, nnz={self.nnz}, r={self.row_sparsity})"


def as_sparse_rows(A):
    return A if isinstance(A, SparseRowMatrix) else SparseRowMatrix(A)


def kronecker(A, B):
    """
    Kronecker product with row-major pairing: row ``i1 * n_B + i2`` and column
    ``j1 * d_B + j2`` (0-based) hold ``A[i1, j1] * B[i2, j2]``.
    """
    A, B = as_sparse_rows(A), as_sparse_rows(B)
    n = A.n_rows * B.n_rows
    d = A.n_cols * B.n_cols
    if n > _MAX_INDEX or d > _MAX_INDEX or (A.nnz and B.nnz and A.nnz * B.nnz > _MAX_INDEX):
        raise OverflowError(f"Kronecker product of {A.shape} and {B.shape} exceeds the index space")
    return SparseRowMatrix(sp.kron(A.csr, B.csr, format="csr"), shape=(n, d))


def symmetrize(M):
    M = np.asarray(M, dtype=np.float64)
    return 0.5 * (M + M.T)


def gram(A):
    """A^T A as a dense symmetric matrix."""
    A = as_sparse_rows(A)
    G = (A.csr.T @ A.csr)
    G = G.toarray() if sp.issparse(G) else np.asarray(G)
    return symmetrize(G)


def eigenvalues_sym(M):
    """Ascending eigenvalues of a symmetric matrix (LAPACK ``syevd``)."""
    M = np.asarray(M, dtype=np.float64)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    if M.size == 0:
        return np.zeros(0)
    return np.linalg.eigh(symmetrize(M))[0]


def _eigh_psd(M, rank_tol):
    M = symmetrize(M)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    lam, U = np.linalg.eigh(M)
    scale = max(float(np.abs(lam).max()) if lam.size else 0.0, 0.0)
    if lam.size and lam[0] < -rank_tol * scale:
        raise NotPSDError(f"matrix has eigenvalue {lam[0]:.3e} below -{rank_tol:g} * {scale:.3e}")
    keep = lam > rank_tol * scale
    return lam, U, keep


def pseudoinverse(M, rank_tol=RANK_TOL):
    """
    Moore-Penrose inverse of a symmetric PSD matrix via its eigendecomposition.
    Eigenvalues at or below ``rank_tol * lambda_max`` are treated as zero.
    """
    lam, U, keep = _eigh_psd(M, rank_tol)
    Ur = U[:, keep]
    return symmetrize((Ur / lam[keep]) @ Ur.T)


def range_projector(M, rank_tol=RANK_TOL):
    """Orthogonal projector onto range(M) for symmetric PSD ``M``."""
    lam, U, keep = _eigh_psd(M, rank_tol)
    Ur = U[:, keep]
    return symmetrize(Ur @ Ur.T)


def numeric_rank(M, rank_tol=RANK_TOL):
    return int(_eigh_psd(M, rank_tol)[2].sum())


@dataclass(frozen=True)
class SpectralReport:
    passes: bool
    measured_distortion: float
    min_eig_lower: float
    min_eig_upper: float


def spectral_check(P, Q, eps, rank_tol=RANK_TOL):
    """
    Test ``(1 - eps) Q <= P <= (1 + eps) Q`` in the Loewner order.

    ``measured_distortion`` is the smallest eps for which the bound holds:
    the largest ``|mu - 1|`` over generalized eigenvalues ``mu`` of (P, Q) on
    range(Q), or ``inf`` when P has mass outside range(Q).
    """
    P, Q = symmetrize(P), symmetrize(Q)
    if P.shape != Q.shape or P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError(f"dimension mismatch: {P.shape} vs {Q.shape}")

    lamQ, U, keep = _eigh_psd(Q, rank_tol)
    lam_max = float(lamQ.max()) if lamQ.size else 0.0
    tol = 1e-9 * (1.0 + lam_max)

    lower = eigenvalues_sym(P - (1.0 - eps) * Q)
    upper = eigenvalues_sym((1.0 + eps) * Q - P)
    min_lower = float(lower[0]) if lower.size else 0.0
    min_upper = float(upper[0]) if upper.size else 0.0
    passes = min_lower >= -tol and min_upper >= -tol

    Ur, Un = U[:, keep], U[:, ~keep]
    if Un.shape[1] and np.abs(eigenvalues_sym(Un.T @ P @ Un)).max(initial=0.0) > tol:
        distortion = np.inf
    elif Ur.shape[1] == 0:
        distortion = 0.0
    else:
        W = Ur / np.sqrt(lamQ[keep])
        mu = eigenvalues_sym(W.T @ P @ W)
        distortion = float(np.abs(mu - 1.0).max())
    return SpectralReport(bool(passes), distortion, min_lower, min_upper)
