"""Leverage-score spectral sketches of Kronecker products by repeated halving."""
from .halving import (
    DegenerateChainError,
    DiagonalSketch,
    HalvingChain,
    HalvingConfig,
    WeightedSample,
    apply_sketch,
    kron_repeated_halving,
    repeated_halving,
    sketched_gram,
    weighted_subsample,
)
from .leverage import (
    JLEstimator,
    exact_leverage,
    generalized_leverage,
    jl_prepare,
    jl_query,
    jl_query_many,
)
from .matrix import (
    NotPSDError,
    SparseRowMatrix,
    SpectralReport,
    eigenvalues_sym,
    gram,
    kronecker,
    pseudoinverse,
    spectral_check,
)
from .oracle import ProbList, QueryLedger, RowOracle, grover_find_all, sample_1d, sample_kd

__version__ = "0.1.0"
