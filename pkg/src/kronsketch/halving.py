"""
Repeated halving: leverage-score row sampling for a single matrix and for a
Kronecker product A1 (x) A2, driven through the row-query oracle so that
every sampling step is charged on the ledger.

Outline of one run on an n-by-d matrix A:

1. A chain A = A_0 ⊇ A_1 ⊇ ... ⊇ A_L, L = ceil(log2(n / d)), where a row
   survives to level l iff l pseudorandom fair coins all come up heads. It is
   never materialized; membership is evaluated on demand.
2. The bottom level A_L is found by a (simulated) search and B_L = A_L.
3. For l = L-1, ..., 1: rows of A_l are reweighted by JL-estimated generalized
   leverage scores against B_{l+1} and subsampled at accuracy 1/2, giving B_l.
4. The same step on A itself against B_1 at the requested accuracy gives the
   output sample.

For the Kronecker product the two factor chains are independent and the
output keeps every pair of rows of the two final factor samples.
"""
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .leverage import C_JL, KERNEL_TOL, jl_prepare, jl_query_many
from .matrix import SparseRowMatrix, as_sparse_rows, gram, kronecker
from .oracle import ProbList, RowOracle, sample_1d, sample_kd, grover_find_all, prf_bits

LEVEL_EPS = 0.5
MAX_ATTEMPTS = 3


class DegenerateChainError(RuntimeError):
    pass


@dataclass(frozen=True)
class HalvingConfig:
    """
    ``c_const`` is the oversampling constant in p_i = min(1, c w_i log2(d) / eps^2).
    ``jl_eps`` is the accuracy of the JL score estimates; weights are
    2 * estimate / (1 - jl_eps) so that they land in [2 sigma, 4 sigma] when
    jl_eps = 1/3.
    ``final_sampler`` selects how the Kronecker output is drawn: ``"factor"``
    keeps all pairs of the two factor samples, ``"joint"`` draws each pair
    independently with the product probability (tree sampling).
    """
    c_const: float = 8.0
    c_jl: float = C_JL
    jl_eps: float = 1.0 / 3.0
    kernel_tol: float = KERNEL_TOL
    seed: int = 0
    final_sampler: str = "factor"

    def __post_init__(self):
        if not self.c_const > 1:
            raise ValueError(f"c_const must exceed 1, got {self.c_const}")
        if not 0 < self.jl_eps < 1:
            raise ValueError(f"jl_eps must lie in (0, 1), got {self.jl_eps}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.final_sampler not in ("factor", "joint"):
            raise ValueError(f"unknown final_sampler {self.final_sampler!r}")


def subseed(seed, *tags):
    """Deterministic child seed for a named sub-stream."""
    words = [seed] + [t if isinstance(t, int) else sum(map(ord, t)) * 131 + len(t) for t in tags]
    return int(np.random.SeedSequence(words).generate_state(1, np.uint64)[0])


def chain_depth(n, d):
    return max(1, math.ceil(math.log2(n / d)))


@dataclass(frozen=True)
class HalvingChain:
    n: int
    L: int
    seed: int

    def membership(self, level, idx):
        idx = np.asarray(idx, dtype=np.int64)
        keep = np.ones(idx.shape, dtype=bool)
        for stream in range(1, level + 1):
            keep &= prf_bits(self.seed, stream, idx)
        return keep

    def members(self, level):
        return np.flatnonzero(self.membership(level, np.arange(self.n)))


@dataclass
class WeightedSample:
    """Rows kept by one weighted subsampling pass, with their scales 1/sqrt(p)."""
    rows: np.ndarray
    probs: np.ndarray
    source_n: int
    eps: float
    c_const: float
    B: SparseRowMatrix = field(repr=False, default=None)
    domain_probs: np.ndarray = field(repr=False, default=None)

    @property
    def mass(self):
        """Expected number of kept rows, sum of p over the sampled domain."""
        return float(self.domain_probs.sum())

    @property
    def scales(self):
        return 1.0 / np.sqrt(self.probs)

    def __len__(self):
        return len(self.rows)


def sample_probabilities(w, eps, c_const, d):
    """p = min(1, c w log2(d) / eps^2); infinite weights give p = 1."""
    w = np.asarray(w, dtype=np.float64)
    log_d = math.log2(max(d, 2))
    with np.errstate(invalid="ignore", over="ignore"):
        p = np.minimum(1.0, c_const * w * log_d / eps**2)
    p[np.isinf(w)] = 1.0
    return p


def _check_weights(w):
    if np.any(np.isnan(w)) or np.any(w < 0):
        raise ValueError("weights must be non-negative")
    if len(w) and not np.any(w > 0):
        raise ValueError("weight vector is identically zero")


def weighted_subsample(oracle, w, eps, c_const, seed, domain=None):
    """
    Keep row i of the oracle's matrix with probability
    p_i = min(1, c w_i log2(d) / eps^2), rescaled by 1/sqrt(p_i).

    ``w`` is either an array of weights aligned with ``domain`` or a callable
    taking the queried rows (a ``SparseRowMatrix``) and returning their
    weights. Each domain row is queried once; kept rows are taken from that
    read. ``domain`` restricts sampling to a subset of rows, and the sampling
    list has one entry per domain row.
    """
    if not 0 < eps <= 1:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    if not c_const > 1:
        raise ValueError(f"c_const must exceed 1, got {c_const}")
    n, d = oracle.shape
    domain = np.arange(n) if domain is None else np.asarray(domain, dtype=np.int64)
    read = {}

    def probs_at(pos):
        block = oracle.rows(domain[pos])
        read["block"], read["pos"] = block, pos
        weights = w(block) if callable(w) else np.asarray(w, dtype=np.float64)[pos]
        weights = np.asarray(weights, dtype=np.float64)
        _check_weights(weights)
        return sample_probabilities(weights, eps, c_const, d)

    plist = ProbList(len(domain), probs_at)
    pos, probs = sample_1d(plist, oracle.ledger, seed)
    # sample_1d evaluates the full list in one pass, so the block is aligned with [0, len(domain))
    B = read["block"].take_rows(pos).scale_rows(1.0 / np.sqrt(probs)) if "block" in read else oracle.matrix.take_rows(pos)
    return WeightedSample(rows=domain[pos], probs=probs, source_n=n, eps=eps, c_const=c_const, B=B,
                          domain_probs=plist.last_values)


def leverage_weights(B, n_hint, cfg, seed, record=None):
    """
    Weight function over queried rows: min(1, 2 * est / (1 - jl_eps)) where
    est is the JL estimate of the generalized score against ``B``.
    """
    est = jl_prepare(B, n_hint, cfg.jl_eps, seed, c_jl=cfg.c_jl, kernel_tol=cfg.kernel_tol)

    def w(rows):
        sigma = jl_query_many(est, rows)
        w_tilde = 2.0 * sigma / (1.0 - cfg.jl_eps)
        if record is not None:
            record["w_tilde"] = w_tilde
        return np.minimum(1.0, w_tilde)

    return w


@dataclass
class LevelRecord:
    """Diagnostics for one level of a halving ascent."""
    level: int
    members: np.ndarray
    sample: WeightedSample
    w_tilde: np.ndarray = None
    reference: SparseRowMatrix = field(repr=False, default=None)


def _build_chain(n, d, seed, tag):
    L = chain_depth(n, d)
    for attempt in range(MAX_ATTEMPTS):
        chain = HalvingChain(n=n, L=L, seed=subseed(seed, tag, "chain", attempt))
        if chain.membership(L, np.arange(n)).any():
            return chain
    raise DegenerateChainError(f"halving chain bottom empty after {MAX_ATTEMPTS} reseeds (seed={seed})")


def _ascend(oracle, cfg, tag, trace=None):
    """Build the chain and climb to B_1. Returns the level-1 approximation."""
    n, d = oracle.shape
    ledger = oracle.ledger
    chain = _build_chain(n, d, cfg.seed, tag)
    L = chain.L

    with ledger.phase("chain-bottom"):
        bottom = grover_find_all(lambda idx: chain.membership(L, idx), n, ledger, m_hint=n / 2**L)
        B = oracle.rows(bottom)
    if trace is not None:
        ones = np.ones(len(bottom))
        trace.append(LevelRecord(L, bottom, WeightedSample(bottom, ones, n, 1.0, cfg.c_const, B, ones)))

    for level in range(L - 1, 0, -1):
        members = chain.members(level)
        record = {}
        with ledger.phase(f"halving-level-{level}"):
            w = leverage_weights(B, len(members), cfg, subseed(cfg.seed, tag, "jl", level), record)
            sample = weighted_subsample(oracle, w, LEVEL_EPS, cfg.c_const,
                                        subseed(cfg.seed, tag, "sample", level), domain=members)
        if trace is not None:
            trace.append(LevelRecord(level, members, sample, record.get("w_tilde"), B))
        B = sample.B
    return chain, B


def _final_weights(oracle, B1, cfg, tag, record=None):
    n = oracle.shape[0]
    return leverage_weights(B1, n, cfg, subseed(cfg.seed, tag, "jl", 0), record)


class DiagonalSketch:
    """
    Sparse diagonal sampling-and-rescaling matrix over an index space of size
    ``space_n`` (n for one matrix, n1 * n2 for a Kronecker product).

    A Kronecker sketch built from two factor samples stores only the factors;
    its diagonal entries are the pairs ``(i * n2 + j, s1_i * s2_j)`` and are
    generated on first access.
    """

    def __init__(self, space_n, indices=None, scales=None, probs=None, factor_form=None, factor_n=None):
        self.space_n = int(space_n)
        self.factor_form = factor_form
        self.factor_n = factor_n
        self.factor_probs = None
        if factor_form is None:
            indices = np.asarray(indices, dtype=np.int64)
            order = np.argsort(indices, kind="stable")
            self.__dict__["indices"] = indices[order]
            self.__dict__["scales"] = np.asarray(scales, dtype=np.float64)[order]
            self.__dict__["probs"] = None if probs is None else np.asarray(probs, dtype=np.float64)[order]
            if len(indices) and (indices.min() < 0 or indices.max() >= self.space_n):
                raise IndexError("sketch index outside the index space")

    @classmethod
    def identity(cls, n):
        return cls(n, np.arange(n), np.ones(n), np.ones(n))

    @classmethod
    def from_sample(cls, sample):
        return cls(sample.source_n, sample.rows, sample.scales, sample.probs)

    @classmethod
    def from_factors(cls, s1, s2):
        return cls(s1.source_n * s2.source_n, factor_form=(s1, s2), factor_n=(s1.source_n, s2.source_n))

    @property
    def nnz(self):
        if self.factor_form is not None:
            return len(self.factor_form[0]) * len(self.factor_form[1])
        return len(self.indices)

    @cached_property
    def indices(self):
        s1, s2 = self.factor_form
        return (s1.rows[:, None] * self.factor_n[1] + s2.rows[None, :]).ravel()

    @cached_property
    def scales(self):
        s1, s2 = self.factor_form
        return (s1.scales[:, None] * s2.scales[None, :]).ravel()

    @cached_property
    def probs(self):
        s1, s2 = self.factor_form
        return (s1.probs[:, None] * s2.probs[None, :]).ravel()

    def to_dict(self):
        out = {"space_n": self.space_n, "nnz": self.nnz}
        if self.factor_form is not None:
            out["factor_form"] = [
                {"n": s.source_n, "rows": s.rows.tolist(), "probs": s.probs.tolist()}
                for s in self.factor_form
            ]
        else:
            out["indices"] = self.indices.tolist()
            out["probs"] = None if self.probs is None else self.probs.tolist()
            if self.factor_n is not None:
                out["factor_n"] = list(self.factor_n)
        return out


def repeated_halving(oracle, eps, cfg=None, trace=None):
    """
    Leverage-score sketch of one matrix by repeated halving.

    Returns a ``DiagonalSketch`` D with D A spectrally close to A at accuracy
    ``eps`` with high probability. Matrices with fewer than 2d rows are
    returned whole (identity sketch). ``trace``, if a list, collects a
    ``LevelRecord`` per level (bottom first, the final pass last).
    """
    cfg = cfg or HalvingConfig()
    if not 0 < eps <= 1:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    if not isinstance(oracle, RowOracle):
        oracle = RowOracle(oracle)
    n, d = oracle.shape
    if n < 2 * d:
        return DiagonalSketch.identity(n)

    _, B1 = _ascend(oracle, cfg, "single", trace)
    record = {}
    with oracle.ledger.phase("final-sample"):
        w = _final_weights(oracle, B1, cfg, "single", record)
        sample = weighted_subsample(oracle, w, eps, cfg.c_const, subseed(cfg.seed, "single", "sample", 0))
    if trace is not None:
        trace.append(LevelRecord(0, np.arange(n), sample, record.get("w_tilde"), B1))
    return DiagonalSketch.from_sample(sample)


def kron_repeated_halving(oracle1, oracle2, eps, cfg=None, trace=None):
    """
    Sketch of A1 (x) A2 from two independent halving runs on the factors,
    without forming the product.

    With ``cfg.final_sampler == "factor"`` the output keeps every pair of rows
    from the two final factor samples, so its Gram is the Kronecker product of
    the factor Grams. With ``"joint"`` each pair is drawn independently with
    probability p1_i * p2_j by tree sampling (factors must have equal n).

    ``trace``, if given, is a dict that receives the per-factor level records
    under keys 1 and 2.
    """
    cfg = cfg or HalvingConfig()
    if not 0 < eps <= 1:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    if not isinstance(oracle1, RowOracle):
        oracle1 = RowOracle(oracle1)
    if not isinstance(oracle2, RowOracle):
        oracle2 = RowOracle(oracle2, oracle1.ledger)
    for k, o in ((1, oracle1), (2, oracle2)):
        n, d = o.shape
        if n < 2 * d:
            raise ValueError(f"factor {k} has shape {o.shape}; need n >= 2d")

    traces = {1: [], 2: []} if trace is not None else {1: None, 2: None}
    B1 = {k: _ascend(o, cfg, f"factor{k}", traces[k])[1] for k, o in ((1, oracle1), (2, oracle2))}

    if cfg.final_sampler == "factor":
        samples = {}
        for k, o in ((1, oracle1), (2, oracle2)):
            record = {}
            with o.ledger.phase("final-sample"):
                w = _final_weights(o, B1[k], cfg, f"factor{k}", record)
                samples[k] = weighted_subsample(o, w, eps, cfg.c_const,
                                                subseed(cfg.seed, f"factor{k}", "sample", 0))
            if traces[k] is not None:
                traces[k].append(LevelRecord(0, np.arange(o.shape[0]), samples[k], record.get("w_tilde"), B1[k]))
        sketch = DiagonalSketch.from_factors(samples[1], samples[2])
    else:
        sketch = _joint_final(oracle1, oracle2, B1, eps, cfg)

    if trace is not None:
        trace.update(traces)
    return sketch


def _joint_final(oracle1, oracle2, B1, eps, cfg):
    n1, n2 = oracle1.shape[0], oracle2.shape[0]
    if n1 != n2:
        raise ValueError("joint final sampling needs factors with equal row counts")
    lists = []
    for k, o in ((1, oracle1), (2, oracle2)):
        w = _final_weights(o, B1[k], cfg, f"factor{k}")
        d = o.shape[1]
        lists.append(ProbList(n1, lambda idx, o=o, w=w, d=d: sample_probabilities(w(o.rows(idx)), eps, cfg.c_const, d)))
    with oracle1.ledger.phase("final-sample"):
        tuples, _ = sample_kd(lists, oracle1.ledger, subseed(cfg.seed, "joint", "sample", 0))
        p1, p2 = lists[0].last_values, lists[1].last_values
        i, j = tuples[:, 0], tuples[:, 1]
    s1, s2 = 1.0 / np.sqrt(p1), 1.0 / np.sqrt(p2)
    sketch = DiagonalSketch(n1 * n2, i * n2 + j, s1[i] * s2[j], p1[i] * p2[j], factor_n=(n1, n2))
    sketch.factor_probs = (p1, p2)
    return sketch


def apply_sketch(D, A1, A2=None):
    """
    Kept, rescaled rows of D A1 (or of D (A1 (x) A2) when ``A2`` is given),
    without forming the full product.
    """
    A1 = as_sparse_rows(A1)
    if A2 is None:
        if D.space_n != A1.n_rows:
            raise ValueError(f"sketch space {D.space_n} does not match {A1.n_rows} rows")
        return A1.take_rows(D.indices).scale_rows(D.scales)
    A2 = as_sparse_rows(A2)
    n1, n2 = A1.n_rows, A2.n_rows
    if D.space_n != n1 * n2:
        raise ValueError(f"sketch space {D.space_n} does not match {n1} x {n2} rows")
    if D.factor_form is not None:
        s1, s2 = D.factor_form
        B1 = A1.take_rows(s1.rows).scale_rows(s1.scales)
        B2 = A2.take_rows(s2.rows).scale_rows(s2.scales)
        return kronecker(B1, B2)
    i, j = np.divmod(D.indices, n2)
    R1 = A1.take_rows(i).toarray() * D.scales[:, None]
    R2 = A2.take_rows(j).toarray()
    return SparseRowMatrix((R1[:, :, None] * R2[:, None, :]).reshape(len(i), A1.n_cols * A2.n_cols))


def sketched_gram(D, A1, A2=None, chunk=1 << 16):
    """Gram matrix of ``apply_sketch(D, A1, A2)``, factorized when possible."""
    if A2 is None:
        return gram(apply_sketch(D, A1))
    A1, A2 = as_sparse_rows(A1), as_sparse_rows(A2)
    if D.factor_form is not None:
        s1, s2 = D.factor_form
        G1 = gram(A1.take_rows(s1.rows).scale_rows(s1.scales))
        G2 = gram(A2.take_rows(s2.rows).scale_rows(s2.scales))
        return np.kron(G1, G2)
    d = A1.n_cols * A2.n_cols
    G = np.zeros((d, d))
    for lo in range(0, D.nnz, chunk):
        part = DiagonalSketch(D.space_n, D.indices[lo:lo + chunk], D.scales[lo:lo + chunk])
        G += gram(apply_sketch(part, A1, A2))
    return G
