"""
Row-query access, query accounting, and classical stand-ins for the quantum
sampling subroutines.

Every sampler here runs classically in time linear in the list length. What
it records on the ``QueryLedger`` is the cost the corresponding quantum
routine would be charged (about sqrt(n * |p|_1) per call, with one explicit
log factor), so square-root scaling can be checked on the ledger. Wall-clock
time of the simulation says nothing about that scaling.
"""
import math
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .matrix import as_sparse_rows


class ProbabilityDomainError(ValueError):
    pass


@dataclass
class QueryLedger:
    classical_queries: int = 0
    quantum_cost_units: int = 0
    breakdown: dict = field(default_factory=dict)
    _phase: str = "unlabelled"

    @contextmanager
    def phase(self, label):
        previous, self._phase = self._phase, label
        try:
            yield self
        finally:
            self._phase = previous

    def _bucket(self):
        return self.breakdown.setdefault(self._phase, [0, 0])

    def charge_classical(self, count):
        count = int(count)
        if count < 0:
            raise ValueError("query counts only grow")
        self.classical_queries += count
        self._bucket()[0] += count

    def charge_quantum(self, units):
        units = int(units)
        if units < 0:
            raise ValueError("query counts only grow")
        self.quantum_cost_units += units
        self._bucket()[1] += units

    def merge(self, other):
        self.classical_queries += other.classical_queries
        self.quantum_cost_units += other.quantum_cost_units
        for label, (c, q) in other.breakdown.items():
            bucket = self.breakdown.setdefault(label, [0, 0])
            bucket[0] += c
            bucket[1] += q

    def to_dict(self):
        return {
            "classical_queries": self.classical_queries,
            "quantum_cost_units": self.quantum_cost_units,
            "breakdown": {k: {"classical": c, "quantum": q}
                          for k, (c, q) in sorted(self.breakdown.items())},
        }


class RowOracle:
    """Row-query access to a matrix; each row read costs one classical query."""

    def __init__(self, A, ledger=None):
        self.matrix = as_sparse_rows(A)
        self.ledger = ledger if ledger is not None else QueryLedger()

    @property
    def shape(self):
        return self.matrix.shape

    def row(self, i):
        self.ledger.charge_classical(1)
        return self.matrix.row(int(i))

    def rows(self, idx):
        """Rows ``idx`` as a ``SparseRowMatrix``, charging one query per index."""
        idx = np.asarray(idx, dtype=np.int64)
        self.ledger.charge_classical(len(idx))
        return self.matrix.take_rows(idx)


class ProbList:
    """
    Lazily evaluated probability list over ``[0, n)``.

    ``fn`` maps an integer index array to an array of probabilities; it is
    called once per sampling pass, so any row queries it makes are charged then.
    """

    def __init__(self, n, fn):
        self.n = int(n)
        self._fn = fn
        self.declared_l1 = None
        self.last_values = None

    @classmethod
    def constant(cls, n, value):
        return cls(n, lambda idx: np.full(len(idx), float(value)))

    @classmethod
    def from_array(cls, p):
        p = np.asarray(p, dtype=np.float64)
        return cls(len(p), lambda idx: p[idx])

    def eval(self, i):
        return float(self.values(np.array([i]))[0])

    def values(self, idx=None):
        idx = np.arange(self.n) if idx is None else np.asarray(idx, dtype=np.int64)
        p = np.asarray(self._fn(idx), dtype=np.float64)
        if p.shape != idx.shape:
            raise ProbabilityDomainError(f"probability function returned shape {p.shape}")
        bad = ~((p >= 0.0) & (p <= 1.0))
        if bad.any():
            raise ProbabilityDomainError(f"probability {p[bad][0]!r} outside [0, 1] at index {idx[bad][0]}")
        if len(idx) == self.n:
            self.declared_l1 = float(p.sum())
            self.last_values = p
        return p


def log_factor(n):
    return math.ceil(math.log2(n + 2))


def sampling_charge(n, l1):
    """Quantum cost of one 1-D sampling call over ``n`` items with mass ``l1``."""
    return math.ceil(math.sqrt(n * max(l1, 1.0))) * log_factor(n)


def sample_1d(p, ledger, rng_seed):
    """
    Include each index independently with probability ``p_i``.

    Returns ``(indices, probabilities)`` as sorted arrays; the probabilities
    are those used, for 1/sqrt(p) rescaling.
    """
    rng = np.random.default_rng(rng_seed)
    probs = p.values()
    keep = rng.random(p.n) < probs
    ledger.charge_quantum(sampling_charge(p.n, probs.sum()))
    idx = np.flatnonzero(keep)
    return idx, probs[idx]


def kd_charge(n, l1s):
    """Tree-sampling cost: sqrt(n) * sum_j sqrt(|p_j|_1) * prod_{l<j} |p_l|_1, rounded up per factor."""
    total, nodes = 0, 1
    for l1 in l1s:
        total += nodes * math.ceil(math.sqrt(n * max(l1, 1.0)))
        nodes *= math.ceil(l1)
    return total * log_factor(n)


def sample_kd(p_lists, ledger, rng_seed, chunk=1 << 22):
    """
    Include each tuple ``(i_1, ..., i_k)`` independently with probability
    ``prod_j p_j[i_j]``, by sampling level 1 and then, for every surviving
    prefix, the next coordinate.

    Returns an ``(m, k)`` index array in lexicographic order and the matching
    product probabilities.
    """
    if len(p_lists) == 0:
        raise ValueError("need at least one probability list")
    n = p_lists[0].n
    if any(p.n != n for p in p_lists):
        raise ValueError("all probability lists must share n")
    if len(p_lists) == 1:
        idx, probs = sample_1d(p_lists[0], ledger, rng_seed)
        return idx[:, None], probs

    rng = np.random.default_rng(rng_seed)
    values = [p.values() for p in p_lists]
    ledger.charge_quantum(kd_charge(n, [v.sum() for v in values]))

    first = np.flatnonzero(rng.random(n) < values[0])
    tuples = first[:, None]
    probs = values[0][first]
    for v in values[1:]:
        support = np.flatnonzero(v > 0)
        new_t, new_p = [], []
        rows_per_chunk = max(1, chunk // max(len(support), 1))
        for lo in range(0, len(tuples), rows_per_chunk):
            block = slice(lo, lo + rows_per_chunk)
            hits = rng.random((len(tuples[block]), len(support))) < v[support]
            parent, child = np.nonzero(hits)
            new_t.append(np.column_stack([tuples[block][parent], support[child]]))
            new_p.append(probs[block][parent] * v[support][child])
        if new_t:
            tuples, probs = np.concatenate(new_t), np.concatenate(new_p)
        else:
            tuples, probs = np.zeros((0, tuples.shape[1] + 1), dtype=np.int64), np.zeros(0)
    return tuples, probs


def grover_find_all(membership, n, ledger, m_hint=None):
    """
    Return every ``i < n`` with ``membership(i)`` true (``membership`` takes an
    index array). The charge uses the true count m: ceil(sqrt(n * max(m, 1))) * log.
    ``m_hint`` is accepted for interface parity and does not affect the charge.
    """
    hits = np.flatnonzero(np.asarray(membership(np.arange(n)), dtype=bool))
    ledger.charge_quantum(sampling_charge(n, len(hits)))
    return hits


def _splitmix64(x):
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def prf_bits(seed, stream, idx):
    """
    Counter-mode pseudorandom fair coins: bit for ``(seed, stream, i)``,
    evaluable independently for any index.
    """
    idx = np.asarray(idx, dtype=np.uint64)
    with np.errstate(over="ignore"):
        key = _splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
        key = _splitmix64(key ^ np.uint64(stream & 0xFFFFFFFFFFFFFFFF))
        return (_splitmix64(key ^ idx) >> np.uint64(63)).astype(bool)
