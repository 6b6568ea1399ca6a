import math

import numpy as np
import pytest

from kronsketch.generate import gaussian, tiled_identity
from kronsketch.halving import (
    DegenerateChainError,
    DiagonalSketch,
    HalvingChain,
    HalvingConfig,
    WeightedSample,
    apply_sketch,
    chain_depth,
    kron_repeated_halving,
    repeated_halving,
    sample_probabilities,
    sketched_gram,
    weighted_subsample,
)
from kronsketch import halving
from kronsketch.leverage import exact_leverage, generalized_leverage
from kronsketch.matrix import SparseRowMatrix, gram, kronecker, spectral_check
from kronsketch.oracle import RowOracle


class TestConfig:
    @pytest.mark.parametrize("kwargs", [{"c_const": 1.0}, {"jl_eps": 0.0}, {"seed": -1},
                                        {"final_sampler": "other"}])
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            HalvingConfig(**kwargs)


class TestChain:
    def test_depth(self):
        assert chain_depth(4096, 16) == 8
        assert chain_depth(1000, 16) == 6

    def test_nesting(self):
        chain = HalvingChain(n=2000, L=6, seed=5)
        assert chain.membership(0, np.arange(2000)).all()
        for level in range(6):
            upper, lower = chain.membership(level, np.arange(2000)), chain.membership(level + 1, np.arange(2000))
            assert not np.any(lower & ~upper)

    def test_level_sizes(self):
        n = 1 << 14
        sizes = np.array([[len(HalvingChain(n, 4, s).members(l)) for l in range(5)] for s in range(20)])
        expected = n / 2.0 ** np.arange(5)
        np.testing.assert_allclose(sizes.mean(axis=0), expected, rtol=0.05)

    def test_bottom_retry(self, monkeypatch):
        monkeypatch.setattr(HalvingChain, "membership", lambda self, level, idx: np.zeros(len(idx), bool))
        with pytest.raises(DegenerateChainError):
            repeated_halving(gaussian(64, 2, 0), 0.5)


class TestProbabilities:
    def test_formula(self):
        p = sample_probabilities([0.0, 0.001, 1.0, np.inf], 0.5, 8.0, 16)
        np.testing.assert_allclose(p, [0.0, 8 * 0.001 * 4 / 0.25, 1.0, 1.0])

    def test_log_floor(self):
        # log2(1) = 0 would zero every probability
        assert sample_probabilities([0.01], 1.0, 2.0, 1)[0] == pytest.approx(0.02)


class TestWeightedSubsample:
    def test_saturation(self, rng):
        A = rng.standard_normal((30, 3))
        oracle = RowOracle(A)
        s = weighted_subsample(oracle, np.full(30, np.inf), 0.5, 8.0, seed=0)
        np.testing.assert_array_equal(s.rows, np.arange(30))
        np.testing.assert_array_equal(s.scales, np.ones(30))
        np.testing.assert_array_equal(s.B.toarray(), A)
        assert oracle.ledger.classical_queries == 30

    def test_scales_match_probs(self, rng):
        A = rng.standard_normal((500, 4))
        w = exact_leverage(A)
        s = weighted_subsample(RowOracle(A), w, 1.0, 2.0, seed=1)
        assert np.all((s.probs > 0) & (s.probs <= 1))
        np.testing.assert_allclose(s.scales, 1 / np.sqrt(s.probs), rtol=1e-12)
        np.testing.assert_array_equal(s.probs, sample_probabilities(w, 1.0, 2.0, 4)[s.rows])
        np.testing.assert_allclose(s.B.toarray(), A[s.rows] * s.scales[:, None], rtol=1e-12)

    def test_zero_weights_rejected(self):
        with pytest.raises(ValueError):
            weighted_subsample(RowOracle(np.eye(3)), np.zeros(3), 0.5, 8.0, seed=0)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            weighted_subsample(RowOracle(np.eye(3)), [1.0, -1.0, 1.0], 0.5, 8.0, seed=0)

    @pytest.mark.parametrize("eps,c", [(0.0, 8.0), (1.5, 8.0), (0.5, 1.0)])
    def test_parameter_checks(self, eps, c):
        with pytest.raises(ValueError):
            weighted_subsample(RowOracle(np.eye(3)), np.ones(3), eps, c, seed=0)

    def test_exact_scores(self):
        n, d, eps = 4096, 16, 0.5
        passes, sizes = 0, []
        for seed in range(20):
            A = gaussian(n, d, seed)
            s = weighted_subsample(RowOracle(A), exact_leverage(A), eps, 8.0, seed=100 + seed)
            passes += spectral_check(gram(s.B), gram(A), eps).passes
            sizes.append(len(s))
        assert passes >= 18
        assert max(sizes) <= 40 * d * math.log2(d) / eps**2


class TestRepeatedHalving:
    def test_small_matrix_identity(self, rng):
        D = repeated_halving(rng.standard_normal((5, 3)), 0.5)
        np.testing.assert_array_equal(D.indices, np.arange(5))
        np.testing.assert_array_equal(D.scales, np.ones(5))

    def test_tiled_identity(self):
        A = tiled_identity(1024, 8)
        for seed in range(5):
            D = repeated_halving(A, 0.5, HalvingConfig(seed=seed))
            assert spectral_check(sketched_gram(D, A), gram(A), 0.5).passes

    def test_rows_are_scaled_originals(self, rng):
        A = rng.standard_normal((2048, 4))
        D = repeated_halving(A, 0.5, HalvingConfig(seed=2))
        assert np.all(np.diff(D.indices) > 0)
        np.testing.assert_allclose(apply_sketch(D, A).toarray(), A[D.indices] / np.sqrt(D.probs)[:, None])

    def test_phase_labels(self, rng):
        oracle = RowOracle(rng.standard_normal((1024, 4)))
        trace = []
        repeated_halving(oracle, 0.5, HalvingConfig(seed=1), trace)
        L = chain_depth(1024, 4)
        labels = set(oracle.ledger.breakdown)
        assert labels == {"chain-bottom", "final-sample"} | {f"halving-level-{l}" for l in range(1, L)}
        assert [r.level for r in trace] == list(range(L, -1, -1))
        assert sum(c for c, _ in oracle.ledger.breakdown.values()) == oracle.ledger.classical_queries

    def test_level_guarantee(self):
        passes = total = 0
        for seed in range(10):
            A = gaussian(2048, 8, seed)
            trace = []
            repeated_halving(A, 0.5, HalvingConfig(seed=seed), trace)
            for rec in trace[1:-1]:
                A_l = A.take_rows(rec.members)
                passes += spectral_check(gram(rec.sample.B), gram(A_l), 0.5).passes
                total += 1
        assert passes >= 0.9 * total

    def test_weight_sandwich(self):
        inside = total = 0
        for seed in range(5):
            A = gaussian(2048, 8, seed)
            trace = []
            repeated_halving(A, 0.5, HalvingConfig(seed=seed), trace)
            for rec in trace[1:]:
                sigma = generalized_leverage(A.take_rows(rec.members), rec.reference)
                w = rec.w_tilde
                both_inf = np.isinf(sigma) & np.isinf(w)
                ok = both_inf | ((2 * sigma <= w * (1 + 1e-12)) & (w <= 4 * sigma * (1 + 1e-12)))
                inside += ok.sum()
                total += len(w)
        assert inside >= 0.95 * total

    def test_deterministic(self, rng):
        A = rng.standard_normal((1024, 4))
        o1, o2 = RowOracle(A), RowOracle(A)
        D1 = repeated_halving(o1, 0.5, HalvingConfig(seed=9))
        D2 = repeated_halving(o2, 0.5, HalvingConfig(seed=9))
        np.testing.assert_array_equal(D1.indices, D2.indices)
        assert o1.ledger.to_dict() == o2.ledger.to_dict()


class TestKronHalving:
    def test_tiled_identity(self):
        A = tiled_identity(256, 4)
        for seed in range(3):
            D = kron_repeated_halving(A, A, 0.5, HalvingConfig(seed=seed))
            G = kronecker(gram(A), gram(A)).toarray()
            assert spectral_check(sketched_gram(D, A, A), G, 0.5).passes

    def test_scale_product_bitwise(self, rng):
        A1, A2 = rng.standard_normal((256, 3)), rng.standard_normal((200, 2))
        D = kron_repeated_halving(A1, A2, 0.5, HalvingConfig(seed=4))
        s1, s2 = D.factor_form
        assert D.space_n == 256 * 200
        assert D.nnz == len(s1) * len(s2)
        assert np.all(np.diff(D.indices) > 0)
        expected = np.array([a * b for a in s1.scales for b in s2.scales])
        assert np.array_equal(D.scales, expected)

    def test_shape_errors(self, rng):
        with pytest.raises(ValueError):
            kron_repeated_halving(rng.standard_normal((5, 3)), rng.standard_normal((64, 3)), 0.5)
        with pytest.raises(ValueError):
            kron_repeated_halving(rng.standard_normal((64, 3)), rng.standard_normal((64, 3)), 0.0)

    def test_shared_ledger_and_trace(self, rng):
        A = rng.standard_normal((512, 4))
        o1 = RowOracle(A)
        trace = {}
        kron_repeated_halving(o1, A, 0.5, HalvingConfig(seed=1), trace)
        assert set(trace) == {1, 2}
        assert trace[1][-1].level == 0
        assert o1.ledger.breakdown["final-sample"][0] == 2 * 512

    @pytest.mark.parametrize("mode", ["factor", "joint"])
    def test_kept_pairs_match_product_law(self, mode):
        # tiny instance, unsaturated: c = 1.5, eps = 1
        cfg_base = dict(c_const=1.5, final_sampler=mode)
        diffs = []
        for seed in range(200):
            A1, A2 = gaussian(32, 2, 2 * seed), gaussian(32, 2, 2 * seed + 1)
            D = kron_repeated_halving(A1, A2, 1.0, HalvingConfig(seed=seed, **cfg_base))
            if mode == "factor":
                p1, p2 = (s.domain_probs for s in D.factor_form)
            else:
                p1, p2 = D.factor_probs
            diffs.append(D.nnz - p1.sum() * p2.sum())
        diffs = np.array(diffs)
        assert abs(diffs.mean()) <= 4 * diffs.std(ddof=1) / math.sqrt(len(diffs))
        assert diffs.std() > 0

    def test_joint_needs_equal_n(self, rng):
        with pytest.raises(ValueError):
            kron_repeated_halving(rng.standard_normal((64, 2)), rng.standard_normal((40, 2)), 0.5,
                                  HalvingConfig(final_sampler="joint"))


class TestApplySketch:
    def test_empty(self):
        A = np.eye(4)
        out = apply_sketch(DiagonalSketch(4, [], []), A)
        assert out.shape == (0, 4)
        out = apply_sketch(DiagonalSketch(16, [], []), A, A)
        assert out.shape == (0, 16)

    def test_identity(self, rng):
        A = rng.standard_normal((6, 2))
        np.testing.assert_array_equal(apply_sketch(DiagonalSketch.identity(6), A).toarray(), A)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            DiagonalSketch(4, [4], [1.0])

    def test_space_mismatch(self):
        with pytest.raises(ValueError):
            apply_sketch(DiagonalSketch.identity(5), np.eye(4))

    def test_factor_gram(self, rng):
        A1, A2 = rng.standard_normal((40, 2)), rng.standard_normal((30, 3))
        s1 = WeightedSample(np.array([1, 5, 7]), np.array([0.5, 1.0, 0.25]), 40, 0.5, 8.0)
        s2 = WeightedSample(np.array([0, 29]), np.array([1.0, 0.1]), 30, 0.5, 8.0)
        D = DiagonalSketch.from_factors(s1, s2)
        B1 = A1[s1.rows] * s1.scales[:, None]
        B2 = A2[s2.rows] * s2.scales[:, None]
        G = gram(apply_sketch(D, A1, A2))
        np.testing.assert_allclose(G, np.kron(gram(B1), gram(B2)), atol=1e-9)
        explicit = DiagonalSketch(D.space_n, D.indices, D.scales)
        np.testing.assert_allclose(sketched_gram(explicit, A1, A2, chunk=2), G, atol=1e-9)
        np.testing.assert_allclose(sketched_gram(D, A1, A2), G, atol=1e-9)
