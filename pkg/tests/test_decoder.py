import math

import numpy as np
import pytest

from afc.channel import snr_to_sigma
from afc.core import (
    DegreeDistribution,
    EncoderPolicy,
    FactorGraph,
    Selection,
    WeightAssignment,
    bits_to_bpsk,
    build_graph,
    encode,
    power_scale,
    reciprocal_prime_weights,
    zero_sum_row_template,
)
from afc.decoder import (
    DecoderConfig,
    LlrVector,
    UnsupportedDegreeError,
    bp_decode,
    bp_decode_joint,
    check_to_var_messages,
    decode_with_precode,
    ml_decode_bruteforce,
)
from afc.precoder import ldpc_encode, ldpc_generate
from afc.rng import substream

RECIP = reciprocal_prime_weights()
D8 = DegreeDistribution.fixed(8)
PERM = EncoderPolicy(Selection.MIN_DEGREE_FIRST, WeightAssignment.PERMUTATION_OF_SET)
BAL = EncoderPolicy(Selection.MIN_DEGREE_FIRST, WeightAssignment.BALANCED_PERMUTATION)


def chain_graph(k, weights=(0.5, 1 / 3)):
    """Cycle-free chain: row i ties variables i and i+1."""
    rows = k - 1
    indptr = np.arange(0, 2 * rows + 1, 2, dtype=np.int64)
    indices = np.empty(2 * rows, dtype=np.int64)
    w = np.empty(2 * rows)
    for i in range(rows):
        indices[2 * i] = i
        indices[2 * i + 1] = i + 1
        w[2 * i] = weights[0]
        w[2 * i + 1] = weights[1]
    return FactorGraph(k=k, indptr=indptr, indices=indices, weights=w)


def exact_posterior_llr(graph, u, sigma2):
    """Enumeration oracle: marginal LLRs from the full joint."""
    k = graph.k
    g = graph.dense()
    cand = np.arange(1 << k, dtype=np.int64)
    bits = (cand[:, None] >> (k - 1 - np.arange(k))) & 1
    b = 1.0 - 2.0 * bits
    resid = u[None, :] - b @ g.T
    logw = -np.einsum("ij,ij->i", resid, resid) / (2.0 * sigma2)
    logw -= logw.max()
    w = np.exp(logw)
    llr = np.empty(k)
    for j in range(k):
        plus = float(w[b[:, j] > 0].sum())
        minus = float(w[b[:, j] < 0].sum())
        llr[j] = math.log(plus) - math.log(minus)
    return llr


class TestCheckToVar:
    def test_degree_one_closed_form(self):
        out = check_to_var_messages(np.array([0.5]), 0.4, 0.1, np.array([0.0]))
        assert abs(out[0] - 2 * 0.5 * 0.4 / 0.1) < 1e-12

    def test_degree_two_noiseless_decision(self):
        out = check_to_var_messages(np.array([0.5, 1 / 3]), 5 / 6, 1e-12, np.zeros(2))
        assert np.all(np.sign(out) == 1.0)

    def test_zero_sum_row_is_uninformative(self):
        tmpl = np.array(zero_sum_row_template())
        out = check_to_var_messages(tmpl, 0.0, 1e-9, np.zeros(8))
        assert np.all(out == 0.0)

    def test_degree_cap(self):
        with pytest.raises(UnsupportedDegreeError):
            check_to_var_messages(np.ones(21), 0.0, 1.0, np.zeros(21))

    def test_message_count_mismatch(self):
        with pytest.raises(ValueError):
            check_to_var_messages(np.ones(3), 0.0, 1.0, np.zeros(2))

    def test_matches_exact_two_variable_posterior(self):
        w = np.array([0.5, 1 / 3])
        u = 0.31
        sigma2 = 0.25
        g = FactorGraph(
            k=2,
            indptr=np.array([0, 2], dtype=np.int64),
            indices=np.array([0, 1], dtype=np.int64),
            weights=w,
        )
        ref = exact_posterior_llr(g, np.array([u]), sigma2)
        out = check_to_var_messages(w, u, sigma2, np.zeros(2), clip=300.0)
        assert np.allclose(out, ref, atol=1e-10)


class TestBpDecode:
    def test_noiseless_recovery(self):
        for seed in range(10):
            g = build_graph(16, 32, D8, RECIP, PERM, substream(seed, 1))
            b = bits_to_bpsk(substream(seed, 2).integers(0, 2, 16))
            res = bp_decode(g, encode(g, b), 1e-12)
            assert np.array_equal(res.hard, b)

    def test_zero_observations_fixed_point(self):
        tmpl = np.array(zero_sum_row_template())
        g = FactorGraph(
            k=8,
            indptr=np.array([0, 8, 16], dtype=np.int64),
            indices=np.concatenate([np.arange(8), np.arange(8)]).astype(np.int64),
            weights=np.concatenate([tmpl, tmpl]),
        )
        res = bp_decode(g, np.zeros(2), 1e-6)
        assert np.all(res.llr == 0.0)
        assert np.all(res.hard == 1.0)  # ties decide +1

    def test_matches_ml_mostly(self):
        s2 = snr_to_sigma(15.0)
        scale = power_scale(D8, RECIP)
        match = 0
        trials = 50
        for seed in range(trials):
            g = build_graph(12, 24, D8, RECIP, PERM, substream(seed, 3))
            b = bits_to_bpsk(substream(seed, 4).integers(0, 2, 12))
            u = encode(g, b) * scale + substream(seed, 5).normal(0, math.sqrt(s2), 24)
            ml = ml_decode_bruteforce(g, u / scale)
            res = bp_decode(g, u / scale, s2 / scale**2)
            match += int(np.array_equal(res.hard, ml))
        assert match >= int(0.95 * trials)

    def test_rejects_bad_inputs(self):
        g = chain_graph(4)
        with pytest.raises(ValueError):
            bp_decode(g, np.zeros(2), 1.0)  # wrong length
        with pytest.raises(ValueError):
            bp_decode(g, np.array([np.nan, 0, 0]), 1.0)
        with pytest.raises(ValueError):
            bp_decode(g, np.zeros(3), 0.0)

    def test_message_symmetry_single_row(self):
        w = np.array(RECIP.values)
        lam = substream(9, 4).normal(size=8)
        out_pos = check_to_var_messages(w, 0.37, 0.1, lam)
        out_neg = check_to_var_messages(w, -0.37, 0.1, -lam)
        assert np.allclose(out_pos, -out_neg, rtol=1e-12, atol=1e-13)

    def test_message_symmetry(self):
        # the update rule is antisymmetric; iterate only a few times so
        # summation-order rounding cannot compound through the feedback loop
        g = build_graph(20, 30, D8, RECIP, PERM, substream(9, 1))
        u = substream(9, 2).normal(size=30)
        prior = substream(9, 3).normal(size=20)
        cfg = DecoderConfig(max_iters=3, stop_on_stable_decisions=False)
        a = bp_decode(g, u, 0.1, cfg, prior=prior)
        b = bp_decode(g, -u, 0.1, cfg, prior=-prior)
        assert np.allclose(a.llr, -b.llr, rtol=1e-9, atol=1e-10)

    def test_scale_consistency(self):
        g = build_graph(20, 30, D8, RECIP, PERM, substream(10, 1))
        b = bits_to_bpsk(substream(10, 2).integers(0, 2, 20))
        u = encode(g, b) + substream(10, 3).normal(0, 0.3, 30)
        res1 = bp_decode(g, u, 0.09)
        c = 3.7
        g2 = FactorGraph(k=20, indptr=g.indptr.copy(), indices=g.indices.copy(), weights=g.weights * c)
        res2 = bp_decode(g2, u * c, 0.09 * c * c)
        assert np.allclose(res1.llr, res2.llr, atol=1e-9)

    def test_single_row_pins_neighbors(self):
        # condition-(4) set: one full-set row determines all 8 neighbors
        vals = np.array(RECIP.values)
        g = FactorGraph(
            k=8,
            indptr=np.array([0, 8], dtype=np.int64),
            indices=np.arange(8, dtype=np.int64),
            weights=vals,
        )
        for pattern in range(256):
            b = 1.0 - 2.0 * ((pattern >> np.arange(8)) & 1)
            res = bp_decode(g, encode(g, b), 1e-12, DecoderConfig(max_iters=2))
            assert np.array_equal(res.hard, b)

    def test_convergence_eps_stops_early(self):
        g = build_graph(16, 32, D8, RECIP, PERM, substream(12, 1))
        b = bits_to_bpsk(substream(12, 2).integers(0, 2, 16))
        u = encode(g, b)
        loose = bp_decode(g, u, 1e-12, DecoderConfig(max_iters=50, convergence_eps=1e-3,
                                                     stop_on_stable_decisions=False))
        tight = bp_decode(g, u, 1e-12, DecoderConfig(max_iters=50,
                                                     stop_on_stable_decisions=False))
        assert loose.iterations < tight.iterations
        assert np.array_equal(loose.hard, b)

    def test_tree_equals_enumeration(self):
        k = 10
        g = chain_graph(k)
        rng = substream(11, 1)
        b = bits_to_bpsk(rng.integers(0, 2, k))
        sigma2 = 0.16
        u = encode(g, b) + rng.normal(0, math.sqrt(sigma2), g.m)
        cfg = DecoderConfig(max_iters=2 * k, damping=0.0, llr_clip=300.0,
                            stop_on_stable_decisions=False)
        res = bp_decode(g, u, sigma2, cfg)
        ref = exact_posterior_llr(g, u, sigma2)
        assert np.allclose(res.llr, ref, rtol=1e-8, atol=1e-9)


class TestMlBruteforce:
    def test_two_variable_example(self):
        g = FactorGraph(
            k=2,
            indptr=np.array([0, 2], dtype=np.int64),
            indices=np.array([0, 1], dtype=np.int64),
            weights=np.array([0.5, 1 / 3]),
        )
        assert np.array_equal(ml_decode_bruteforce(g, np.array([5 / 6])), [1.0, 1.0])

    def test_empty_rows_tie_rule(self):
        g = FactorGraph(
            k=3,
            indptr=np.array([0], dtype=np.int64),
            indices=np.array([], dtype=np.int64),
            weights=np.array([]),
        )
        assert np.array_equal(ml_decode_bruteforce(g, np.array([])), [1.0, 1.0, 1.0])

    def test_noiseless_unique_recovery(self):
        for seed in range(5):
            g = build_graph(10, 12, D8, RECIP, PERM, substream(seed, 21))
            b = bits_to_bpsk(substream(seed, 22).integers(0, 2, 10))
            assert np.array_equal(ml_decode_bruteforce(g, encode(g, b)), b)

    def test_refuses_large_k(self):
        g = chain_graph(21)
        with pytest.raises(ValueError):
            ml_decode_bruteforce(g, np.zeros(g.m))


class TestPrecodeDecode:
    def setup_method(self):
        self.code = ldpc_generate(200, 0.95, 3, substream(30, 1))
        self.scale = power_scale(D8, RECIP)

    def frame(self, seed, n_symbols, msg=None):
        g = build_graph(self.code.n, n_symbols, D8, RECIP, BAL, substream(seed, 31))
        if msg is None:
            msg = substream(seed, 32).integers(0, 2, self.code.k_msg).astype(np.uint8)
        cw = ldpc_encode(self.code, msg)
        return g, msg, bits_to_bpsk(cw)

    def test_noiseless_exact(self):
        g, msg, b = self.frame(0, 200)
        bits = decode_with_precode(g, encode(g, b), 1e-12, DecoderConfig(), self.code)
        assert np.array_equal(bits, msg)

    def test_all_zero_message(self):
        zeros = np.zeros(self.code.k_msg, dtype=np.uint8)
        g, msg, b = self.frame(1, 200, msg=zeros)
        bits = decode_with_precode(g, encode(g, b), 1e-12, DecoderConfig(), self.code)
        assert not bits.any()

    def test_interleaved_matches_noiseless(self):
        g, msg, b = self.frame(2, 220)
        bits = decode_with_precode(
            g, encode(g, b), 1e-12, DecoderConfig(), self.code, interleave=True
        )
        assert np.array_equal(bits, msg)

    def test_joint_returns_iterations(self):
        g, msg, b = self.frame(3, 220)
        res = bp_decode_joint(g, encode(g, b), 1e-12, self.code)
        assert res.iterations >= 1
        assert np.array_equal(res.hard_bits[: self.code.k_msg], msg)

    def test_size_mismatch(self):
        g = build_graph(64, 32, D8, RECIP, PERM, substream(33, 1))
        with pytest.raises(ValueError):
            decode_with_precode(g, np.zeros(32), 1.0, DecoderConfig(), self.code)


class TestLlrVector:
    def test_tie_goes_positive(self):
        v = LlrVector(np.array([0.0, -1.0, 2.0]))
        assert np.array_equal(v.hard, [1.0, -1.0, 1.0])
        assert np.array_equal(v.hard_bits, [0, 1, 0])
