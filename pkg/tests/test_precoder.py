import numpy as np
import pytest

from afc.precoder import (
    LdpcCode,
    ldpc_decode,
    ldpc_encode,
    ldpc_generate,
    ldpc_posterior,
    load_code,
    save_code,
    syndrome,
    syndrome_ok,
)
from afc.rng import substream


@pytest.fixture(scope="module")
def code():
    return ldpc_generate(1000, 0.95, 3, substream(40, 1))


class TestGenerate:
    def test_shape_and_rate(self, code):
        assert code.n == 1000
        assert code.k_msg == 950
        assert code.m == 50
        assert abs(code.rate - 0.95) <= 0.005

    def test_variable_regularity(self, code):
        var_deg = np.zeros(code.n, dtype=int)
        for row in code.check_rows:
            var_deg[row] += 1
        assert np.all(var_deg == 3)

    def test_average_check_degree(self, code):
        degs = [len(r) for r in code.check_rows]
        assert sum(degs) / len(degs) == 60.0

    def test_girth_at_least_six_where_permitted(self):
        # needs C(m,2) >= 3n check pairs, so test at the scale that has them
        big = ldpc_generate(10_000, 0.95, 3, substream(40, 9))
        seen = set()
        var_checks = [[] for _ in range(big.n)]
        for c, row in enumerate(big.check_rows):
            for v in row:
                var_checks[int(v)].append(c)
        for checks in var_checks:
            for i in range(len(checks)):
                for j in range(i + 1, len(checks)):
                    pair = (checks[i], checks[j])
                    assert pair not in seen, "two variables share two checks (4-cycle)"
                    seen.add(pair)

    def test_generator_orthogonal_to_checks(self, code):
        rng = substream(40, 2)
        for _ in range(20):
            msg = rng.integers(0, 2, code.k_msg).astype(np.uint8)
            assert syndrome_ok(code, ldpc_encode(code, msg))

    def test_infeasible_parameters(self):
        with pytest.raises(ValueError):
            ldpc_generate(40, 0.99, 3, substream(40, 3))  # m = 0 < var_degree


class TestEncode:
    def test_zero_maps_to_zero(self, code):
        cw = ldpc_encode(code, np.zeros(code.k_msg, dtype=np.uint8))
        assert not cw.any()

    def test_systematic_prefix(self, code):
        msg = substream(41, 1).integers(0, 2, code.k_msg).astype(np.uint8)
        cw = ldpc_encode(code, msg)
        assert np.array_equal(cw[: code.k_msg], msg)

    def test_injective(self, code):
        rng = substream(41, 2)
        seen = set()
        for _ in range(50):
            msg = rng.integers(0, 2, code.k_msg).astype(np.uint8)
            seen.add(ldpc_encode(code, msg).tobytes())
        assert len(seen) == 50

    def test_length_check(self, code):
        with pytest.raises(ValueError):
            ldpc_encode(code, np.zeros(code.k_msg + 1, dtype=np.uint8))


class TestDecode:
    def test_saturated_codeword_recovered(self, code):
        msg = substream(42, 1).integers(0, 2, code.k_msg).astype(np.uint8)
        cw = ldpc_encode(code, msg)
        llr = (1.0 - 2.0 * cw) * 40.0
        bits, converged = ldpc_decode(code, llr)
        assert converged
        assert np.array_equal(bits, msg)

    def test_single_flip_corrected(self, code):
        msg = substream(42, 2).integers(0, 2, code.k_msg).astype(np.uint8)
        cw = ldpc_encode(code, msg)
        llr = (1.0 - 2.0 * cw) * 12.0
        llr[17] = -llr[17]  # one confident but wrong position
        bits, converged = ldpc_decode(code, llr)
        assert converged
        assert np.array_equal(bits, msg)

    def test_all_zero_llr_does_not_converge(self, code):
        bits, converged = ldpc_decode(code, np.zeros(code.n), max_iters=10)
        assert not converged

    def test_roundtrip_batch(self, code):
        rng = substream(42, 3)
        for _ in range(1000):
            msg = rng.integers(0, 2, code.k_msg).astype(np.uint8)
            llr = (1.0 - 2.0 * ldpc_encode(code, msg)) * 30.0
            bits, converged = ldpc_decode(code, llr)
            assert converged and np.array_equal(bits, msg)

    def test_converged_implies_zero_syndrome(self, code):
        rng = substream(42, 4)
        for _ in range(50):
            llr = rng.normal(0.0, 2.0, code.n)
            belief = ldpc_posterior(code, llr, max_iters=30)
            bits, converged = ldpc_decode(code, llr, max_iters=30)
            if converged:
                full = (belief < 0).astype(np.uint8)
                assert syndrome_ok(code, full)

    def test_posterior_shape(self, code):
        out = ldpc_posterior(code, np.zeros(code.n), max_iters=2)
        assert out.shape == (code.n,)


class TestSerialization:
    def test_roundtrip(self, code, tmp_path):
        path = tmp_path / "code.txt"
        save_code(code, path)
        loaded = load_code(path)
        assert loaded.n == code.n and loaded.k_msg == code.k_msg
        assert all(np.array_equal(a, b) for a, b in zip(loaded.check_rows, code.check_rows))
        assert np.array_equal(loaded.enc_matrix, code.enc_matrix)
        msg = substream(43, 1).integers(0, 2, code.k_msg).astype(np.uint8)
        assert np.array_equal(ldpc_encode(loaded, msg), ldpc_encode(code, msg))

    def test_resave_identical(self, code, tmp_path):
        p1 = tmp_path / "a.txt"
        p2 = tmp_path / "b.txt"
        save_code(code, p1)
        save_code(load_code(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_format(self, code, tmp_path):
        path = tmp_path / "code.txt"
        save_code(code, path)
        lines = path.read_text().splitlines()
        assert lines[0] == f"{code.n} {code.m}"
        assert len(lines) == code.m + 1
        row0 = [int(x) for x in lines[1].split()]
        assert row0 == sorted(row0)
