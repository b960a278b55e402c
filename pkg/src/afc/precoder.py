"""High-rate LDPC outer code: construction, systematic encoder, SPA decoder.

The construction is greedy progressive-edge-growth style: variables are
regular (degree ``var_degree``) and each new variable attaches to the
currently least-loaded checks while avoiding repeated check pairs, which
keeps the Tanner graph free of 4-cycles whenever the pair budget allows.
Encoding is systematic (message bits first); the parity positions are the
pivot columns of a right-preferring GF(2) elimination, so a code reloaded
from its serialized parity structure reproduces the identical encoder.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LdpcCode",
    "LdpcConstructionError",
    "ldpc_generate",
    "ldpc_encode",
    "ldpc_decode",
    "ldpc_posterior",
    "tanh_rule_messages",
    "syndrome",
    "syndrome_ok",
    "save_code",
    "load_code",
]

_MSG_CLIP = 30.0
_MAG_FLOOR = 1e-12


class LdpcConstructionError(RuntimeError):
    """Could not build a full-rank code with the requested parameters."""


@dataclass(eq=False)
class LdpcCode:
    """Sparse parity structure plus the dense systematic encoder map."""

    n: int
    k_msg: int
    check_rows: list  # list[np.ndarray], sorted var indices per check
    enc_matrix: np.ndarray  # (m, k_msg) uint8; parity = enc_matrix @ msg mod 2
    edge_var: np.ndarray = field(init=False, repr=False)
    check_ptr: np.ndarray = field(init=False, repr=False)
    edge_check: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        degs = np.array([len(r) for r in self.check_rows], dtype=np.int64)
        if degs.min(initial=1) < 1:
            raise ValueError("empty check row")
        self.edge_var = np.concatenate(self.check_rows).astype(np.int64)
        self.check_ptr = np.zeros(len(self.check_rows) + 1, dtype=np.int64)
        np.cumsum(degs, out=self.check_ptr[1:])
        self.edge_check = np.repeat(np.arange(len(self.check_rows), dtype=np.int64), degs)

    @property
    def m(self) -> int:
        return len(self.check_rows)

    @property
    def rate(self) -> float:
        return self.k_msg / self.n


def _pack_rows(n: int, check_rows: list) -> np.ndarray:
    dense = np.zeros((len(check_rows), n), dtype=np.uint8)
    for i, row in enumerate(check_rows):
        dense[i, row] = 1
    return np.packbits(dense, axis=1)


def _get_bit(packed: np.ndarray, col: int) -> np.ndarray:
    return (packed[:, col >> 3] >> (7 - (col & 7))) & 1


def _rref_from_right(n: int, check_rows: list) -> tuple[list[int], list[np.ndarray]] | None:
    """GF(2) elimination preferring high-index pivot columns.

    Returns (pivot columns ascending, eliminated rows as unpacked bit arrays)
    or None when the matrix is row-rank deficient.
    """
    m = len(check_rows)
    packed = _pack_rows(n, check_rows)
    pivot_of_row: dict[int, int] = {}
    free_rows = np.ones(m, dtype=bool)
    for col in range(n - 1, -1, -1):
        bits = _get_bit(packed, col).astype(bool)
        cand = np.nonzero(bits & free_rows)[0]
        if cand.size == 0:
            continue
        r = int(cand[0])
        others = np.nonzero(bits)[0]
        others = others[others != r]
        if others.size:
            packed[others] ^= packed[r]
        free_rows[r] = False
        pivot_of_row[r] = col
        if len(pivot_of_row) == m:
            break
    if len(pivot_of_row) < m:
        return None
    unpacked = np.unpackbits(packed, axis=1, count=n)
    rows_by_pivot = sorted(pivot_of_row.items(), key=lambda rc: rc[1])
    pivots = [c for _, c in rows_by_pivot]
    rref_rows = [unpacked[r] for r, _ in rows_by_pivot]
    return pivots, rref_rows


def _from_check_rows(n: int, check_rows: list) -> LdpcCode:
    """Arrange parity columns last and derive the systematic encoder."""
    m = len(check_rows)
    k = n - m
    res = _rref_from_right(n, check_rows)
    if res is None:
        raise LdpcConstructionError("parity-check matrix is row-rank deficient")
    pivots, rref_rows = res
    pivot_set = set(pivots)
    msg_cols = [c for c in range(n) if c not in pivot_set]
    new_pos = np.empty(n, dtype=np.int64)
    for p, c in enumerate(msg_cols + pivots):
        new_pos[c] = p
    enc = np.zeros((m, k), dtype=np.uint8)
    for j, (pivot, row) in enumerate(zip(pivots, rref_rows)):
        cols = np.nonzero(row)[0]
        for c in cols:
            if c == pivot:
                continue
            enc[j, new_pos[c]] = 1
    permuted = [np.sort(new_pos[np.asarray(r)]) for r in check_rows]
    return LdpcCode(n=n, k_msg=k, check_rows=permuted, enc_matrix=enc)


def _greedy_rows(n: int, m: int, dv: int, rng: np.random.Generator, tries: int = 50) -> list:
    check_deg = np.zeros(m, dtype=np.int64)
    used_pairs: set[int] = set()
    cols: list[list[int]] = [[] for _ in range(m)]
    for _v in range(n):
        picked: np.ndarray | None = None
        for t in range(tries):
            if t == 0:
                order = np.lexsort((rng.random(m), check_deg))
                cand = order[:dv]
            else:
                cand = rng.choice(m, size=dv, replace=False)
            keys = [
                int(cand[i]) * m + int(cand[j]) if cand[i] < cand[j] else int(cand[j]) * m + int(cand[i])
                for i in range(dv)
                for j in range(i + 1, dv)
            ]
            if all(kk not in used_pairs for kk in keys):
                picked = cand
                used_pairs.update(keys)
                break
        if picked is None:  # pair budget exhausted; accept a short cycle
            picked = np.lexsort((rng.random(m), check_deg))[:dv]
        check_deg[picked] += 1
        for c in picked:
            cols[int(c)].append(_v)
    return [np.array(sorted(c), dtype=np.int64) for c in cols]


def ldpc_generate(
    n: int,
    rate: float,
    var_degree: int = 3,
    rng: np.random.Generator | None = None,
    max_attempts: int = 20,
) -> LdpcCode:
    """Generate a regular-variable-degree sparse code at the requested rate."""
    if not 0.0 < rate < 1.0:
        raise ValueError("rate must lie in (0, 1)")
    m = int(round(n * (1.0 - rate)))
    if m < var_degree:
        raise ValueError("too few checks for the requested variable degree")
    if rng is None:
        rng = np.random.default_rng()
    for _ in range(max_attempts):
        rows = _greedy_rows(n, m, var_degree, rng)
        try:
            return _from_check_rows(n, rows)
        except LdpcConstructionError:
            continue
    raise LdpcConstructionError(f"no full-rank construction in {max_attempts} attempts")


def ldpc_encode(code: LdpcCode, msg: np.ndarray) -> np.ndarray:
    """Systematic codeword: message bits first, then parity."""
    msg = np.asarray(msg)
    if msg.shape != (code.k_msg,):
        raise ValueError(f"message length {msg.shape} != {code.k_msg}")
    parity = np.dot(code.enc_matrix.astype(np.int64), msg.astype(np.int64)) % 2
    return np.concatenate([msg.astype(np.uint8), parity.astype(np.uint8)])


def syndrome(code: LdpcCode, bits: np.ndarray) -> np.ndarray:
    """Per-check parity of the given hard bits."""
    b = np.asarray(bits, dtype=np.int64)
    return np.add.reduceat(b[code.edge_var], code.check_ptr[:-1]) % 2


def syndrome_ok(code: LdpcCode, bits: np.ndarray) -> bool:
    return not syndrome(code, bits).any()


def _phi(x: np.ndarray) -> np.ndarray:
    """Self-inverse log-tanh transform -log(tanh(x/2)), stable at both ends."""
    e = np.exp(-x)
    return np.log1p(e) - np.log1p(-e)


def tanh_rule_messages(code: LdpcCode, v: np.ndarray) -> np.ndarray:
    """Check-to-variable messages for incoming per-edge LLRs v (tanh rule).

    An exactly-zero incoming LLR is an erasure: any edge whose leave-one-out
    set contains one emits 0 instead of a floored magnitude.
    """
    ptr = code.check_ptr[:-1]
    mag = np.clip(np.abs(v), _MAG_FLOOR, _MSG_CLIP)
    t = _phi(mag)
    t_ex = np.add.reduceat(t, ptr)[code.edge_check] - t
    neg = (v < 0).astype(np.int64)
    neg_ex = np.add.reduceat(neg, ptr)[code.edge_check] - neg
    sign = 1.0 - 2.0 * (neg_ex & 1)
    out = sign * _phi(np.clip(t_ex, _MAG_FLOOR, _MSG_CLIP))
    zero = (v == 0).astype(np.int64)
    zero_ex = np.add.reduceat(zero, ptr)[code.edge_check] - zero
    out[zero_ex > 0] = 0.0
    return out


def _spa(code: LdpcCode, llr: np.ndarray, max_iters: int) -> tuple[np.ndarray, bool, int]:
    lam = np.clip(np.asarray(llr, dtype=np.float64), -1e3, 1e3)
    belief = lam.copy()
    hard = (belief < 0).astype(np.uint8)
    if syndrome_ok(code, hard) and np.all(belief != 0):
        return belief, True, 0
    c_msg = np.zeros(len(code.edge_var))
    for it in range(1, max_iters + 1):
        v = belief[code.edge_var] - c_msg
        c_msg = tanh_rule_messages(code, v)
        belief = lam + np.bincount(code.edge_var, weights=c_msg, minlength=code.n)
        hard = (belief < 0).astype(np.uint8)
        if syndrome_ok(code, hard) and np.all(belief != 0):
            return belief, True, it
    return belief, False, max_iters


def ldpc_decode(code: LdpcCode, llr, max_iters: int = 50) -> tuple[np.ndarray, bool]:
    """Sum-product decoding; returns (message bits, syndrome satisfied).

    ``converged`` additionally requires every belief to be non-zero: an
    all-erasure input whose zero-tie decisions happen to form a codeword is
    not reported as converged.
    """
    arr = getattr(llr, "llr", llr)
    belief, converged, _ = _spa(code, arr, max_iters)
    return (belief[: code.k_msg] < 0).astype(np.uint8), converged


def ldpc_posterior(code: LdpcCode, llr, max_iters: int = 50) -> np.ndarray:
    """Posterior LLRs over the whole codeword (for outer iteration loops)."""
    arr = getattr(llr, "llr", llr)
    belief, _, _ = _spa(code, arr, max_iters)
    return belief


def save_code(code: LdpcCode, path) -> None:
    """Plain-text parity structure: header 'n m', then one check row per line
    of space-separated variable indices."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{code.n} {code.m}\n")
        for row in code.check_rows:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


def load_code(path) -> LdpcCode:
    """Rebuild a code (including its encoder) from the serialized structure."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        n, m = int(header[0]), int(header[1])
        rows = []
        for _ in range(m):
            rows.append(np.array([int(x) for x in fh.readline().split()], dtype=np.int64))
    return _from_check_rows(n, rows)
