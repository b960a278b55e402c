"""Belief propagation over the weighted factor graph, plus an exact ML oracle.

Check nodes are marginalized exactly: a row of degree d enumerates all 2^d
sign configurations of its neighbors against the Gaussian likelihood
exp(-(u_i - sum_j g_ij b_j)^2 / (2 sigma^2)), so no Gaussian message
approximation is involved. All likelihood products run in the log domain
with max subtraction; cost per row per iteration is O(2^d * d), which is
cheap for the flagship degree 8 (256 configurations).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .core import FactorGraph

__all__ = [
    "UnsupportedDegreeError",
    "DecoderConfig",
    "LlrVector",
    "check_to_var_messages",
    "bp_decode",
    "bp_decode_joint",
    "ml_decode_bruteforce",
    "decode_with_precode",
]

MAX_ENUM_DEGREE = 20
_BATCH_DEGREE = 14  # larger degrees fall back to per-row streaming
# The underflow floor saturates log ratios near +/-690, so any message clip
# at or below 300 guarantees a fully underflowed side still outweighs the
# subtracted incoming message: extrinsic subtraction cannot flip a saturated
# sign.
_MAX_CLIP = 300.0
_TINY = 1e-300
_ML_MAX_VARS = 20


class UnsupportedDegreeError(ValueError):
    """Row degree exceeds the exact-enumeration bound."""


@dataclass(frozen=True)
class DecoderConfig:
    """Knobs for the flooding BP loop.

    Damping 0.5 is the working default: undamped exact check updates are so
    sharp that loopy instances ping-pong between complementary fixed points
    instead of converging. llr_clip bounds message magnitude (not the output
    beliefs); 30 keeps dense graphs stable without costing measurable BER.
    """

    max_iters: int = 60
    damping: float = 0.5
    llr_clip: float = 30.0
    convergence_eps: float = 0.0  # 0 disables the belief-change stop
    stop_on_precode_valid: bool = True
    stop_on_stable_decisions: bool = True

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")
        if not 0.0 < self.llr_clip <= _MAX_CLIP:
            raise ValueError(f"llr_clip must lie in (0, {_MAX_CLIP}]")


@dataclass(frozen=True)
class LlrVector:
    """Per-variable log p(b=+1|obs)/p(b=-1|obs); ties decide +1."""

    llr: np.ndarray
    iterations: int = 0

    @property
    def hard(self) -> np.ndarray:
        return np.where(self.llr >= 0, 1.0, -1.0)

    @property
    def hard_bits(self) -> np.ndarray:
        """Bit view under the mapping bit 0 <-> +1."""
        return (self.llr < 0).astype(np.uint8)


@lru_cache(maxsize=32)
def _sign_matrix(d: int) -> np.ndarray:
    cfgs = np.arange(1 << d, dtype=np.int64)
    bits = (cfgs[:, None] >> np.arange(d)) & 1
    signs = np.where(bits == 0, 1.0, -1.0)
    signs.setflags(write=False)
    return signs


@lru_cache(maxsize=32)
def _plus_mask(d: int) -> np.ndarray:
    mask = (_sign_matrix(d) > 0).astype(np.float64)
    mask.setflags(write=False)
    return mask


@lru_cache(maxsize=32)
def _minus_mask(d: int) -> np.ndarray:
    mask = (_sign_matrix(d) < 0).astype(np.float64)
    mask.setflags(write=False)
    return mask


def check_to_var_messages(
    weights: np.ndarray,
    u_i: float,
    sigma2: float,
    incoming: np.ndarray,
    clip: float = 30.0,
) -> np.ndarray:
    """Exact outgoing check-to-variable LLRs for one row.

    incoming[t] is the variable-to-check LLR on edge t. The outgoing LLR on
    edge t marginalizes the 2^(d-1) configurations of the other neighbors,
    weighting each by the Gaussian likelihood of u_i and the priors carried
    by the incoming messages. Messages saturate at +/-clip.
    """
    w = np.asarray(weights, dtype=np.float64)
    clip = min(float(clip), _MAX_CLIP)
    lam = np.clip(np.asarray(incoming, dtype=np.float64), -clip, clip)
    d = len(w)
    if d < 1 or d > MAX_ENUM_DEGREE:
        raise UnsupportedDegreeError(f"degree {d} outside [1, {MAX_ENUM_DEGREE}]")
    if len(lam) != d:
        raise ValueError("incoming message count must match row degree")
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")

    n_cfg = 1 << d
    block = min(n_cfg, 1 << _BATCH_DEGREE)
    # pass 1: global max of the config log-weights
    m_global = -np.inf
    for start in range(0, n_cfg, block):
        base = _config_logweights(w, u_i, sigma2, lam, start, min(start + block, n_cfg), d)
        m_global = max(m_global, float(base.max()))
    # pass 2: accumulate exp sums split by the sign of each edge
    pos = np.zeros(d)
    neg = np.zeros(d)
    for start in range(0, n_cfg, block):
        stop = min(start + block, n_cfg)
        base = _config_logweights(w, u_i, sigma2, lam, start, stop, d)
        ex = np.exp(base - m_global)
        bits = ((np.arange(start, stop, dtype=np.int64)[:, None] >> np.arange(d)) & 1) == 0
        pos += ex @ bits
        neg += ex @ (~bits)
    out = np.log(np.maximum(pos, _TINY)) - np.log(np.maximum(neg, _TINY)) - lam
    return np.clip(out, -clip, clip)


def _config_logweights(w, u_i, sigma2, lam, start, stop, d) -> np.ndarray:
    cfgs = np.arange(start, stop, dtype=np.int64)
    signs = np.where(((cfgs[:, None] >> np.arange(d)) & 1) == 0, 1.0, -1.0)
    sums = signs @ w
    return -((u_i - sums) ** 2) / (2.0 * sigma2) + signs @ (lam * 0.5)


class _RowGroup:
    """Rows of one degree batched into dense index/weight matrices."""

    def __init__(self, graph: FactorGraph, rows: np.ndarray, d: int, u: np.ndarray, sigma2: float):
        offs = graph.indptr[rows][:, None] + np.arange(d)
        self.d = d
        self.idx = graph.indices[offs]
        self.w = graph.weights[offs].astype(np.float64)
        self.signs_t = _sign_matrix(d).T.copy()  # (d, 2^d)
        self.plus = _plus_mask(d)  # (2^d, d)
        self.minus = _minus_mask(d)
        sums = self.w @ self.signs_t
        self.resid = -((u[rows][:, None] - sums) ** 2) / (2.0 * sigma2)
        self.c_msg = np.zeros_like(self.w)

    def update(self, belief: np.ndarray, damping: float, clip: float) -> None:
        v = np.clip(belief[self.idx] - self.c_msg, -clip, clip)
        base = (v * 0.5) @ self.signs_t
        base += self.resid
        base -= base.max(axis=1, keepdims=True)
        np.exp(base, out=base)
        pos = base @ self.plus
        neg = base @ self.minus  # not tot - pos: that cancellation costs ~6 digits
        np.maximum(pos, _TINY, out=pos)
        np.maximum(neg, _TINY, out=neg)
        out = np.log(pos)
        out -= np.log(neg)
        out -= v
        np.clip(out, -clip, clip, out=out)
        if damping > 0.0:
            self.c_msg *= damping
            self.c_msg += (1.0 - damping) * out
        else:
            self.c_msg = out

    def accumulate(self, belief: np.ndarray) -> None:
        belief += np.bincount(self.idx.ravel(), weights=self.c_msg.ravel(), minlength=len(belief))


class _StreamRows:
    """Fallback for degrees beyond the batchable bound: per-row enumeration."""

    def __init__(self, graph: FactorGraph, rows: np.ndarray, u: np.ndarray, sigma2: float):
        self.rows = [(graph.row(int(r))[0], graph.row(int(r))[1], float(u[r])) for r in rows]
        self.sigma2 = sigma2
        self.c_msg = [np.zeros(len(r[0])) for r in self.rows]

    def update(self, belief: np.ndarray, damping: float, clip: float) -> None:
        for i, (idx, w, ui) in enumerate(self.rows):
            v = belief[idx] - self.c_msg[i]
            out = check_to_var_messages(w, ui, self.sigma2, v, clip=clip)
            if damping > 0.0:
                self.c_msg[i] = damping * self.c_msg[i] + (1.0 - damping) * out
            else:
                self.c_msg[i] = out

    def accumulate(self, belief: np.ndarray) -> None:
        for (idx, _, _), c in zip(self.rows, self.c_msg):
            np.add.at(belief, idx, c)


def bp_decode(
    graph: FactorGraph,
    u: np.ndarray,
    sigma2: float,
    cfg: DecoderConfig | None = None,
    prior: np.ndarray | None = None,
    stop_check: Callable[[np.ndarray], bool] | None = None,
) -> LlrVector:
    """Flooding-schedule BP returning posterior LLRs for every variable.

    ``prior`` supplies per-variable input LLRs (zeros when absent); it is the
    hook the precode loop uses. ``stop_check`` sees the current hard decisions
    (+/-1) after every iteration and may stop the decoder early. Deterministic
    given its inputs.
    """
    cfg = cfg or DecoderConfig()
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (graph.m,):
        raise ValueError(f"observation length {u.shape} does not match rows {graph.m}")
    if not np.all(np.isfinite(u)):
        raise ValueError("non-finite observation")
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    degrees = graph.row_degrees()
    if graph.m and int(degrees.max()) > MAX_ENUM_DEGREE:
        raise UnsupportedDegreeError(
            f"row degree {int(degrees.max())} exceeds enumeration bound {MAX_ENUM_DEGREE}"
        )
    prior = np.zeros(graph.k) if prior is None else np.asarray(prior, dtype=np.float64).copy()
    if prior.shape != (graph.k,):
        raise ValueError("prior length must equal k")

    groups: list = []
    for d in np.unique(degrees) if graph.m else []:
        rows = np.nonzero(degrees == d)[0]
        if d <= _BATCH_DEGREE:
            groups.append(_RowGroup(graph, rows, int(d), u, sigma2))
        else:
            groups.append(_StreamRows(graph, rows, u, sigma2))

    belief = prior.copy()
    prev_hard: np.ndarray | None = None
    prev_belief: np.ndarray | None = None
    stable = 0
    iterations = 0
    for it in range(cfg.max_iters):
        for g in groups:
            g.update(belief, cfg.damping, cfg.llr_clip)
        belief = prior.copy()
        for g in groups:
            g.accumulate(belief)
        iterations = it + 1
        hard = np.where(belief >= 0, 1.0, -1.0)
        if stop_check is not None and stop_check(hard):
            break
        if cfg.stop_on_stable_decisions:
            if prev_hard is not None and np.array_equal(hard, prev_hard):
                stable += 1
                if stable >= 2:
                    break
            else:
                stable = 0
        if cfg.convergence_eps > 0 and prev_belief is not None:
            if float(np.max(np.abs(belief - prev_belief))) < cfg.convergence_eps:
                break
        prev_hard = hard
        prev_belief = belief
    return LlrVector(llr=belief, iterations=iterations)


def ml_decode_bruteforce(graph: FactorGraph, u: np.ndarray) -> np.ndarray:
    """Exact minimizer of ||u - G b||^2 over b in {-1,+1}^k.

    Refuses k > 20 (2^k candidates). Ties resolve to the lexicographically
    smallest vector counting +1 before -1, so the all-(+1) word wins when
    everything is equivalent.
    """
    if graph.k > _ML_MAX_VARS:
        raise ValueError(f"brute force limited to k <= {_ML_MAX_VARS}, got {graph.k}")
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (graph.m,):
        raise ValueError("observation length mismatch")
    k = graph.k
    g_dense = graph.dense()
    best_val = np.inf
    best: np.ndarray | None = None
    shifts = k - 1 - np.arange(k)
    chunk = 1 << 16
    for start in range(0, 1 << k, chunk):
        cand = np.arange(start, min(start + chunk, 1 << k), dtype=np.int64)
        bits = (cand[:, None] >> shifts) & 1
        b = 1.0 - 2.0 * bits
        resid = u[None, :] - b @ g_dense.T
        d2 = np.einsum("ij,ij->i", resid, resid)
        i = int(np.argmin(d2))
        if d2[i] < best_val:
            best_val = float(d2[i])
            best = b[i]
    assert best is not None
    return best


def bp_decode_joint(
    graph: FactorGraph,
    u: np.ndarray,
    sigma2: float,
    code,
    cfg: DecoderConfig | None = None,
) -> LlrVector:
    """BP over the combined graph: fountain rows plus outer parity checks.

    Both kinds of check nodes update every iteration against the shared
    variable beliefs. The hard parity constraints resolve variables the
    analog rows leave ambiguous, which is what lets the system run close
    to capacity instead of stalling at the per-bit marginal limit of the
    pipelined split. Stops once the outer syndrome is satisfied (when
    ``cfg.stop_on_precode_valid``) or decisions stay stable.
    """
    from .precoder import syndrome_ok, tanh_rule_messages

    cfg = cfg or DecoderConfig()
    if code.n != graph.k:
        raise ValueError(f"outer codeword length {code.n} != graph variables {graph.k}")
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (graph.m,):
        raise ValueError("observation length mismatch")
    if not np.all(np.isfinite(u)):
        raise ValueError("non-finite observation")
    degrees = graph.row_degrees()
    if graph.m and int(degrees.max()) > MAX_ENUM_DEGREE:
        raise UnsupportedDegreeError("row degree exceeds enumeration bound")

    groups: list = []
    for d in np.unique(degrees) if graph.m else []:
        rows = np.nonzero(degrees == d)[0]
        if d <= _BATCH_DEGREE:
            groups.append(_RowGroup(graph, rows, int(d), u, sigma2))
        else:
            groups.append(_StreamRows(graph, rows, u, sigma2))

    c_outer = np.zeros(len(code.edge_var))
    belief = np.zeros(graph.k)
    prev_hard: np.ndarray | None = None
    stable = 0
    iterations = 0
    for it in range(cfg.max_iters):
        for g in groups:
            g.update(belief, cfg.damping, cfg.llr_clip)
        v = np.clip(belief[code.edge_var] - c_outer, -cfg.llr_clip, cfg.llr_clip)
        new_c = tanh_rule_messages(code, v)
        if cfg.damping > 0.0:
            c_outer = cfg.damping * c_outer + (1.0 - cfg.damping) * new_c
        else:
            c_outer = new_c
        belief = np.bincount(code.edge_var, weights=c_outer, minlength=graph.k)
        for g in groups:
            g.accumulate(belief)
        iterations = it + 1
        hard_bits = (belief < 0).astype(np.uint8)
        if cfg.stop_on_precode_valid and syndrome_ok(code, hard_bits):
            break
        if cfg.stop_on_stable_decisions:
            if prev_hard is not None and np.array_equal(hard_bits, prev_hard):
                stable += 1
                if stable >= 4:
                    break
            else:
                stable = 0
        prev_hard = hard_bits
    return LlrVector(llr=belief, iterations=iterations)


def decode_with_precode(
    graph: FactorGraph,
    u: np.ndarray,
    sigma2: float,
    cfg: DecoderConfig,
    code,
    ldpc_iters: int = 50,
    joint_rounds: int = 0,
    interleave: bool = False,
):
    """Recover message bits through the outer high-rate code.

    Default is the pipelined pass: BP over the fountain graph (whose k
    variables are the outer codeword bits), then the outer decoder.
    ``joint_rounds`` > 0 feeds outer extrinsics back as priors for further
    fountain BP rounds. ``interleave=True`` instead runs the fully combined
    schedule of ``bp_decode_joint``, which is the high-throughput
    configuration the experiment harness uses.
    """
    from .precoder import ldpc_decode, ldpc_posterior, syndrome_ok

    if code.n != graph.k:
        raise ValueError(f"outer codeword length {code.n} != graph variables {graph.k}")

    if interleave:
        result = bp_decode_joint(graph, u, sigma2, code, cfg)
        bits, _converged = ldpc_decode(code, result.llr, ldpc_iters)
        return bits

    stop = None
    if cfg.stop_on_precode_valid:
        def stop(hard: np.ndarray) -> bool:
            return syndrome_ok(code, (hard < 0).astype(np.uint8))

    result = bp_decode(graph, u, sigma2, cfg, stop_check=stop)
    llr = result.llr
    for _ in range(joint_rounds):
        posterior = ldpc_posterior(code, llr, ldpc_iters)
        extrinsic = posterior - llr
        result = bp_decode(graph, u, sigma2, cfg, prior=extrinsic, stop_check=stop)
        llr = result.llr
    bits, _converged = ldpc_decode(code, llr, ldpc_iters)
    return bits
