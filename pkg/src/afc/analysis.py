"""Closed-form analysis behind weight-set design.

Covers four related questions about a weight set W = {a_1..a_f} used to form
real-valued coded symbols sum_j b_j w_j with b_j in {-1,+1}:

* how likely a competitor message beats the transmitted one in Euclidean
  distance over AWGN (``pairwise_error_prob``),
* whether any signed sub-selection of weights can sum to zero, the algebraic
  condition that makes a single row pin all of its neighbors
  (``check_nonzero_condition``),
* the probability that the signed binary equation sum b_i w_i = u fails to
  have a unique solution, computed both by a closed-form recursion
  (``ambiguity_recursion``) and by exhaustive counting
  (``unique_solution_oracle``), exactly in rational arithmetic,
* how close the coded-symbol distribution is to a Gaussian, bin by bin
  (``gaussian_fit_check``), plus a search loop that proposes candidate sets
  until both conditions hold (``search_weight_set``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from itertools import product
from typing import NamedTuple, Sequence

import numpy as np
from scipy import special

from .core import (
    FactorGraph,
    WeightAssignment,
    WeightSet,
    reciprocal_weights,
    weight_second_moment,
)

__all__ = [
    "DegenerateEquationError",
    "EnumerationCapError",
    "WeightSearchError",
    "ConditionCheck",
    "UniqueSolutionReport",
    "ShapingBin",
    "ShapingReport",
    "CandidateFamily",
    "q_function",
    "pairwise_error_prob",
    "check_nonzero_condition",
    "extension_collision_prob",
    "ambiguity_recursion",
    "unique_solution_oracle",
    "unique_solution_fraction",
    "signed_sum_table",
    "gaussian_fit_check",
    "search_weight_set",
    "error_floor_bound",
]

_FLOAT_ZERO_TOL = 1e-12
_ENUM_CAP = 2_000_000
_ORACLE_MAX_VARS = 20


class DegenerateEquationError(ValueError):
    """Every sign assignment sums to zero; conditional probabilities undefined."""


class EnumerationCapError(ValueError):
    """Exhaustive enumeration would exceed the configured cap."""


class WeightSearchError(RuntimeError):
    """No candidate weight set passed both design conditions within budget."""

    def __init__(self, message: str, attempts: int) -> None:
        super().__init__(message)
        self.attempts = attempts


def q_function(x):
    """Upper-tail probability of the standard normal, Q(x)."""
    arr = np.asarray(x, dtype=np.float64)
    out = 0.5 * special.erfc(arr / math.sqrt(2.0))
    if arr.ndim == 0:
        return float(out)
    return out


def error_floor_bound(alpha: float) -> float:
    """Residual error probability floor exp(-alpha) under uniform selection.

    alpha is the average variable-node degree; exp(-alpha) is the chance a
    variable stays disconnected from every coded symbol.
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    return math.exp(-alpha)


def pairwise_error_prob(
    graph: FactorGraph,
    b: np.ndarray,
    flip_set: Sequence[int],
    sigma: float,
) -> float:
    """Probability that flipping ``flip_set`` bits of b yields a closer competitor.

    Equals Q(sqrt(sum_i (sum_{j in flips} b_j g_ij)^2) / sigma): the noise must
    project far enough along the difference direction between the two
    candidate codewords.
    """
    flips = np.unique(np.asarray(flip_set, dtype=np.int64))
    if flips.size == 0:
        raise ValueError("flip set must be non-empty")
    if flips.min() < 0 or flips.max() >= graph.k:
        raise ValueError("flip index out of range")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    b = np.asarray(b, dtype=np.float64)
    mask = np.zeros(graph.k)
    mask[flips] = 1.0
    contrib = graph.weights * b[graph.indices] * mask[graph.indices]
    if graph.m == 0:
        return 0.5
    t = np.add.reduceat(contrib, graph.indptr[:-1])
    return q_function(math.sqrt(float(np.dot(t, t))) / sigma)


# ---------------------------------------------------------------------------
# exact signed-sum machinery
# ---------------------------------------------------------------------------


def _to_exact(values: Sequence) -> tuple[Fraction, ...] | None:
    """Fractions for inputs that are exactly representable, else None."""
    out = []
    for v in values:
        if isinstance(v, Fraction):
            out.append(v)
        elif isinstance(v, (int, np.integer)):
            out.append(Fraction(int(v)))
        elif isinstance(v, float) and v.is_integer():
            out.append(Fraction(int(v)))
        else:
            return None
    return tuple(out)


def _exact_weights(ws: WeightSet) -> tuple[Fraction, ...] | None:
    if ws.exact is not None:
        return ws.exact
    return _to_exact(ws.values)


def _exact_probs(ws: WeightSet) -> tuple[Fraction, ...]:
    if ws.uniform:
        return tuple(Fraction(1, ws.f) for _ in range(ws.f))
    return tuple(Fraction(p) for p in ws.probs)


def _half_sums(weights: Sequence, zero) -> dict:
    sums = {zero: 1}
    for w in weights:
        nxt: dict = {}
        for s, c in sums.items():
            for t in (s + w, s - w):
                nxt[t] = nxt.get(t, 0) + c
        sums = nxt
    return sums


def signed_sum_table(weights: Sequence) -> dict:
    """Multiplicity of every attainable value of sum_i b_i w_i over b in {-1,1}^l.

    Meet-in-the-middle: O(2^(l/2)) enumeration per half, then a convolution of
    the two half-tables. Exact when weights are Fractions or integers.
    """
    l = len(weights)
    if l < 1:
        raise ValueError("need at least one weight")
    if l > _ORACLE_MAX_VARS:
        raise EnumerationCapError(f"{l} variables exceeds the enumeration bound {_ORACLE_MAX_VARS}")
    zero = weights[0] * 0
    half = l // 2
    left = _half_sums(list(weights[:half]), zero)
    right = _half_sums(list(weights[half:]), zero)
    table: dict = {}
    for a, ca in left.items():
        for bb, cb in right.items():
            s = a + bb
            table[s] = table.get(s, 0) + ca * cb
    return table


def unique_solution_oracle(weights: Sequence, u) -> int:
    """Exhaustive count of sign vectors b with sum_i b_i w_i == u."""
    l = len(weights)
    if l > _ORACLE_MAX_VARS:
        raise EnumerationCapError(f"{l} variables exceeds the enumeration bound {_ORACLE_MAX_VARS}")
    exact = _to_exact(weights)
    if exact is not None and not isinstance(u, float):
        table = signed_sum_table(exact)
        return table.get(Fraction(u), 0)
    table = signed_sum_table([float(w) for w in weights])
    return sum(c for s, c in table.items() if abs(s - float(u)) <= _FLOAT_ZERO_TOL)


def unique_solution_fraction(weights: Sequence) -> Fraction:
    """Fraction of sign vectors whose sum identifies them uniquely."""
    exact = _to_exact(weights)
    if exact is None:
        raise ValueError("exact fraction requires rational weights")
    table = signed_sum_table(exact)
    unique = sum(1 for c in table.values() if c == 1)
    return Fraction(unique, 2 ** len(weights))


# ---------------------------------------------------------------------------
# zero-sum condition
# ---------------------------------------------------------------------------


class ConditionCheck(NamedTuple):
    ok: bool
    witness: tuple[tuple[int, object], ...] | None

    def __bool__(self) -> bool:  # allows `if check_nonzero_condition(...):`
        return self.ok


def _enumerate_coefficients(values: Sequence, max_nonzero: int, exact: bool) -> ConditionCheck:
    n = len(values)
    if 3**n > _ENUM_CAP:
        raise EnumerationCapError(
            f"3^{n} coefficient vectors exceed the enumeration cap; "
            "spot-check with random sampling instead"
        )
    for coeffs in product((-1, 0, 1), repeat=n):
        nnz = sum(1 for c in coeffs if c)
        if nnz == 0 or nnz > max_nonzero:
            continue
        s = sum(c * v for c, v in zip(coeffs, values))
        zero = (s == 0) if exact else (abs(s) <= _FLOAT_ZERO_TOL)
        if zero:
            witness = tuple((c, v) for c, v in zip(coeffs, values) if c)
            return ConditionCheck(False, witness)
    return ConditionCheck(True, None)


def check_nonzero_condition(
    weights,
    d: int | None = None,
    assignment: WeightAssignment = WeightAssignment.WITHOUT_REPLACEMENT,
) -> ConditionCheck:
    """Certify that no signed sub-selection of row weights sums to zero.

    Accepts either a WeightSet (rows draw up to ``d`` members under
    ``assignment``) or an explicit row template of signed weights, possibly
    with repeats. Returns the violating signed assignment when one exists.
    Rational weights are checked in exact arithmetic; floats fall back to a
    1e-12 zero tolerance.
    """
    if isinstance(weights, WeightSet):
        ws = weights
        d = ws.f if d is None else d
        if d < 1:
            raise ValueError("degree must be >= 1")
        if assignment is WeightAssignment.WITH_REPLACEMENT and d >= 2:
            w0 = (ws.exact or ws.values)[0]
            return ConditionCheck(False, ((1, w0), (-1, w0)))
        exact_vals = _exact_weights(ws)
        if exact_vals is not None:
            return _enumerate_coefficients(exact_vals, d, exact=True)
        return _enumerate_coefficients(ws.values, d, exact=False)

    template = list(weights)
    if d is not None and d != len(template):
        raise ValueError("row template length must equal its degree")
    exact_vals = _to_exact(template)
    if exact_vals is not None:
        return _enumerate_coefficients(exact_vals, len(template), exact=True)
    return _enumerate_coefficients(template, len(template), exact=False)


# ---------------------------------------------------------------------------
# unique-solution probability
# ---------------------------------------------------------------------------


def extension_collision_prob(weights: Sequence, ws: WeightSet):
    """Probability that appending one more set member breaks uniqueness.

    For fixed equation weights w_1..w_l and a fresh weight drawn from ``ws``,
    the appended equation loses uniqueness exactly when the new member
    collides with the magnitude of the running signed sum (and the new sign
    flips it to zero, hence the factor 1/2). The magnitude distribution is
    conditioned on the sum being non-zero.
    """
    l = len(weights)
    if l < 2:
        raise ValueError("need at least two equation weights")
    exact_vals = _to_exact(weights)
    set_vals = _exact_weights(ws)
    if exact_vals is not None and set_vals is not None:
        table = signed_sum_table(exact_vals)
        tot = 2**l
        p_zero = Fraction(table.get(Fraction(0), 0), tot)
        if p_zero == 1:
            raise DegenerateEquationError("every sign assignment sums to zero")
        probs = _exact_probs(ws)
        acc = Fraction(0)
        for q, a in zip(probs, set_vals):
            hits = table.get(a, 0) + table.get(-a, 0)
            acc += q * Fraction(hits, tot) / (1 - p_zero)
        return acc / 2

    fvals = [float(w) for w in weights]
    table = signed_sum_table(fvals)
    tot = float(2**l)
    p_zero = sum(c for s, c in table.items() if abs(s) <= _FLOAT_ZERO_TOL) / tot
    if p_zero >= 1.0:
        raise DegenerateEquationError("every sign assignment sums to zero")
    acc = 0.0
    for q, a in zip(ws.probs, ws.values):
        hits = sum(c for s, c in table.items() if abs(abs(s) - a) <= _FLOAT_ZERO_TOL)
        acc += q * (hits / tot) / (1.0 - p_zero)
    return acc / 2.0


@dataclass(frozen=True)
class UniqueSolutionReport:
    """Trace of the non-uniqueness recursion up to equation size l."""

    l: int
    e_l: object
    E_trace: tuple
    e_trace: tuple

    @property
    def unique_fraction(self):
        return 1 - self.e_l


def _point_mass(value) -> WeightSet:
    if isinstance(value, Fraction):
        return WeightSet((float(value),), (1.0,), (value,))
    return WeightSet((float(value),), (1.0,))


def ambiguity_recursion(weights: Sequence, l_max: int, ws: WeightSet | None = None) -> UniqueSolutionReport:
    """Non-uniqueness probability e_l of sum_{i<=l} b_i w_i = u, built recursively.

    Base case: e_2 = 1/2 if the first two weights are equal, else 0. Each
    growth step multiplies the survival probability by (1 - E) where E is the
    collision probability of the appended weight. With ``ws`` given, E
    averages the appended weight over the set (the ensemble the weights were
    drawn from); otherwise the realized weights[l] is used, which reproduces
    the exhaustive per-tuple count for generic tuples.
    """
    if l_max < 2:
        raise ValueError("l_max must be >= 2")
    if len(weights) < l_max:
        raise ValueError("need l_max weights")
    exact_vals = _to_exact(weights[:l_max])
    vals: Sequence = exact_vals if exact_vals is not None else [float(w) for w in weights[:l_max]]
    if exact_vals is not None:
        e = Fraction(1, 2) if vals[0] == vals[1] else Fraction(0)
    else:
        e = 0.5 if abs(vals[0] - vals[1]) <= _FLOAT_ZERO_TOL else 0.0
    e_trace = [e]
    E_trace = []
    for l in range(2, l_max):
        step_ws = ws if ws is not None else _point_mass(vals[l])
        E = extension_collision_prob(vals[:l], step_ws)
        e = 1 - (1 - E) * (1 - e)
        E_trace.append(E)
        e_trace.append(e)
    return UniqueSolutionReport(l=l_max, e_l=e, E_trace=tuple(E_trace), e_trace=tuple(e_trace))


# ---------------------------------------------------------------------------
# Gaussian shaping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShapingBin:
    index: int
    p_hat: float
    q_ref: float
    gap_sq: float
    tol_sq: float

    @property
    def ok(self) -> bool:
        return self.gap_sq <= self.tol_sq


@dataclass(frozen=True)
class ShapingReport:
    """Per-bin comparison of the standardized coded-symbol law to the Gaussian."""

    delta: float
    eps: float
    n_samples: int
    bins: tuple[ShapingBin, ...]
    satisfied: bool

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("bin_index,p_hat,q_ref,gap_sq\n")
            for b in self.bins:
                fh.write(f"{b.index},{b.p_hat!r},{b.q_ref!r},{b.gap_sq!r}\n")


def _sample_symbol_sums(
    ws: WeightSet,
    d: int,
    count: int,
    assignment: WeightAssignment,
    rng: np.random.Generator,
) -> np.ndarray:
    values = ws.as_array()
    f = ws.f
    if assignment is WeightAssignment.PERMUTATION_OF_SET or (
        assignment is WeightAssignment.WITHOUT_REPLACEMENT and d == f
    ):
        if d != f:
            raise ValueError("permutation assignment requires d == f")
        # every row carries all f values; only the signs matter for the sum
        signs = rng.integers(0, 2, size=(count, f)).astype(np.float64) * 2.0 - 1.0
        return signs @ values
    if assignment is WeightAssignment.WITHOUT_REPLACEMENT:
        if d > f:
            raise ValueError("degree exceeds weight set size")
        if not ws.uniform:
            raise ValueError("non-uniform draw without replacement is not supported here")
        cols = np.argsort(rng.random((count, f)), axis=1)[:, :d]
        rows = values[cols]
    else:
        rows = rng.choice(values, size=(count, d), p=ws.probs)
    signs = rng.integers(0, 2, size=(count, d)).astype(np.float64) * 2.0 - 1.0
    return (rows * signs).sum(axis=1)


def gaussian_fit_check(
    ws: WeightSet,
    d: int,
    delta: float,
    eps: float,
    n_samples: int,
    rng: np.random.Generator,
    assignment: WeightAssignment = WeightAssignment.WITH_REPLACEMENT,
    q_floor: float = 1e-6,
) -> ShapingReport:
    """Monte Carlo bin-by-bin Gaussian fit of the standardized symbol sum.

    The signed sum is divided by sqrt(d * E[w^2]) before binning so its
    variance is 1; bin i covers [(i-1)*delta, i*delta) and is compared to the
    Gaussian mass Q((i-1)*delta) - Q(i*delta). Bins are evaluated until the
    Gaussian mass drops below ``q_floor``. A bin passes when
    |p_hat - q| <= sqrt(eps) + 3 binomial sigma.

    The default draws each of the d signed weights i.i.d. from the set, the
    same model under which the symbol variance d * E[w^2] is derived. Forcing
    all d = f members into every row (permutation assignment) concentrates the
    sum on 2^f atoms and measurably worsens the Gaussian fit.
    """
    if delta <= 0 or eps <= 0:
        raise ValueError("delta and eps must be positive")
    if n_samples < 1:
        raise ValueError("need at least one sample")
    scale = math.sqrt(d * weight_second_moment(ws))
    q_refs = []
    i = 1
    while True:
        q_i = q_function((i - 1) * delta) - q_function(i * delta)
        if q_i < q_floor:
            break
        q_refs.append(q_i)
        i += 1
    edges = np.arange(len(q_refs) + 1) * delta
    counts = np.zeros(len(q_refs), dtype=np.int64)
    remaining = n_samples
    chunk = 1_000_000
    while remaining > 0:
        take = min(chunk, remaining)
        sums = _sample_symbol_sums(ws, d, take, assignment, rng) / scale
        counts += np.histogram(sums, bins=edges)[0]
        remaining -= take
    bins = []
    all_ok = True
    for idx, (cnt, q_i) in enumerate(zip(counts, q_refs), start=1):
        p_hat = cnt / n_samples
        sigma_bin = math.sqrt(q_i * (1.0 - q_i) / n_samples)
        tol = math.sqrt(eps) + 3.0 * sigma_bin
        rec = ShapingBin(
            index=idx,
            p_hat=float(p_hat),
            q_ref=float(q_i),
            gap_sq=float((p_hat - q_i) ** 2),
            tol_sq=float(tol * tol),
        )
        all_ok = all_ok and rec.ok
        bins.append(rec)
    return ShapingReport(
        delta=delta,
        eps=eps,
        n_samples=n_samples,
        bins=tuple(bins),
        satisfied=all_ok,
    )


# ---------------------------------------------------------------------------
# weight-set search
# ---------------------------------------------------------------------------


class CandidateFamily(Enum):
    RECIPROCAL_PRIMES = "reciprocal-primes"
    RECIPROCAL_INTEGERS = "reciprocal-integers"
    RANDOM_RATIONAL = "random-rational"


def _primes(count: int) -> list[int]:
    out: list[int] = []
    n = 2
    while len(out) < count:
        if all(n % p for p in out if p * p <= n):
            out.append(n)
        n += 1
    return out


def _propose(family: CandidateFamily, f: int, attempt: int, rng: np.random.Generator) -> WeightSet:
    if family is CandidateFamily.RECIPROCAL_PRIMES:
        primes = _primes(f + attempt)
        return reciprocal_weights(primes[attempt : attempt + f])
    if family is CandidateFamily.RECIPROCAL_INTEGERS:
        dens = rng.choice(np.arange(2, 121), size=f, replace=False)
        return reciprocal_weights(sorted(int(x) for x in dens))
    nums = rng.integers(1, 25, size=f)
    dens = rng.integers(2, 49, size=f)
    fracs = []
    for a, b in zip(nums, dens):
        fr = Fraction(int(a), int(b))
        if fr not in fracs:
            fracs.append(fr)
    while len(fracs) < f:
        fr = Fraction(int(rng.integers(1, 25)), int(rng.integers(2, 49)))
        if fr not in fracs:
            fracs.append(fr)
    fracs.sort(reverse=True)
    return WeightSet(
        values=tuple(float(x) for x in fracs),
        probs=tuple(1.0 / f for _ in fracs),
        exact=tuple(fracs),
    )


def search_weight_set(
    f: int,
    d: int,
    delta: float,
    eps: float,
    family: CandidateFamily,
    rng: np.random.Generator,
    budget: int = 64,
    n_samples: int = 2_000_000,
    condition_assignment: WeightAssignment = WeightAssignment.WITHOUT_REPLACEMENT,
    shaping_assignment: WeightAssignment = WeightAssignment.WITH_REPLACEMENT,
) -> WeightSet:
    """Propose candidate sets until one passes both design conditions.

    The zero-sum condition is checked under the encoder's draw policy
    (distinct members per row); the Gaussian fit under the i.i.d. model the
    shaping analysis assumes. Deterministic for a fixed generator state.
    Raises WeightSearchError once the proposal budget is exhausted.
    """
    if f < 1 or d < 1:
        raise ValueError("f and d must be >= 1")
    for attempt in range(budget):
        candidate = _propose(family, f, attempt, rng)
        if d > candidate.f:
            raise ValueError("degree exceeds candidate set size")
        cond = check_nonzero_condition(candidate, d, condition_assignment)
        if not cond.ok:
            continue
        shaping = gaussian_fit_check(candidate, d, delta, eps, n_samples, rng, shaping_assignment)
        if shaping.satisfied:
            return candidate
    raise WeightSearchError(
        f"no weight set with f={f}, d={d} passed both conditions in {budget} proposals",
        attempts=budget,
    )
