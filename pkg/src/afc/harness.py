"""Seeded Monte Carlo experiment driver.

Two sweep types: BER versus rate at fixed SNR (three encoder variants), and
achievable rate versus SNR at a target BER (bisection over the number of
coded symbols). Every random draw comes from a named substream of the run
seed, so re-running a config reproduces its CSV byte for byte and extending
a sweep never disturbs completed points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import rng as rngmod
from .channel import ChannelParams, capacity_bits, pair_complex, transmit
from .core import (
    DegreeDistribution,
    EncoderPolicy,
    Selection,
    WeightAssignment,
    WeightSet,
    bits_to_bpsk,
    build_graph,
    encode,
    power_scale,
    reciprocal_prime_weights,
)
from .decoder import DecoderConfig, bp_decode, bp_decode_joint
from .precoder import LdpcCode, ldpc_decode, ldpc_encode, ldpc_generate

__all__ = [
    "ExperimentConfig",
    "SweepPoint",
    "SweepResult",
    "VARIANTS",
    "run_ber_sweep",
    "run_throughput_sweep",
    "emit_csv",
    "parse_csv",
    "parse_config_file",
    "resolve_weight_set",
]

VARIANTS = ("uniform", "min-degree", "min-degree+precode")

# noiseless frames are decoded at a tiny fixed variance; exact recovery only
# needs sigma well below the minimum gap between distinct row sums
NOISELESS_DECODE_SIGMA2 = 1e-12

CSV_COLUMNS = ("snr_db", "n_symbols", "rate_bits_per_cu", "ber", "fer", "trials", "seed")


@dataclass(frozen=True)
class ExperimentConfig:
    k_msg: int = 1000
    precode_rate: float = 0.95
    degree: int = 8
    weight_set: str = "reciprocal-primes"
    assignment: str = "balanced-permutation"
    variants: tuple[str, ...] = VARIANTS
    snr_db: tuple[float, ...] = (15.0,)
    rates: tuple[float, ...] | None = None
    target_ber: float = 1e-4
    trials: int = 100
    seed: int = 0
    out: str | None = None
    noiseless: bool = False
    per_complex_noise: bool = False
    gnuplot: bool = False
    max_iters: int = 150
    damping: float = 0.5
    interleave: bool = True
    ldpc_var_degree: int = 3
    min_error_events: int = 50
    max_trial_factor: int = 10
    n_budget_factor: int = 8

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.rates is not None and any(b <= a for a, b in zip(self.rates, self.rates[1:])):
            raise ValueError("rate grid must be strictly increasing")
        for v in self.variants:
            if v not in VARIANTS:
                raise ValueError(f"unknown variant {v!r}")
        if not 0.0 < self.target_ber < 1.0:
            raise ValueError("target_ber must lie in (0, 1)")


@dataclass
class SweepPoint:
    snr_db: float
    n_symbols: int
    rate_bits_per_cu: float
    ber: float
    fer: float
    trials: int
    seed: int
    bit_errors: int = 0
    frame_errors: int = 0
    avg_iters: float = 0.0
    low_confidence: bool = False
    reached: bool = True

    def csv_row(self) -> tuple:
        return (
            self.snr_db,
            self.n_symbols,
            self.rate_bits_per_cu,
            self.ber,
            self.fer,
            self.trials,
            self.seed,
        )


@dataclass
class SweepResult:
    variant: str
    points: list[SweepPoint] = field(default_factory=list)


def resolve_weight_set(spec: str) -> WeightSet:
    """Weight set from its config name: 'reciprocal-primes' or values like '1/2,1/3'."""
    if spec == "reciprocal-primes":
        return reciprocal_prime_weights()
    parts = [p.strip() for p in spec.split(",") if p.strip()]
    fracs = [Fraction(p) for p in parts]
    return WeightSet(
        values=tuple(float(x) for x in fracs),
        probs=tuple(1.0 / len(fracs) for _ in fracs),
        exact=tuple(fracs),
    )


class _VariantSetup:
    """Frozen per-variant objects shared by all trials of a sweep."""

    def __init__(self, cfg: ExperimentConfig, variant: str):
        self.variant = variant
        self.ws = resolve_weight_set(cfg.weight_set)
        self.dist = DegreeDistribution.fixed(cfg.degree)
        self.scale = power_scale(self.dist, self.ws)
        selection = Selection.UNIFORM_RANDOM if variant == "uniform" else Selection.MIN_DEGREE_FIRST
        self.policy = EncoderPolicy(selection, WeightAssignment(cfg.assignment))
        self.precoded = variant.endswith("+precode")
        if self.precoded:
            n = int(round(cfg.k_msg / cfg.precode_rate))
            code_rng = rngmod.substream(cfg.seed, rngmod.GRAPH, 0xC0DE)
            self.code: LdpcCode | None = ldpc_generate(n, cfg.precode_rate, cfg.ldpc_var_degree, code_rng)
            self.k_afc = self.code.n
            self.k_msg = self.code.k_msg
        else:
            self.code = None
            self.k_afc = cfg.k_msg
            self.k_msg = cfg.k_msg
        self.dec_cfg = DecoderConfig(max_iters=cfg.max_iters, damping=cfg.damping)


def _run_frame(
    cfg: ExperimentConfig,
    setup: _VariantSetup,
    n_symbols: int,
    snr_db: float,
    point_tag: int,
    trial: int,
) -> tuple[int, int]:
    """One frame; returns (bit errors in the message, decoder iterations)."""
    seed = cfg.seed
    graph_rng = rngmod.substream(seed, rngmod.GRAPH, point_tag, trial)
    msg_rng = rngmod.substream(seed, rngmod.MESSAGE, point_tag, trial)
    noise_rng = rngmod.substream(seed, rngmod.NOISE, point_tag, trial)

    graph = build_graph(setup.k_afc, n_symbols, setup.dist, setup.ws, setup.policy, graph_rng)
    msg = msg_rng.integers(0, 2, setup.k_msg).astype(np.uint8)
    codeword = ldpc_encode(setup.code, msg) if setup.code is not None else msg
    bpsk = bits_to_bpsk(codeword)
    coded = encode(graph, bpsk) * setup.scale
    params = ChannelParams(snr_db, noiseless=cfg.noiseless, per_complex_noise=cfg.per_complex_noise)
    observed = transmit(coded, params, noise_rng)

    if cfg.noiseless:
        sigma2_eff = NOISELESS_DECODE_SIGMA2
    else:
        sigma2_eff = params.sigma2 / (setup.scale * setup.scale)
    u_eff = observed / setup.scale

    if setup.code is not None:
        if cfg.interleave:
            result = bp_decode_joint(graph, u_eff, sigma2_eff, setup.code, setup.dec_cfg)
        else:
            result = bp_decode(graph, u_eff, sigma2_eff, setup.dec_cfg)
        bits, _ = ldpc_decode(setup.code, result.llr)
        errors = int(np.sum(bits != msg))
    else:
        result = bp_decode(graph, u_eff, sigma2_eff, setup.dec_cfg)
        errors = int(np.sum(result.hard_bits != msg))
    return errors, result.iterations


def _measure_point(
    cfg: ExperimentConfig,
    setup: _VariantSetup,
    n_symbols: int,
    snr_db: float,
    point_tag: int,
    abort_ber: float | None = None,
    extend: bool = True,
) -> SweepPoint:
    """Monte Carlo BER at one (variant, N, SNR) point with adaptive trials.

    Runs cfg.trials frames, then (when ``extend``) keeps going up to
    max_trial_factor x until the point holds min_error_events bit errors;
    points still short of that are flagged low-confidence. With
    ``abort_ber``, stops early once the error count already forces the
    estimate above it (bisection probes discard hopeless points quickly).
    """
    bit_errors = 0
    frame_errors = 0
    iters_total = 0
    trials_run = 0
    max_trials = cfg.trials * cfg.max_trial_factor if extend else cfg.trials
    while True:
        errors, iters = _run_frame(cfg, setup, n_symbols, snr_db, point_tag, trials_run)
        trials_run += 1
        bit_errors += errors
        frame_errors += int(errors > 0)
        iters_total += iters
        if abort_ber is not None and trials_run >= 8:
            # even error-free remaining trials cannot pull the estimate back
            floor_est = bit_errors / (cfg.trials * setup.k_msg)
            if floor_est > 4.0 * abort_ber:
                break
        if trials_run < cfg.trials:
            continue
        ber_so_far = bit_errors / (trials_run * setup.k_msg)
        if bit_errors >= cfg.min_error_events or ber_so_far > 1e-3:
            break
        if trials_run >= max_trials:
            break
    bits_seen = trials_run * setup.k_msg
    ber = bit_errors / bits_seen
    return SweepPoint(
        snr_db=snr_db,
        n_symbols=n_symbols,
        rate_bits_per_cu=setup.k_msg / pair_complex(n_symbols),
        ber=ber,
        fer=frame_errors / trials_run,
        trials=trials_run,
        seed=cfg.seed,
        bit_errors=bit_errors,
        frame_errors=frame_errors,
        avg_iters=iters_total / trials_run,
        low_confidence=(ber < 1e-3 and bit_errors < cfg.min_error_events),
    )


def run_ber_sweep(cfg: ExperimentConfig) -> list[SweepResult]:
    """BER versus rate at fixed SNR for each configured encoder variant.

    The rate grid is in delivered message bits per complex channel use; each
    point transmits N = 2 * ceil(k_msg / rate) real symbols. Writes one CSV
    per variant when cfg.out is set.
    """
    if cfg.rates is None:
        raise ValueError("ber sweep needs a rate grid")
    if len(cfg.snr_db) != 1:
        raise ValueError("ber sweep runs at a single SNR")
    snr_db = cfg.snr_db[0]
    results = []
    for vi, variant in enumerate(cfg.variants):
        setup = _VariantSetup(cfg, variant)
        res = SweepResult(variant=variant)
        for pi, rate in enumerate(cfg.rates):
            n_symbols = 2 * math.ceil(setup.k_msg / rate)
            point_tag = vi * 10000 + pi
            res.points.append(_measure_point(cfg, setup, n_symbols, snr_db, point_tag))
        results.append(res)
    if cfg.out:
        for res in results:
            emit_csv(res, _variant_path(cfg.out, res.variant), gnuplot=cfg.gnuplot)
    return results


def run_throughput_sweep(cfg: ExperimentConfig, target_ber: float | None = None) -> SweepResult:
    """Max rate with measured BER <= target at each SNR (bisection over N).

    Always uses the min-degree + precode variant (the full system). The
    bisection brackets [N_feasible, N_infeasible) and narrows to 2% of N;
    the capacity-implied N is taken as the infeasible end (channel coding
    converse). Points that stay above target within the N budget are
    flagged unreached.
    """
    target = cfg.target_ber if target_ber is None else target_ber
    if not 0.0 < target < 1.0:
        raise ValueError("target BER must lie in (0, 1)")
    setup = _VariantSetup(cfg, "min-degree+precode")
    res = SweepResult(variant="throughput")
    for si, snr_db in enumerate(cfg.snr_db):
        cap_true = capacity_bits(snr_db, cfg.per_complex_noise)
        point_tag = 0x7A0000 + si
        n_cap = 2 * math.ceil(setup.k_msg / cap_true)
        n_budget = cfg.n_budget_factor * setup.k_msg

        n_hi = 2 * math.ceil(setup.k_msg / (0.55 * cap_true))
        feasible: SweepPoint | None = None
        while n_hi <= n_budget:
            pt = _measure_point(cfg, setup, n_hi, snr_db, point_tag, abort_ber=target, extend=False)
            if pt.ber <= target:
                feasible = pt
                break
            n_hi = int(n_hi * 1.4)
        if feasible is None:
            pt = _measure_point(cfg, setup, n_budget, snr_db, point_tag)
            pt.reached = pt.ber <= target
            res.points.append(pt)
            continue

        n_lo = n_cap  # infeasible by the channel coding converse
        n_hi = feasible.n_symbols
        while n_hi - n_lo > max(2, int(0.02 * n_hi)):
            mid = (n_lo + n_hi) // 2
            pt = _measure_point(cfg, setup, mid, snr_db, point_tag, abort_ber=target, extend=False)
            if pt.ber <= target:
                n_hi, feasible = mid, pt
            else:
                n_lo = mid
        # the reported point carries the full error-event confidence budget;
        # if the better-sampled estimate lands above target, back off in 2%
        # steps until it clears
        final = _measure_point(cfg, setup, n_hi, snr_db, point_tag)
        while final.ber > target and final.n_symbols < n_budget:
            bigger = min(n_budget, final.n_symbols + max(2, int(0.02 * final.n_symbols)))
            final = _measure_point(cfg, setup, bigger, snr_db, point_tag)
        final.reached = final.ber <= target
        res.points.append(final)
    if cfg.out:
        emit_csv(res, cfg.out, gnuplot=cfg.gnuplot)
    return res


def _variant_path(out: str, variant: str) -> str:
    p = Path(out)
    safe = variant.replace("+", "-")
    return str(p.with_name(f"{p.stem}_{safe}{p.suffix or '.csv'}"))


def emit_csv(result: SweepResult, path, gnuplot: bool = False) -> None:
    """One header row then one data row per point; floats use repr so a
    parse round-trips exactly and a rerun is byte-identical."""
    lines = [",".join(CSV_COLUMNS)]
    for pt in result.points:
        lines.append(",".join(str(x) for x in pt.csv_row()))
    text = "\n".join(lines) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    if gnuplot:
        gp = ["# " + " ".join(CSV_COLUMNS)]
        for pt in result.points:
            gp.append(" ".join(str(x) for x in pt.csv_row()))
        with open(str(path) + ".gnuplot.dat", "w", encoding="utf-8") as fh:
            fh.write("\n".join(gp) + "\n")


def parse_csv(path) -> list[SweepPoint]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected columns {header}")
        points = []
        for line in fh:
            if not line.strip():
                continue
            vals = line.strip().split(",")
            points.append(
                SweepPoint(
                    snr_db=float(vals[0]),
                    n_symbols=int(vals[1]),
                    rate_bits_per_cu=float(vals[2]),
                    ber=float(vals[3]),
                    fer=float(vals[4]),
                    trials=int(vals[5]),
                    seed=int(vals[6]),
                )
            )
    return points


def parse_config_file(path) -> dict:
    """key = value lines; '#' comments; commas make tuples."""
    out: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {raw.rstrip()}")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


_BOOL_KEYS = {"noiseless", "per_complex_noise", "gnuplot", "interleave"}
_INT_KEYS = {
    "k_msg", "degree", "trials", "seed", "max_iters", "ldpc_var_degree",
    "min_error_events", "max_trial_factor", "n_budget_factor",
}
_FLOAT_KEYS = {"precode_rate", "target_ber", "damping"}
_TUPLE_FLOAT_KEYS = {"snr_db", "rates"}


def config_from_mapping(mapping: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Build a config from string values (file or CLI), overriding ``base``."""
    cfg = base or ExperimentConfig()
    kwargs = {}
    for key, value in mapping.items():
        if value is None:
            continue
        if key in _BOOL_KEYS:
            kwargs[key] = value if isinstance(value, bool) else value.lower() in ("1", "true", "yes", "on")
        elif key in _INT_KEYS:
            kwargs[key] = int(value)
        elif key in _FLOAT_KEYS:
            kwargs[key] = float(value)
        elif key in _TUPLE_FLOAT_KEYS:
            if isinstance(value, (tuple, list)):
                kwargs[key] = tuple(float(x) for x in value)
            else:
                kwargs[key] = tuple(float(x) for x in str(value).split(","))
        elif key == "variants":
            if isinstance(value, (tuple, list)):
                kwargs[key] = tuple(value)
            else:
                kwargs[key] = tuple(s.strip() for s in str(value).split(","))
        elif key in ("weight_set", "assignment", "out"):
            kwargs[key] = str(value)
        else:
            raise ValueError(f"unknown config key {key!r}")
    return replace(cfg, **kwargs)
