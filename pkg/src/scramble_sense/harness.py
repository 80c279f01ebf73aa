"""End-to-end experiments: build circuits, sample shots, estimate and score.

A repetition draws one realization of the protocol's randomness (circuit
families, RUC gates) and reuses it for every entry of the shot schedule, so
RMS curves against ``M`` only carry shot noise between points.  Seeds are
derived from the master seed with :class:`numpy.random.SeedSequence` spawn
keys, which keeps results identical for any number of worker processes.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .clifford import CircuitFamily, sample_uniform_clifford, conjugate
from .counts import WeightedCounts, split_shots
from .dense import (
    HamiltonianDynamics,
    RUCFamily,
    build_protocol_circuit,
    exact_distribution,
    kim_huse_hamiltonian,
    sample_from_distribution,
)
from .estimators import (
    DEFAULT_PHI,
    EstimateReport,
    combine_reports,
    estimate_clifford_coherent,
    estimate_clifford_incoherent,
    estimate_dense,
    estimate_quadratic,
    estimate_tilted,
    hard_threshold,
    overlap_correct,
    second_order_correct,
)
from .fastpath import frame_circuit, frame_dense_circuit, sample_frame_shots
from .patterns import (
    clifford_coherent_pattern,
    clifford_incoherent_pattern,
    dense_patterns,
)
from .pauli import PauliString, count_y, x_support
from .readout import CodewordSet, DecodeStats, convolve_readout, decode_counts
from .signals import (
    COHERENT,
    INCOHERENT,
    SignalSet,
    local_pool,
    random_sparse_instance,
    random_weight_pool,
    signal_fidelity_A,
    z_string_pool,
)
from .theory import (
    PredictionInput,
    loglog_slope,
    predict_variance,
    required_circuits,
)

PROTOCOLS = ("quad-ramsey", "tilted-ramsey", "clifford-global", "clifford-local", "ruc", "hamiltonian")
CLIFFORD_KIND = {"clifford-global": "global-uniform", "clifford-local": "brickwork-local"}
THREADS_ENV = "SCRAMBLE_SENSE_THREADS"


class ConfigError(ValueError):
    """Raised for an inconsistent experiment configuration."""


@dataclass(frozen=True)
class Corrections:
    confusion: bool = False
    decode: bool = False
    threshold: bool = False
    theta_min: float | None = None
    gamma_min: float | None = None
    second_order: bool = False
    overlap: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment.

    Exactly one of ``signals`` (an explicit set) and ``recipe`` (a random
    sparse instance drawn from the master seed) must be given.  A recipe is
    a dict with keys ``pool`` (``"local"``, ``"z-strings"``,
    ``"random-weight"`` or ``"random-same-letter"``), ``sparsity``,
    ``ranges`` and optionally ``bodies``, ``pool_size``, ``max_weight``,
    ``kinds`` and ``signs`` (``"random"``, or ``"positive"`` which is the
    default for quadratic Ramsey since it cannot resolve signs).

    ``redraw_instance`` draws a fresh signal instance per repetition and
    ``redraw_circuits`` (on by default) fresh circuit families; switching the
    latter off keeps one code fixed, as in strong-robustness studies.
    """

    protocol: str
    n: int
    T: int = 1
    signals: SignalSet | None = None
    recipe: dict | None = field(default=None, hash=False, compare=False)
    n_circuits: dict = field(default_factory=lambda: {COHERENT: 15, INCOHERENT: 3, "dense": 4},
                             hash=False)
    phi: float = DEFAULT_PHI
    gamma_r: float = 0.0
    shots: tuple[int, ...] = (10_000,)
    seed: int = 0
    repetitions: int = 1
    corrections: Corrections = Corrections()
    depth: int = 2
    tau: float = 5.0
    beta: tuple[float, float] | None = None
    score_ids: tuple[int, ...] | None = None
    redraw_instance: bool = False
    redraw_circuits: bool = True

    def __post_init__(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}; expected one of {PROTOCOLS}")
        if self.n < 1 or self.T < 1:
            raise ConfigError("n and T must be positive")
        if (self.signals is None) == (self.recipe is None):
            raise ConfigError("give exactly one of an explicit signal set and a recipe")
        if self.signals is not None and (self.signals.n != self.n or self.signals.T != self.T):
            raise ConfigError("signal set shape differs from (n, T)")
        if not 0.0 <= self.gamma_r < 0.5:
            raise ConfigError(f"readout error rate {self.gamma_r} outside [0, 0.5)")
        if any(int(m) < 1 for m in self.shots):
            raise ConfigError("shot numbers must be positive")
        if self.repetitions < 1:
            raise ConfigError("need at least one repetition")
        if self.protocol in ("quad-ramsey", "tilted-ramsey") and self.T != 1:
            raise ConfigError("Ramsey protocols use a single accumulation step (T = 1)")
        nc = dict(self.n_circuits)
        for key in nc:
            if key not in (COHERENT, INCOHERENT, "dense"):
                raise ConfigError(f"unknown n_circuits key {key!r}")
            if int(nc[key]) < 1:
                raise ConfigError("circuit counts must be positive")

    def circuits(self, kind: str) -> int:
        defaults = {COHERENT: 15, INCOHERENT: 3, "dense": 4}
        if self.protocol == "hamiltonian" and kind == "dense":
            return 1
        return int(self.n_circuits.get(kind, defaults[kind]))


def _seq(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def _pool(recipe: dict, n: int, rng: np.random.Generator) -> list[PauliString]:
    kind = recipe.get("pool", "local")
    if kind == "local":
        return local_pool(n)
    if kind == "z-strings":
        return z_string_pool(n, tuple(recipe.get("bodies", (1, 2))))
    if kind in ("random-weight", "random-same-letter"):
        size = int(recipe.get("pool_size", 3 * n))
        return random_weight_pool(n, size, rng, int(recipe.get("max_weight", 3)),
                                  same_letter=kind == "random-same-letter")
    raise ConfigError(f"unknown generator pool {kind!r}")


def realize_signals(config: ExperimentConfig, rep: int = 0) -> SignalSet:
    """The signal set of ``config`` (drawn from the master seed for recipes)."""
    if config.signals is not None:
        return config.signals
    recipe = config.recipe
    rng = _seq(config.seed, 0, rep if config.redraw_instance else 0)
    pool = _pool(recipe, config.n, rng)
    kinds = tuple(recipe.get("kinds", (COHERENT, INCOHERENT)))
    if config.protocol in ("quad-ramsey", "tilted-ramsey"):
        kinds = (COHERENT,)
    ranges = {k: tuple(v) for k, v in recipe.get("ranges", {}).items()}
    sparsity = recipe.get("sparsity", 1.0)
    signs = recipe.get("signs", "positive" if config.protocol == "quad-ramsey" else "random")
    if signs not in ("random", "positive"):
        raise ConfigError(f"recipe signs must be 'random' or 'positive', got {signs!r}")
    return random_sparse_instance(pool, config.T, sparsity, ranges, rng, kinds,
                                  random_signs=signs == "random")


def workers() -> int:
    """Worker-process cap from ``SCRAMBLE_SENSE_THREADS`` (default 1)."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


# -- protocol setups ------------------------------------------------------------------

class _RamseySetup:
    def __init__(self, config: ExperimentConfig, signals: SignalSet):
        self.config = config
        self.signals = signals
        circuit = build_protocol_circuit(config.protocol, signals, None, config.phi)
        self.prob = convolve_readout(exact_distribution(circuit), config.gamma_r)

    def sample(self, M: int, rng: np.random.Generator):
        return [sample_from_distribution(self.prob, M, 0.0, rng)]

    def exact(self):
        return [WeightedCounts.from_distribution(self.prob)]

    def estimate(self, counts) -> EstimateReport:
        cfg = self.config
        g = cfg.gamma_r if cfg.corrections.confusion else 0.0
        sigs = list(self.signals)
        if cfg.protocol == "quad-ramsey":
            report = estimate_quadratic(counts[0], sigs, g)
        else:
            report = estimate_tilted(counts[0], sigs, cfg.phi, g)
        if cfg.corrections.second_order:
            report = second_order_correct(report, sigs, cfg.protocol, cfg.phi)
        return report


class _CliffordSetup:
    def __init__(self, config: ExperimentConfig, signals: SignalSet, rng: np.random.Generator):
        self.config = config
        self.signals = signals
        kind = CLIFFORD_KIND[config.protocol]
        n, T = config.n, config.T
        self.inc = signals.incoherent
        self.coh = signals.coherent
        self.fam_z = [CircuitFamily.sample(kind, n, T, rng, config.depth)
                      for _ in range(config.circuits(INCOHERENT))]
        self.fam_x = [CircuitFamily.sample(kind, n, T, rng, config.depth)
                      for _ in range(config.circuits(COHERENT))] if self.coh else []
        self.frames_z = [frame_circuit(f, signals, "z") for f in self.fam_z]
        self.frames_x = [frame_circuit(f, signals, "x") for f in self.fam_x]
        self.pat_inc = [[clifford_incoherent_pattern(f.prefixes[s.t - 1], s) for s in self.inc]
                        for f in self.fam_z]
        self.pat_coh = [[clifford_coherent_pattern(f.prefixes[s.t - 1], s) for s in self.coh]
                        for f in self.fam_x]
        self.codes = [CodewordSet(n, tuple({p.z for p in pats})) for pats in self.pat_inc]
        self.decode_stats: DecodeStats | None = None

    def sample(self, M: int, rng: np.random.Generator):
        g = self.config.gamma_r
        z = [sample_frame_shots(fr, m, g, rng, c)
             for c, (fr, m) in enumerate(zip(self.frames_z, split_shots(M, len(self.frames_z))))]
        x = [sample_frame_shots(fr, m, g, rng, c)
             for c, (fr, m) in enumerate(zip(self.frames_x, split_shots(M, len(self.frames_x))))] \
            if self.frames_x else []
        return z, x

    def exact(self):
        g = self.config.gamma_r

        def dist(frame, c):
            prob = convolve_readout(exact_distribution(frame_dense_circuit(frame)), g)
            return WeightedCounts.from_distribution(prob, 1.0, c)

        return ([dist(fr, c) for c, fr in enumerate(self.frames_z)],
                [dist(fr, c) for c, fr in enumerate(self.frames_x)])

    def estimate(self, counts) -> EstimateReport:
        cfg = self.config
        z_counts, x_counts = counts
        g = cfg.gamma_r if cfg.corrections.confusion else 0.0
        if cfg.corrections.decode:
            decoded = [decode_counts(c, code) for c, code in zip(z_counts, self.codes)]
            z_counts = [d[0] for d in decoded]
            self.decode_stats = DecodeStats(*(sum(getattr(d[1], f) for d in decoded)
                                              for f in ("decoded_shots", "tie_shots", "out_of_radius_shots")))
            g_z = 0.0
        else:
            g_z = g
        ri = estimate_clifford_incoherent(z_counts, self.pat_inc, self.inc, g_z)
        if self.coh:
            rc = estimate_clifford_coherent(x_counts, self.pat_coh, self.coh, ri.A_hat, g)
        else:
            rc = EstimateReport.build([], [], [], ri.A_hat)
        if cfg.corrections.overlap and self.coh and self.inc:
            ri = overlap_correct(ri, rc, list(self.signals))
        return combine_reports(rc, ri)


class _DenseSetup:
    def __init__(self, config: ExperimentConfig, signals: SignalSet, rng: np.random.Generator):
        self.config = config
        self.signals = signals
        if config.protocol == "ruc":
            self.families = [RUCFamily.sample(config.n, config.T, rng)
                             for _ in range(config.circuits("dense"))]
        else:
            self.families = [HamiltonianDynamics(kim_huse_hamiltonian(config.n), config.tau, config.T)]
        self.patterns = [dense_patterns(config.protocol, signals, f) for f in self.families]
        self.probs = [
            convolve_readout(exact_distribution(build_protocol_circuit(config.protocol, signals, f)),
                             config.gamma_r)
            for f in self.families
        ]

    def sample(self, M: int, rng: np.random.Generator):
        return [sample_from_distribution(p, m, 0.0, rng, c)
                for c, (p, m) in enumerate(zip(self.probs, split_shots(M, len(self.probs))))]

    def exact(self):
        return [WeightedCounts.from_distribution(p, 1.0, c) for c, p in enumerate(self.probs)]

    def estimate(self, counts) -> EstimateReport:
        cfg = self.config
        g = cfg.gamma_r if cfg.corrections.confusion else 0.0
        sigs = list(self.signals)
        report = estimate_dense(counts, self.patterns, sigs, gamma_r=g)
        if cfg.corrections.overlap:
            report = overlap_correct(report, report, sigs)
        return report


_DETERMINISTIC_SETUPS: dict[tuple, object] = {}


def build_setup(config: ExperimentConfig, signals: SignalSet, rep: int = 0):
    """Draw the protocol randomness of repetition ``rep``.

    Protocols without randomness (Ramsey, Hamiltonian) are identical across
    repetitions; the Hamiltonian setup is cached since its patterns are the
    expensive part.
    """
    rng = _seq(config.seed, 1, rep if config.redraw_circuits else 0)
    if config.protocol in ("quad-ramsey", "tilted-ramsey"):
        return _RamseySetup(config, signals)
    if config.protocol in CLIFFORD_KIND:
        return _CliffordSetup(config, signals, rng)
    if config.protocol == "hamiltonian":
        key = (config.n, config.T, config.tau, config.gamma_r, config.corrections, signals)
        setup = _DETERMINISTIC_SETUPS.get(key)
        if setup is None:
            if len(_DETERMINISTIC_SETUPS) > 16:
                _DETERMINISTIC_SETUPS.clear()
            setup = _DETERMINISTIC_SETUPS[key] = _DenseSetup(config, signals, rng)
        return setup
    return _DenseSetup(config, signals, rng)


def _finish(config: ExperimentConfig, report: EstimateReport) -> EstimateReport:
    c = config.corrections
    if c.threshold:
        report = hard_threshold(report, c.theta_min, c.gamma_min)
    return report


def _check_circuits(config: ExperimentConfig, signals: SignalSet) -> None:
    if config.protocol not in CLIFFORD_KIND:
        return
    k_ic = len(signals.incoherent)
    if k_ic >= 2 and config.circuits(INCOHERENT) < required_circuits(INCOHERENT, k_ic, 0.01, config.n):
        warnings.warn(f"{config.circuits(INCOHERENT)} incoherent circuits are fewer than the "
                      f"collision bound asks for at delta = 0.01", RuntimeWarning, stacklevel=3)
    k_c = len(signals.coherent)
    if k_c and config.circuits(COHERENT) < required_circuits(COHERENT, k_c, 0.01):
        warnings.warn(f"{config.circuits(COHERENT)} coherent circuits are fewer than the "
                      f"insensitivity bound asks for at delta = 0.01", RuntimeWarning, stacklevel=3)


# -- scoring ----------------------------------------------------------------------

@dataclass(frozen=True)
class TrialResult:
    report: EstimateReport
    metrics: dict
    signals: SignalSet


def truth_vector(report: EstimateReport, signals: SignalSet) -> np.ndarray:
    amp = {s.id: s.amplitude for s in signals}
    return np.array([amp[i] for i in report.ids])


def _scored(config: ExperimentConfig, report: EstimateReport) -> np.ndarray:
    if config.score_ids is None:
        return np.ones(len(report), dtype=bool)
    keep = set(config.score_ids)
    return np.array([i in keep for i in report.ids], dtype=bool)


def _mse_by_kind(config: ExperimentConfig, report: EstimateReport, truth: np.ndarray) -> dict:
    err = report.estimates - truth
    base = _scored(config, report) & np.isfinite(err)
    out = {}
    coh = base & report.kind_mask(COHERENT)
    out["mse_coherent"] = float(np.mean(err[coh] ** 2)) if coh.any() else float("nan")
    inc = base & report.kind_mask(INCOHERENT)
    nz = inc & (truth != 0)
    pick = nz if nz.any() else inc
    out["mse_incoherent"] = float(np.mean(err[pick] ** 2)) if pick.any() else float("nan")
    out["max_abs_error"] = float(np.max(np.abs(err[base]))) if base.any() else float("nan")
    out["not_estimable"] = int(np.sum(~report.estimable))
    return out


def score(config: ExperimentConfig, report: EstimateReport, signals: SignalSet) -> dict:
    """RMS per kind (coherent over all candidates, incoherent over nonzero ones)."""
    truth = truth_vector(report, signals)
    m = _mse_by_kind(config, report, truth)
    return {
        "rms_coherent": math.sqrt(m["mse_coherent"]) if not math.isnan(m["mse_coherent"]) else float("nan"),
        "rms_incoherent": math.sqrt(m["mse_incoherent"]) if not math.isnan(m["mse_incoherent"]) else float("nan"),
        "max_abs_error": m["max_abs_error"],
        "not_estimable": m["not_estimable"],
        "A": signal_fidelity_A(signals),
        "A_hat": report.A_hat,
    }


def run_trial(config: ExperimentConfig, M: int, rep: int = 0) -> TrialResult:
    """One full protocol execution with ``M`` shots per measurement setting."""
    signals = realize_signals(config, rep)
    _check_circuits(config, signals)
    setup = build_setup(config, signals, rep)
    counts = setup.sample(int(M), _seq(config.seed, 2, rep, 0))
    report = _finish(config, setup.estimate(counts))
    metrics = score(config, report, signals)
    stats = getattr(setup, "decode_stats", None)
    if stats is not None:
        metrics.update(decode_ties=stats.tie_shots, decode_out_of_radius=stats.out_of_radius_shots)
    return TrialResult(report, metrics, signals)


def _rep_errors(args) -> dict:
    config, rep, shots = args
    signals = realize_signals(config, rep)
    setup = build_setup(config, signals, rep)
    rows = []
    for i, M in enumerate(shots):
        report = _finish(config, setup.estimate(setup.sample(int(M), _seq(config.seed, 2, rep, i))))
        truth = truth_vector(report, signals)
        row = _mse_by_kind(config, report, truth)
        row["A"] = signal_fidelity_A(signals)
        row["A_hat"] = report.A_hat
        row["errors"] = report.estimates - truth
        row["kinds"] = report.kinds
        row["truth"] = truth
        rows.append(row)
    return {"rep": rep, "rows": rows}


def _map(fn, items: list) -> list:
    n = min(workers(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def run_repetitions(config: ExperimentConfig, shots: Sequence[int] | None = None) -> list[dict]:
    """Per-repetition error rows for every shot number, in repetition order."""
    shots = tuple(int(m) for m in (shots if shots is not None else config.shots))
    _check_circuits(config, realize_signals(config))
    out = _map(_rep_errors, [(config, r, shots) for r in range(config.repetitions)])
    return sorted(out, key=lambda d: d["rep"])


def median_of_means(values: Sequence[float], groups: int = 5) -> float:
    vals = np.asarray([v for v in values if np.isfinite(v)], dtype=float)
    if vals.size == 0:
        return float("nan")
    g = max(1, min(groups, vals.size))
    return float(np.median([chunk.mean() for chunk in np.array_split(vals, g)]))


# -- sweeps -----------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingRecord:
    M: int
    rms_coherent: float
    rms_incoherent: float
    theory_coherent: float
    theory_incoherent: float
    slope_running: float


def theory_rms(config: ExperimentConfig, signals: SignalSet, M: int) -> tuple[float, float]:
    """Predicted RMS per kind from the variance formulas."""
    A = signal_fidelity_A(signals)
    proto = config.protocol
    keep = set(config.score_ids) if config.score_ids is not None else None
    coh = [s for s in signals.coherent if keep is None or s.id in keep]
    inc = [s for s in signals.incoherent if keep is None or s.id in keep]
    inc_nz = [s for s in inc if s.amplitude > 0] or inc
    tc = ti = float("nan")
    if proto == "quad-ramsey" and coh:
        tc = math.sqrt(predict_variance(PredictionInput("quadratic", M, A)))
    elif proto == "tilted-ramsey" and coh:
        boost = config.gamma_r if config.corrections.confusion else 0.0
        var = [predict_variance(PredictionInput("tilted", M, A, s=s.generator.weight, phi=config.phi))
               * (1 - 2 * boost) ** (-2 * s.generator.weight) for s in coh]
        tc = math.sqrt(float(np.mean(var)))
    elif proto in CLIFFORD_KIND:
        if coh:
            tc = math.sqrt(predict_variance(PredictionInput("clifford-coherent", M, A)))
        if inc:
            var = [predict_variance(PredictionInput("clifford-incoherent", M, A, gamma=s.amplitude))
                   for s in inc_nz]
            ti = math.sqrt(float(np.mean(var)))
    elif config.beta is not None:
        if coh:
            tc = math.sqrt(predict_variance(PredictionInput("ruc", M, A, beta=config.beta[0])))
        if inc:
            ti = math.sqrt(predict_variance(PredictionInput("ruc", M, A, beta=config.beta[1])))
    return tc, ti


def scaling_sweep(config: ExperimentConfig, shots: Sequence[int] | None = None,
                  groups: int = 5) -> list[ScalingRecord]:
    """RMS against ``M`` (median of means over repetitions) with theory overlays."""
    shots = tuple(int(m) for m in (shots if shots is not None else config.shots))
    if len(shots) < 3:
        raise ConfigError("a scaling sweep needs at least three shot numbers")
    reps = run_repetitions(config, shots)
    signals = realize_signals(config)
    records = []
    rms_c, rms_i = [], []
    for i, M in enumerate(shots):
        mc = median_of_means([r["rows"][i]["mse_coherent"] for r in reps], groups)
        mi = median_of_means([r["rows"][i]["mse_incoherent"] for r in reps], groups)
        rms_c.append(math.sqrt(mc) if np.isfinite(mc) else float("nan"))
        rms_i.append(math.sqrt(mi) if np.isfinite(mi) else float("nan"))
        primary = rms_c if np.isfinite(rms_c[0]) else rms_i
        slope = loglog_slope(np.array(shots[: i + 1]), np.array(primary)) if i >= 1 else float("nan")
        tc, ti = theory_rms(config, signals, M)
        records.append(ScalingRecord(M, rms_c[-1], rms_i[-1], tc, ti, slope))
    return records


@dataclass(frozen=True)
class BetaResult:
    beta_c: float
    beta_ic: float
    per_M: list[tuple[int, float, float]]
    mean_gamma: float


def sample_complexity_beta(config: ExperimentConfig, shots: Sequence[int] | None = None,
                           groups: int = 5) -> BetaResult:
    """``beta_c = M A^2 E[(theta_hat - theta)^2]`` and ``beta_ic = M A E[(gamma_hat - gamma)^2]``.

    The coherent average runs over all candidates, the incoherent one over
    nonzero signals only.  Values are pooled over shot numbers and
    repetitions by a median of means.
    """
    shots = tuple(int(m) for m in (shots if shots is not None else config.shots))
    reps = run_repetitions(config, shots)
    bc, bi, per_M = [], [], []
    for i, M in enumerate(shots):
        col_c, col_i = [], []
        for r in reps:
            row = r["rows"][i]
            A = row["A"]
            col_c.append(M * A ** 2 * row["mse_coherent"])
            col_i.append(M * A * row["mse_incoherent"])
        bc += col_c
        bi += col_i
        per_M.append((M, median_of_means(col_c, groups), median_of_means(col_i, groups)))
    rates = []
    for r in reps:
        row = r["rows"][0]
        inc = np.array([k == INCOHERENT for k in row["kinds"]])
        nz = row["truth"][inc & (row["truth"] > 0)]
        if nz.size:
            rates.append(float(nz.mean()))
    mean_gamma = float(np.mean(rates)) if rates else float("nan")
    return BetaResult(median_of_means(bc, groups), median_of_means(bi, groups), per_M, mean_gamma)


@dataclass(frozen=True)
class BiasReport:
    ids: tuple[int, ...]
    kinds: tuple[str, ...]
    bias: np.ndarray
    mean_squared: float
    worst_case: float
    report: EstimateReport


def bias_infinite_M(config: ExperimentConfig, rep: int = 0) -> BiasReport:
    """Estimator error when fed the exact outcome distributions (``M = infinity``)."""
    signals = realize_signals(config, rep)
    setup = build_setup(config, signals, rep)
    report = _finish(config, setup.estimate(setup.exact()))
    bias = report.estimates - truth_vector(report, signals)
    finite = bias[np.isfinite(bias)]
    return BiasReport(
        ids=report.ids,
        kinds=report.kinds,
        bias=bias,
        mean_squared=float(np.mean(finite ** 2)) if finite.size else float("nan"),
        worst_case=float(np.max(np.abs(finite))) if finite.size else float("nan"),
        report=report,
    )


# -- bound checks ------------------------------------------------------------------

def _random_paulis(n: int, K: int, rng: np.random.Generator) -> list[PauliString]:
    seen: set[tuple[int, int]] = set()
    out = []
    while len(out) < K:
        x, z = (int(v) for v in rng.integers(0, 1 << n, size=2))
        if (x, z) == (0, 0) or (x, z) in seen:
            continue
        seen.add((x, z))
        out.append(PauliString(n, x, z))
    return out


def collision_empirical(N: int, K: int, n_c: int, draws: int, rng: np.random.Generator) -> float:
    """Fraction of draws in which two of ``K`` random Paulis share codewords in every circuit."""
    if K < 2:
        return 0.0
    hits = 0
    for _ in range(draws):
        paulis = _random_paulis(N, K, rng)
        words = [[] for _ in range(K)]
        for _ in range(n_c):
            c = sample_uniform_clifford(N, rng)
            for i, p in enumerate(paulis):
                words[i].append(x_support(conjugate(c, p)[0]))
        if len({tuple(w) for w in words}) < K:
            hits += 1
    return hits / draws


def insensitivity_empirical(N: int, draws: int, rng: np.random.Generator) -> float:
    """Fraction of uniform Cliffords under which a random coherent signal is invisible."""
    hits = 0
    for _ in range(draws):
        p = _random_paulis(N, 1, rng)[0]
        c = sample_uniform_clifford(N, rng)
        if count_y(conjugate(c, p)[0]) % 2 == 0:
            hits += 1
    return hits / draws


__all__ = [
    "BetaResult",
    "BiasReport",
    "ConfigError",
    "Corrections",
    "ExperimentConfig",
    "PROTOCOLS",
    "ScalingRecord",
    "TrialResult",
    "bias_infinite_M",
    "build_setup",
    "collision_empirical",
    "insensitivity_empirical",
    "median_of_means",
    "realize_signals",
    "run_repetitions",
    "run_trial",
    "sample_complexity_beta",
    "scaling_sweep",
    "score",
    "theory_rms",
    "workers",
]
