"""Signal estimators built from measured bitstring tallies.

Every estimator solves the least-squares problem ``p ~ v_0 p0 + sum_l v_l q_l``
over the perturbation patterns ``q_l``.  The Ramsey and Clifford normal
systems are known in closed form and never touch ``2^N`` arrays; dense
protocols assemble and solve the full system.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .counts import BitstringCounts
from .patterns import DensePatterns, PointMass, SignedUniform, tilted_pattern
from .pauli import popcount
from .readout import corrected_tally, unconvolve_readout
from .signals import COHERENT, INCOHERENT, SignalSpec

DEFAULT_PHI = math.pi * (math.sqrt(5.0) - 1.0) / 2.0
RIDGE_CONDITION = 1e12
RIDGE_SCALE = 1e-10


class NumericalFailure(RuntimeError):
    """Raised when a normal system cannot be solved reliably."""


class CollisionError(NumericalFailure):
    """Two signals (or a signal and ``p0``) have identical pattern columns."""

    def __init__(self, groups: list[list[str]]):
        self.groups = groups
        text = "; ".join(", ".join(g) for g in groups)
        super().__init__(f"indistinguishable signals under every circuit: {text}")


@dataclass(frozen=True)
class EstimateReport:
    """Per-signal estimates aligned with ``ids``.

    ``raw`` keeps the regression value behind each estimate (``theta^2`` for
    the quadratic estimator, ``v_l`` otherwise) and ``v0`` the coefficient of
    ``p0``.  Signals the data cannot see carry ``nan`` and
    ``estimable = False``.
    """

    ids: tuple[int, ...]
    kinds: tuple[str, ...]
    estimates: np.ndarray
    predicted_std: np.ndarray
    thresholded: np.ndarray
    corrected: np.ndarray
    A_hat: float
    raw: np.ndarray
    v0: float
    estimable: np.ndarray

    @classmethod
    def build(cls, signals: Sequence[SignalSpec], estimates, predicted_std, A_hat: float,
              raw=None, v0: float = float("nan"), estimable=None) -> "EstimateReport":
        k = len(signals)
        est = np.asarray(estimates, dtype=float)
        return cls(
            ids=tuple(s.id for s in signals),
            kinds=tuple(s.kind for s in signals),
            estimates=est,
            predicted_std=np.asarray(predicted_std, dtype=float),
            thresholded=np.zeros(k, dtype=bool),
            corrected=np.zeros(k, dtype=bool),
            A_hat=float(A_hat),
            raw=est.copy() if raw is None else np.asarray(raw, dtype=float),
            v0=float(v0),
            estimable=np.isfinite(est) if estimable is None else np.asarray(estimable, dtype=bool),
        )

    def __len__(self) -> int:
        return len(self.ids)

    def index(self, signal_id: int) -> int:
        return self.ids.index(signal_id)

    def estimate(self, signal_id: int) -> float:
        return float(self.estimates[self.index(signal_id)])

    def as_dict(self) -> dict[int, float]:
        return {i: float(e) for i, e in zip(self.ids, self.estimates)}

    def kind_mask(self, kind: str) -> np.ndarray:
        return np.array([k == kind for k in self.kinds], dtype=bool)


def combine_reports(coherent: EstimateReport, incoherent: EstimateReport) -> EstimateReport:
    """Join a coherent and an incoherent report; ``A_hat`` comes from the latter."""
    def cat(name):
        return np.concatenate([getattr(coherent, name), getattr(incoherent, name)])

    return EstimateReport(
        ids=coherent.ids + incoherent.ids,
        kinds=coherent.kinds + incoherent.kinds,
        estimates=cat("estimates"),
        predicted_std=cat("predicted_std"),
        thresholded=cat("thresholded"),
        corrected=cat("corrected"),
        A_hat=incoherent.A_hat,
        raw=cat("raw"),
        v0=incoherent.v0,
        estimable=cat("estimable"),
    )


def _shots(counts) -> float:
    m = float(np.sum(counts.counts))
    if m <= 0:
        raise NumericalFailure("no shots recorded")
    return m


# -- Ramsey ---------------------------------------------------------------------

def estimate_quadratic(counts: BitstringCounts, signals: Sequence[SignalSpec],
                       gamma_r: float = 0.0) -> EstimateReport:
    """``A = N_0 / M`` and ``theta_a^2 = N_a / (A M)``, negative squares clipped to 0.

    With ``gamma_r > 0`` the tallies are replaced by confusion-inverse sums
    over the observed bitstrings.
    """
    signals = list(signals)
    M = _shots(counts)
    masks = [s.generator.z for s in signals]
    for s in signals:
        if not s.generator.is_z_type:
            raise ValueError(f"signal {s.id}: quadratic Ramsey senses Z strings only")
    tally = corrected_tally(counts, [0, *masks], gamma_r)
    A_hat = tally[0] / M
    if not A_hat > 0:
        raise NumericalFailure(f"signal fidelity estimate {A_hat:.3g} is not positive")
    sq = tally[1:] / (A_hat * M)
    est = np.sqrt(np.clip(sq, 0.0, None))
    std = np.full(len(signals), 1.0 / (2.0 * math.sqrt(A_hat * M)))
    return EstimateReport.build(signals, est, std, A_hat, raw=sq, v0=A_hat)


def estimate_tilted(counts, signals: Sequence[SignalSpec], phi: float = DEFAULT_PHI,
                    gamma_r: float = 0.0) -> EstimateReport:
    """``theta_a = 2^{N-2} / (sin^2(s_a phi) M) * sum_m dp_a(z_m)``.

    The normal system is exactly diagonal, so each signal is a weighted sum
    of its sign pattern over the observed bitstrings.  Readout correction
    multiplies by ``(1 - 2 gamma_r)^{-s_a}``, the exact effect of the inverse
    confusion matrix on a parity.
    """
    signals = list(signals)
    M = _shots(counts)
    n = counts.n
    weights = np.asarray(counts.counts, dtype=float)
    est = np.full(len(signals), np.nan)
    std = np.full(len(signals), np.nan)
    for i, s in enumerate(signals):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            pat = tilted_pattern(s, phi)
        if not pat.visible:
            continue
        sin2 = math.sin(s.generator.weight * phi) ** 2
        boost = (1.0 - 2.0 * gamma_r) ** (-s.generator.weight)
        total = float(np.dot(pat.value(counts.outcomes), weights))
        est[i] = 2.0 ** (n - 2) / (sin2 * M) * total * boost
        std[i] = boost / (2.0 * math.sqrt(sin2 * M))
    return EstimateReport.build(signals, est, std, A_hat=float("nan"), v0=1.0)


# -- Clifford ------------------------------------------------------------------------

def _collisions(columns: dict[int, tuple], labels: dict[int, str]) -> list[list[str]]:
    seen: dict[tuple, list[int]] = {}
    for col, key in columns.items():
        seen.setdefault(key, []).append(col)
    return [[labels[c] for c in cols] for cols in seen.values() if len(cols) > 1]


def _sparse_solve(B: sps.csr_matrix, rhs: np.ndarray) -> np.ndarray:
    G = (B.T @ B).tocsc()
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            v = spla.spsolve(G, rhs)
        except (spla.MatrixRankWarning, RuntimeError) as exc:
            raise NumericalFailure(f"singular normal system: {exc}") from exc
    v = np.atleast_1d(v)
    if not np.all(np.isfinite(v)):
        raise NumericalFailure("normal-system solve returned non-finite values")
    return v


def estimate_clifford_incoherent(counts_list: Sequence, patterns: Sequence[Sequence[PointMass]],
                                 signals: Sequence[SignalSpec],
                                 gamma_r: float = 0.0) -> EstimateReport:
    """Concatenated least squares over ``n_c`` z-basis circuits.

    ``patterns[n][l]`` is the codeword of signal ``l`` in circuit ``n``.  The
    design matrix has one 0/1 row per (circuit, codeword) and column 0 for
    ``p0`` (the all-zero outcome).  Returns ``gamma = v_l / (v_l + v_0)`` and
    ``A = v_0``.
    """
    signals = list(signals)
    K = len(signals)
    n_c = len(counts_list)
    if len(patterns) != n_c:
        raise ValueError("one pattern list per circuit is required")
    row_of: dict[tuple[int, int], int] = {}
    rows, cols = [], []
    columns: dict[int, list] = {l: [] for l in range(K + 1)}
    for c in range(n_c):
        words = [0] + [int(p.z) for p in patterns[c]]
        for l, z in enumerate(words):
            r = row_of.setdefault((c, z), len(row_of))
            rows.append(r)
            cols.append(l)
            columns[l].append(r)
    labels = {0: "p0", **{l + 1: str(s.id) for l, s in enumerate(signals)}}
    groups = _collisions({l: tuple(v) for l, v in columns.items()}, labels)
    if groups:
        raise CollisionError(groups)
    B = sps.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(row_of), K + 1))
    freq = np.zeros(len(row_of))
    shots = np.zeros(n_c)
    for c, counts in enumerate(counts_list):
        shots[c] = _shots(counts)
        keys = [(z, r) for (cc, z), r in row_of.items() if cc == c]
        tally = corrected_tally(counts, [z for z, _ in keys], gamma_r)
        for (z, r), t in zip(keys, tally):
            freq[r] = t / shots[c]
    v = _sparse_solve(B, B.T @ freq)
    v0, vs = float(v[0]), v[1:]
    if not v0 > 0:
        raise NumericalFailure(f"p0 coefficient {v0:.3g} is not positive")
    gam = vs / (vs + v0)
    diag = np.asarray(B.multiply(B).sum(axis=0)).ravel()[1:]
    M = shots.sum()
    std = np.sqrt(np.clip(vs, 0.0, None) * n_c / (M * diag)) / v0
    return EstimateReport.build(signals, gam, std, A_hat=v0, raw=vs, v0=v0)


def walsh_coefficient(counts, mask: int) -> float:
    """``sum_z (-1)^{z.mask} N_z``."""
    par = np.bitwise_count(np.asarray(counts.outcomes, dtype=np.int64) & np.int64(mask)) & 1
    return float(np.dot(1.0 - 2.0 * par, np.asarray(counts.counts, dtype=float)))


def estimate_clifford_coherent(counts_list: Sequence, patterns: Sequence[Sequence[SignedUniform]],
                               signals: Sequence[SignalSpec], A_hat: float,
                               gamma_r: float = 0.0) -> EstimateReport:
    """Concatenated least squares over ``n_c`` x-basis circuits.

    Pattern inner products are ``1/2^{N-2}`` for equal masks (signed by the
    product of signs) and 0 otherwise, and ``p0`` (uniform) decouples, so
    ``v = (B^T B)^{-1} B^T W / 2`` with ``B`` the signed (circuit, mask)
    incidence matrix and ``W`` the Walsh coefficients of the frequencies.
    ``theta = v / A_hat``.  Signals invisible in every circuit are reported
    as not estimable.
    """
    signals = list(signals)
    K = len(signals)
    n_c = len(counts_list)
    if len(patterns) != n_c:
        raise ValueError("one pattern list per circuit is required")
    if not A_hat > 0:
        raise NumericalFailure(f"signal fidelity {A_hat} must be positive")
    visible = np.array([any(patterns[c][l].sigma != 0 for c in range(n_c)) for l in range(K)])
    col_of = {l: j for j, l in enumerate(np.flatnonzero(visible))}
    row_of: dict[tuple[int, int], int] = {}
    rows, cols, vals = [], [], []
    columns: dict[int, list] = {j: [] for j in col_of.values()}
    for c in range(n_c):
        for l, j in col_of.items():
            p = patterns[c][l]
            if p.sigma == 0:
                continue
            r = row_of.setdefault((c, int(p.mask)), len(row_of))
            rows.append(r)
            cols.append(j)
            vals.append(float(p.sigma))
            columns[j].append((r, p.sigma))
    est = np.full(K, np.nan)
    std = np.full(K, np.nan)
    raw = np.full(K, np.nan)
    if col_of:
        # columns equal up to an overall sign are just as indistinguishable
        keys = {}
        for j, entries in columns.items():
            flip = entries[0][1]
            keys[j] = tuple((r, s * flip) for r, s in entries)
        labels = {j: str(signals[l].id) for l, j in col_of.items()}
        groups = _collisions(keys, labels)
        if groups:
            raise CollisionError(groups)
        B = sps.csr_matrix((vals, (rows, cols)), shape=(len(row_of), len(col_of)))
        walsh = np.zeros(len(row_of))
        noise = np.zeros(len(row_of))
        for (c, mask), r in row_of.items():
            counts = counts_list[c]
            M_c = _shots(counts)
            boost = (1.0 - 2.0 * gamma_r) ** (-popcount(mask))
            walsh[r] = walsh_coefficient(counts, mask) / M_c * boost
            noise[r] = boost ** 2 / M_c
        v = 0.5 * _sparse_solve(B, B.T @ walsh)
        diag = np.asarray(B.multiply(B).sum(axis=0)).ravel()
        # diagonal approximation: each Walsh coefficient has variance ~ 1/M_c
        var_v = 0.25 * np.asarray(B.multiply(B).T @ noise).ravel() / diag ** 2
        idx = np.array(list(col_of.keys()))
        raw[idx] = v
        est[idx] = v / A_hat
        std[idx] = np.sqrt(var_v) / A_hat
    return EstimateReport.build(signals, est, std, A_hat=A_hat, raw=raw, v0=1.0,
                                estimable=visible)


# -- dense regression -------------------------------------------------------------

def _solve_normal(G: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``G v = rhs`` (and return ``G^{-1}``), with the ridge fallback."""
    K = G.shape[0]
    if np.linalg.cond(G) > RIDGE_CONDITION:
        G = G + RIDGE_SCALE * np.trace(G) / K * np.eye(K)
        if np.linalg.cond(G) > RIDGE_CONDITION / RIDGE_SCALE:
            raise NumericalFailure("normal system is rank deficient beyond the ridge tolerance")
    try:
        factor = scipy.linalg.cho_factor(G)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"normal system is not positive definite: {exc}") from exc
    v = scipy.linalg.cho_solve(factor, rhs)
    inv = scipy.linalg.cho_solve(factor, np.eye(K))
    return v, inv


def estimate_dense(counts_list: Sequence, patterns: Sequence[DensePatterns],
                   signals: Sequence[SignalSpec], fidelity: float | None = None,
                   gamma_r: float = 0.0, kinds: Sequence[str] = (COHERENT, INCOHERENT)
                   ) -> EstimateReport:
    """Least squares against dense patterns, concatenated over circuits.

    ``theta = v_l / v_0`` (or ``v_l / fidelity`` when a fidelity is given)
    and ``gamma = v_l / (v_0 + v_l)``.  Only signals whose kind is listed in
    ``kinds`` enter the fit; in an x-basis Clifford run the incoherent
    patterns coincide with ``p0`` and must be left out.  Readout errors are
    undone by applying the inverse confusion matrix to each histogram.
    """
    signals = list(signals)
    use = [l for l, s in enumerate(signals) if s.kind in kinds]
    n_c = len(counts_list)
    if len(patterns) != n_c:
        raise ValueError("one pattern set per circuit is required")
    blocks, freqs, covs = [], [], []
    for counts, pats in zip(counts_list, patterns):
        cols = [pats.p0] + [pats.patterns[pats.ids.index(signals[l].id)] for l in use]
        V = np.stack(cols, axis=1)
        M_c = _shots(counts)
        f = counts.histogram() / M_c
        f = unconvolve_readout(f, gamma_r)
        blocks.append(V)
        freqs.append(f)
        covs.append((V, np.clip(counts.histogram() / M_c, 0, None), M_c))
    G = sum(V.T @ V for V in blocks)
    if np.linalg.cond(G) > RIDGE_CONDITION:
        v, G_inv = _solve_normal(G, sum(V.T @ f for V, f in zip(blocks, freqs)))
    else:
        # fit the departure from p0 so that f == p0 gives v == e_0 without roundoff
        rhs = sum(V.T @ (f - V[:, 0]) for V, f in zip(blocks, freqs))
        dv, G_inv = _solve_normal(G, rhs)
        v = dv + np.eye(len(dv))[0]
    # multinomial sandwich covariance of v (readout correction not included)
    S = np.zeros_like(G)
    for V, p, M_c in covs:
        Vp = V.T @ p
        S += (V.T * p) @ V / M_c - np.outer(Vp, Vp) / M_c
    cov_v = G_inv @ S @ G_inv
    v0 = float(v[0])
    if not v0 > 0:
        raise NumericalFailure(f"p0 coefficient {v0:.3g} is not positive")
    K = len(signals)
    est = np.full(K, np.nan)
    std = np.full(K, np.nan)
    raw = np.full(K, np.nan)
    for j, l in enumerate(use, start=1):
        raw[l] = v[j]
        sd = math.sqrt(max(cov_v[j, j], 0.0))
        if signals[l].kind == COHERENT:
            denom = fidelity if fidelity is not None else v0
            est[l] = v[j] / denom
            std[l] = sd / denom
        else:
            est[l] = v[j] / (v0 + v[j])
            std[l] = sd / v0
    estimable = np.zeros(K, dtype=bool)
    estimable[use] = True
    A_hat = v0 if fidelity is None else fidelity
    return EstimateReport.build(signals, est, std, A_hat=A_hat, raw=raw, v0=v0,
                                estimable=estimable)


# -- post-processing ----------------------------------------------------------------

def threshold_level(report: EstimateReport, kind: str, floor: float | None) -> float:
    """``max(0, floor - 2 sqrt(mean var))``, or ``2 sqrt(mean var)`` with no floor.

    The incoherent variance grows with the rate itself, so with a floor the
    mean is taken over estimates of at least half the floor (the candidates
    for surviving the cut); zero rates would otherwise drag the spread to 0
    and push the cut up to the floor.
    """
    mask = report.kind_mask(kind) & np.isfinite(report.predicted_std)
    if kind == INCOHERENT and floor is not None:
        near = mask & (np.abs(np.nan_to_num(report.estimates)) >= floor / 2)
        if near.any():
            mask = near
    if not mask.any():
        return 0.0
    spread = 2.0 * math.sqrt(float(np.mean(report.predicted_std[mask] ** 2)))
    if floor is None:
        return spread
    return max(0.0, floor - spread)


def hard_threshold(report: EstimateReport, theta_min: float | None = None,
                   gamma_min: float | None = None) -> EstimateReport:
    """Zero every estimate whose magnitude lies below its kind's threshold."""
    est = report.estimates.copy()
    flags = report.thresholded.copy()
    for kind, floor in ((COHERENT, theta_min), (INCOHERENT, gamma_min)):
        level = threshold_level(report, kind, floor)
        hit = report.kind_mask(kind) & np.isfinite(est) & (np.abs(est) < level)
        est[hit] = 0.0
        flags |= hit
    return replace(report, estimates=est, thresholded=flags)


def _pairs_into(signals: Sequence[SignalSpec]) -> dict[int, list[tuple[int, int]]]:
    """For each index ``c``, the index pairs ``a < b`` with ``mask_a ^ mask_b = mask_c``."""
    by_mask = {s.generator.z: i for i, s in enumerate(signals)}
    out: dict[int, list[tuple[int, int]]] = {}
    for c, sc in enumerate(signals):
        pairs = []
        for a, sa in enumerate(signals):
            b = by_mask.get(sa.generator.z ^ sc.generator.z)
            if b is not None and a < b and c not in (a, b):
                pairs.append((a, b))
        if pairs:
            out[c] = pairs
    return out


def tilted_pair_coefficient(s_a: int, s_b: int, s_c: int, phi: float) -> float:
    """Second-order leakage of the ``(a, b)`` pair into the ``c = a ^ b`` estimate."""
    return (math.cos((s_a - s_b) * phi) - math.cos(s_c * phi)) / math.sin(s_c * phi)


def second_order_correct(report: EstimateReport, signals: Sequence[SignalSpec],
                         protocol: str, phi: float = DEFAULT_PHI) -> EstimateReport:
    """Subtract pairwise second-order leakage from the Ramsey estimates.

    Corrections use the uncorrected estimates on the right-hand side, so
    the result does not depend on the signal order.  Triples and higher
    orders are left alone.
    """
    signals = list(signals)
    if [s.id for s in signals] != list(report.ids):
        raise ValueError("signals must align with the report")
    pairs = _pairs_into(signals)
    est = report.estimates.copy()
    raw = report.raw.copy()
    flags = report.corrected.copy()
    if protocol == "quad-ramsey":
        sq = np.nan_to_num(report.estimates) ** 2
        for c, plist in pairs.items():
            shift = sum(sq[a] * sq[b] for a, b in plist)
            if shift != 0.0:
                raw[c] = report.raw[c] - shift
                est[c] = math.sqrt(max(raw[c], 0.0))
                flags[c] = True
    elif protocol == "tilted-ramsey":
        base = np.nan_to_num(report.estimates)
        w = [s.generator.weight for s in signals]
        for c, plist in pairs.items():
            if not np.isfinite(report.estimates[c]):
                continue
            shift = sum(base[a] * base[b] * tilted_pair_coefficient(w[a], w[b], w[c], phi)
                        for a, b in plist)
            if shift != 0.0:
                est[c] = report.estimates[c] - shift
                raw[c] = est[c]
                flags[c] = True
    else:
        raise ValueError(f"no second-order rule for protocol {protocol!r}")
    return replace(report, estimates=est, raw=raw, corrected=flags)


def overlap_correct(incoherent: EstimateReport, coherent: EstimateReport,
                    signals: Sequence[SignalSpec]) -> EstimateReport:
    """Remove the coherent share from incoherent estimates on shared generators.

    A rotation by ``theta`` on the same (generator, step) lands on the same
    codeword with weight ``A theta^2``; ``gamma = (v - A theta^2) / (v - A
    theta^2 + v_0)`` clipped below at 0.  Only incoherent entries of the
    first report change, so a combined report may be passed as both
    arguments.
    """
    by_id = {s.id: s for s in signals}
    coh_key = {}
    for i, sid in enumerate(coherent.ids):
        s = by_id[sid]
        if coherent.kinds[i] == COHERENT and np.isfinite(coherent.estimates[i]):
            coh_key[(s.generator.x, s.generator.z, s.t)] = float(coherent.estimates[i])
    est = incoherent.estimates.copy()
    raw = incoherent.raw.copy()
    flags = incoherent.corrected.copy()
    A, v0 = incoherent.A_hat, incoherent.v0
    for i, sid in enumerate(incoherent.ids):
        if incoherent.kinds[i] != INCOHERENT:
            continue
        s = by_id[sid]
        theta = coh_key.get((s.generator.x, s.generator.z, s.t))
        if theta is None or theta == 0.0:
            continue
        v = incoherent.raw[i] - A * theta ** 2
        raw[i] = v
        est[i] = v / (v + v0) if v > 0 else 0.0
        flags[i] = True
    return replace(incoherent, estimates=est, raw=raw, corrected=flags)


__all__ = [
    "CollisionError",
    "DEFAULT_PHI",
    "EstimateReport",
    "NumericalFailure",
    "combine_reports",
    "estimate_clifford_coherent",
    "estimate_clifford_incoherent",
    "estimate_dense",
    "estimate_quadratic",
    "estimate_tilted",
    "hard_threshold",
    "overlap_correct",
    "second_order_correct",
    "threshold_level",
    "tilted_pair_coefficient",
    "walsh_coefficient",
]
