"""Closed-form predictions used as overlay curves and test oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PROTOCOL_ALIASES = {
    "quadratic": "quadratic",
    "quad-ramsey": "quadratic",
    "tilted": "tilted",
    "tilted-ramsey": "tilted",
    "clifford-incoherent": "clifford-incoherent",
    "clifford-coherent": "clifford-coherent",
    "ruc": "ruc",
    "hamiltonian": "ruc",
}


class TheoryError(ValueError):
    """Raised for inputs outside a formula's preconditions."""


@dataclass(frozen=True)
class PredictionInput:
    """Inputs of :func:`predict_variance`; unused fields may stay at their defaults."""

    protocol: str
    M: float
    A: float = 1.0
    N: int | None = None
    gamma_r: float = 0.0
    s: int = 1
    phi: float | None = None
    gamma: float = 0.0
    beta: float | None = None


def predict_variance(inp: PredictionInput) -> float:
    """Per-signal estimator variance at ``M`` total shots.

    quadratic ``1/(4AM)``; tilted ``1/(4 sin^2(s phi) M)``; Clifford
    incoherent ``gamma/(AM)``; Clifford coherent ``1/(2 M A^2)``; RUC and
    Hamiltonian ``beta/(A^2 M)`` with ``beta`` from a calibration fit.
    """
    kind = PROTOCOL_ALIASES.get(inp.protocol)
    if kind is None:
        raise TheoryError(f"unknown protocol {inp.protocol!r}")
    if inp.M <= 0 or inp.A <= 0:
        raise TheoryError("M and A must be positive")
    if kind == "quadratic":
        return 1.0 / (4.0 * inp.A * inp.M)
    if kind == "tilted":
        if inp.phi is None:
            raise TheoryError("the tilted prediction needs phi")
        sin2 = math.sin(inp.s * inp.phi) ** 2
        if sin2 == 0.0:
            return math.inf
        return 1.0 / (4.0 * sin2 * inp.M)
    if kind == "clifford-incoherent":
        return inp.gamma / (inp.A * inp.M)
    if kind == "clifford-coherent":
        return 1.0 / (2.0 * inp.M * inp.A ** 2)
    if inp.beta is None:
        raise TheoryError("RUC and Hamiltonian predictions need a calibrated beta")
    return inp.beta / (inp.A ** 2 * inp.M)


def required_circuits(kind: str, K: int, delta: float, N: int | None = None) -> int:
    """Number of circuits that keeps the failure probability below ``delta``.

    Incoherent: ``n_c >= log2(K(K-1) / (2 delta)) / N`` (no collision).
    Coherent: smallest ``n_c`` with ``1 - (1 - 2^{-n_c})^K <= delta`` (every
    signal visible in at least one circuit).
    """
    if not 0.0 < delta < 1.0:
        raise TheoryError(f"delta must lie in (0, 1), got {delta}")
    if kind == "incoherent":
        if K < 2:
            raise TheoryError("the collision bound needs K >= 2")
        if N is None or N < 1:
            raise TheoryError("the incoherent bound needs N")
        return max(1, math.ceil(math.log2(K * (K - 1) / (2.0 * delta)) / N))
    if kind == "coherent":
        if K < 1:
            raise TheoryError("need K >= 1")
        n_c = 1
        while -math.expm1(K * math.log1p(-(2.0 ** -n_c))) > delta:
            n_c += 1
        return n_c
    raise TheoryError(f"unknown signal kind {kind!r}")


def collision_bound(K: int, N: int, n_c: int) -> float:
    """Union bound ``K(K-1)/2 * 2^{-N n_c}`` on any two codewords agreeing everywhere."""
    if K < 2:
        return 0.0
    return min(1.0, K * (K - 1) / 2.0 * 2.0 ** (-N * n_c))


def insensitivity_probability(K: int, n_c: int) -> float:
    """Probability that some coherent signal is invisible in all ``n_c`` circuits."""
    return -math.expm1(K * math.log1p(-(2.0 ** -n_c)))


def readout_transition_M_star(gamma_r: float, N: int, theta: float) -> float:
    """``M* ~ gamma_r exp(gamma_r N) / theta^4`` (order of magnitude)."""
    if theta <= 0:
        raise TheoryError("theta must be positive")
    return gamma_r * math.exp(gamma_r * N) / theta ** 4


def weingarten_D(l_u: int, l_v: int, q: int = 2) -> float:
    """Haar-averaged squared correlation of two insertions at lightcone offset ``(l_u, l_v)``.

    Uses ``tau = l_u + l_v - 1``.  Bracket terms with a negative binomial
    index are dropped.
    """
    if l_u < 0 or l_v < 0:
        raise TheoryError("lightcone offsets must be nonnegative")
    if l_u == 0 or l_v == 0:
        return 0.0
    tau = l_u + l_v - 1
    pref = q ** 2 / (q ** 4 - 1) * (q / (q ** 2 + 1)) ** (2 * tau - 2)

    def binom(a: int, b: int) -> int:
        return math.comb(a, b) if 0 <= b <= a else 0

    total = 0.0
    for u in range(l_u):
        for v in range(l_v):
            bracket = binom(tau - 1, v) * binom(tau - 1, u)
            if u >= 1 and v >= 1:
                bracket -= binom(tau - 1, v - 1) * binom(tau - 1, u - 1)
            total += float(q) ** (-(2 * tau - 2 * u - 2 * v)) * bracket
    return pref * total


def loglog_slope(M: np.ndarray, err: np.ndarray) -> float:
    """Least-squares slope of ``log err`` against ``log M``."""
    M = np.asarray(M, dtype=float)
    err = np.asarray(err, dtype=float)
    keep = (M > 0) & (err > 0)
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(M[keep]), np.log(err[keep]), 1)[0])


__all__ = [
    "PredictionInput",
    "TheoryError",
    "collision_bound",
    "insensitivity_probability",
    "loglog_slope",
    "predict_variance",
    "readout_transition_M_star",
    "required_circuits",
    "weingarten_D",
]
