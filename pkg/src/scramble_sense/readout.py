"""Readout noise, confusion-matrix inversion and nearest-codeword decoding.

The readout model flips every measured bit independently with probability
``gamma_r``.  Its confusion matrix is the tensor power of
``[[1 - g, g], [g, 1 - g]]`` whose inverse has the closed form

    C^{-1}[a, j] = (1 - 2g)^{-n} (1 - g)^{n - d} (-g)^d,   d = Hamming(a, j),

so corrected frequencies are sums over observed bitstrings only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .counts import BitstringCounts
from .pauli import format_bits


class ReadoutError(ValueError):
    """Raised for invalid readout rates or codeword sets."""


def _check_rate(gamma_r: float) -> None:
    if not 0.0 <= gamma_r < 0.5:
        raise ReadoutError(f"readout error rate must lie in [0, 0.5), got {gamma_r}")


def flip_masks(n: int, size: int, gamma_r: float, rng: np.random.Generator) -> np.ndarray:
    """``size`` random flip masks with independent bits set with prob ``gamma_r``."""
    if gamma_r == 0.0 or size == 0:
        return np.zeros(size, dtype=np.int64)
    bits = rng.random((size, n)) < gamma_r
    weights = np.left_shift(np.int64(1), np.arange(n, dtype=np.int64))
    return (bits.astype(np.int64) * weights).sum(axis=1)


def apply_bitflip_noise(counts: BitstringCounts, gamma_r: float,
                        rng: np.random.Generator) -> BitstringCounts:
    """Flip each bit of every recorded shot independently with prob ``gamma_r``."""
    _check_rate(gamma_r)
    if gamma_r == 0.0:
        return counts
    shots = counts.shots_array()
    noisy = shots ^ flip_masks(counts.n, shots.size, gamma_r, rng)
    return BitstringCounts.from_shots(counts.n, noisy, counts.circuit)


def hamming(a: np.ndarray | int, b: np.ndarray | int) -> np.ndarray:
    return np.bitwise_count(np.bitwise_xor(np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64)))


def confusion_inverse_weight(a: int | np.ndarray, j: int | np.ndarray, gamma_r: float,
                             n: int) -> float | np.ndarray:
    """Entry ``C^{-1}[a, j]`` of the inverse confusion matrix."""
    if gamma_r == 0.5:
        raise ReadoutError("confusion matrix is singular at gamma_r = 0.5")
    d = hamming(a, j)
    g = float(gamma_r)
    w = (1.0 - 2.0 * g) ** (-n) * (1.0 - g) ** (n - d) * (-g) ** d
    return float(w) if np.ndim(w) == 0 else w


def confusion_matrix(n: int, gamma_r: float) -> np.ndarray:
    """Dense ``2^n x 2^n`` confusion matrix ``C[j, a] = P(read j | true a)``."""
    one = np.array([[1.0 - gamma_r, gamma_r], [gamma_r, 1.0 - gamma_r]])
    out = np.ones((1, 1))
    for _ in range(n):
        out = np.kron(one, out)
    return out


def _apply_per_qubit(vec: np.ndarray, mat: np.ndarray) -> np.ndarray:
    n = int(round(np.log2(vec.size)))
    t = np.asarray(vec, dtype=float).reshape((2,) * n)
    for axis in range(n):
        t = np.moveaxis(np.tensordot(mat, t, axes=([1], [axis])), 0, axis)
    return t.reshape(-1)


def convolve_readout(prob: np.ndarray, gamma_r: float) -> np.ndarray:
    """Exact distribution of the read bitstring given the true distribution."""
    if gamma_r == 0.0:
        return np.asarray(prob, dtype=float).copy()
    one = np.array([[1.0 - gamma_r, gamma_r], [gamma_r, 1.0 - gamma_r]])
    return _apply_per_qubit(prob, one)


def unconvolve_readout(hist: np.ndarray, gamma_r: float) -> np.ndarray:
    """Apply ``C^{-1}`` to a dense histogram or distribution."""
    if gamma_r == 0.0:
        return np.asarray(hist, dtype=float).copy()
    g = gamma_r
    inv = np.array([[1.0 - g, -g], [-g, 1.0 - g]]) / (1.0 - 2.0 * g)
    return _apply_per_qubit(hist, inv)


def corrected_tally(counts, targets: Sequence[int] | np.ndarray, gamma_r: float) -> np.ndarray:
    """``sum_j C^{-1}[a, j] N_j`` for each target ``a`` over observed ``j``."""
    targets = np.asarray(targets, dtype=np.int64)
    if gamma_r == 0.0:
        return np.array([counts.count(int(a)) for a in targets], dtype=float)
    out = np.empty(targets.size)
    weights = np.asarray(counts.counts, dtype=float)
    for i, a in enumerate(targets):
        out[i] = np.dot(confusion_inverse_weight(int(a), counts.outcomes, gamma_r, counts.n), weights)
    return out


# -- codewords --------------------------------------------------------------

def min_pairwise_distance(codewords: Iterable[int]) -> int:
    words = np.unique(np.asarray(list(codewords), dtype=np.int64))
    if words.size < 2:
        raise ReadoutError("minimum distance needs at least two distinct codewords")
    best = None
    for i in range(words.size - 1):
        d = int(hamming(words[i], words[i + 1:]).min())
        best = d if best is None else min(best, d)
    return best


@dataclass(frozen=True)
class CodewordSet:
    """Distinct signal bitstrings plus the no-signal outcome ``0``."""

    n: int
    codewords: tuple[int, ...]

    def __post_init__(self) -> None:
        words = tuple(int(c) for c in self.codewords)
        if 0 not in words:
            words = (0, *words)
        if len(set(words)) != len(words):
            raise ReadoutError("codewords must be distinct")
        # text order, qubit 1 first: ties are broken toward the smallest label
        ordered = tuple(sorted(words, key=lambda c: format_bits(c, self.n)))
        object.__setattr__(self, "codewords", ordered)

    @property
    def d_min(self) -> int:
        return min_pairwise_distance(self.codewords) if len(self.codewords) > 1 else self.n

    @property
    def radius(self) -> int:
        """Unique-decoding radius ``floor((d_min - 1) / 2)``."""
        return (self.d_min - 1) // 2

    def array(self) -> np.ndarray:
        return np.asarray(self.codewords, dtype=np.int64)


def decode_nearest(z: int, codes: CodewordSet) -> tuple[int, bool]:
    """Nearest codeword to ``z`` and whether the choice was a tie."""
    d = hamming(z, codes.array())
    best = int(d.min())
    hits = np.flatnonzero(d == best)
    return int(codes.codewords[hits[0]]), hits.size > 1


@dataclass(frozen=True)
class DecodeStats:
    decoded_shots: int
    tie_shots: int
    out_of_radius_shots: int


def decode_shots(shots: np.ndarray, codes: CodewordSet, radius: int | None = None,
                 chunk: int = 65536) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nearest-codeword decoding of an array of bitstrings.

    Returns the decoded array, a mask of shots that were within ``radius``
    (only those are replaced) and a mask of ties among them.  Ties go to the
    first codeword in text order.
    """
    if radius is None:
        radius = codes.radius
    shots = np.asarray(shots, dtype=np.int64)
    words = codes.array()
    out = shots.copy()
    inside = np.zeros(shots.size, dtype=bool)
    tie = np.zeros(shots.size, dtype=bool)
    for lo in range(0, shots.size, chunk):
        block = shots[lo:lo + chunk]
        d = np.bitwise_count(block[:, None] ^ words[None, :])
        best = d.min(axis=1)
        arg = d.argmin(axis=1)
        ok = best <= radius
        out[lo:lo + chunk][ok] = words[arg[ok]]
        inside[lo:lo + chunk] = ok
        tie[lo:lo + chunk] = ok & ((d == best[:, None]).sum(axis=1) > 1)
    return out, inside, tie


def decode_counts(counts: BitstringCounts, codes: CodewordSet,
                  radius: int | None = None) -> tuple[BitstringCounts, DecodeStats]:
    """Replace recorded outcomes within ``radius`` of a codeword by that codeword.

    Outcomes farther than ``radius`` from every codeword are left unchanged
    and reported as out of radius.  ``radius`` defaults to the unique
    decoding radius ``floor((d_min - 1) / 2)``.
    """
    decoded, inside, tie = decode_shots(counts.outcomes, codes, radius)
    c = np.asarray(counts.counts)
    stats = DecodeStats(int(c[inside].sum()), int(c[tie].sum()), int(c[~inside].sum()))
    return type(counts)(counts.n, decoded, counts.counts, counts.circuit), stats


# -- strong-robustness bounds ------------------------------------------------

def hamming_ball_volume(n: int, r: int) -> int:
    return sum(math.comb(n, k) for k in range(0, max(r, -1) + 1))


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def min_distance_probability_bound(n: int, K: int, d: int) -> float:
    """Lower bound on ``Pr(d_min >= d)`` for ``K`` uniform random codewords."""
    if K <= 1:
        return 1.0
    vol = hamming_ball_volume(n, d - 1)
    log_p = 0.0
    total = 2 ** n
    for m in range(K):
        free = total - m * vol
        if free <= 0:
            return 0.0
        log_p += math.log(free) - n * math.log(2)
    return math.exp(log_p)


def min_distance_probability_approx(n: int, K: int, d: int) -> float:
    """``exp(-2^{-n(1 - H((d-1)/n))} K(K-1)/2)``."""
    expo = -n * (1.0 - binary_entropy((d - 1) / n))
    return math.exp(-(2.0 ** expo) * K * (K - 1) / 2)


@dataclass(frozen=True)
class CorrectabilityReport:
    d_min: int
    relative_radius: float
    gamma_r: float
    correctable: bool
    bound: float
    approx: float


def correctability_check(codes: CodewordSet, gamma_r: float) -> CorrectabilityReport:
    n = codes.n
    d = codes.d_min
    rel = d / (2 * n)
    K = len(codes.codewords)
    return CorrectabilityReport(
        d_min=d,
        relative_radius=rel,
        gamma_r=gamma_r,
        correctable=gamma_r < rel,
        bound=min_distance_probability_bound(n, K, d),
        approx=min_distance_probability_approx(n, K, d),
    )
