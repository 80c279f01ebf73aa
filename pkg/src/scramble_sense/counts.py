"""Measurement tallies over bitstrings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_COUNT_QUBITS = 62


@dataclass(frozen=True)
class BitstringCounts:
    """Tally of measured bitstrings for one circuit.

    ``outcomes`` holds distinct bitstrings (qubit 1 = least significant bit)
    in increasing order and ``counts`` the matching positive tallies.
    """

    n: int
    outcomes: np.ndarray
    counts: np.ndarray
    circuit: int = 0

    def __post_init__(self) -> None:
        if self.n > MAX_COUNT_QUBITS:
            raise ValueError(f"tallies support n <= {MAX_COUNT_QUBITS}, got {self.n}")
        outcomes = np.asarray(self.outcomes, dtype=np.int64)
        counts = np.asarray(self.counts, dtype=np.int64)
        if outcomes.shape != counts.shape:
            raise ValueError("outcomes and counts differ in length")
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        if outcomes.size and (outcomes.min() < 0 or outcomes.max() >> self.n):
            raise ValueError(f"outcome outside 0..2^{self.n}-1")
        keep = counts > 0
        outcomes, counts = outcomes[keep], counts[keep]
        order = np.argsort(outcomes, kind="stable")
        outcomes, counts = outcomes[order], counts[order]
        if outcomes.size > 1 and np.any(np.diff(outcomes) == 0):
            uniq, inv = np.unique(outcomes, return_inverse=True)
            counts = np.bincount(inv, weights=counts).astype(np.int64)
            outcomes = uniq
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "counts", counts)

    @property
    def shots(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_shots(cls, n: int, shots: np.ndarray, circuit: int = 0) -> "BitstringCounts":
        uniq, cnt = np.unique(np.asarray(shots, dtype=np.int64), return_counts=True)
        return cls(n, uniq, cnt, circuit)

    @classmethod
    def from_dict(cls, n: int, tally: dict[int, int], circuit: int = 0) -> "BitstringCounts":
        keys = np.fromiter(tally.keys(), dtype=np.int64, count=len(tally))
        vals = np.fromiter(tally.values(), dtype=np.int64, count=len(tally))
        return cls(n, keys, vals, circuit)

    @classmethod
    def from_histogram(cls, hist: np.ndarray, circuit: int = 0) -> "BitstringCounts":
        hist = np.asarray(hist)
        n = int(round(np.log2(hist.size)))
        idx = np.flatnonzero(hist)
        return cls(n, idx.astype(np.int64), hist[idx].astype(np.int64), circuit)

    def as_dict(self) -> dict[int, int]:
        return {int(z): int(c) for z, c in zip(self.outcomes, self.counts)}

    def count(self, z: int) -> int:
        i = np.searchsorted(self.outcomes, z)
        if i < self.outcomes.size and self.outcomes[i] == z:
            return int(self.counts[i])
        return 0

    def histogram(self) -> np.ndarray:
        """Dense length-``2**n`` count vector (small ``n`` only)."""
        hist = np.zeros(1 << self.n, dtype=np.int64)
        hist[self.outcomes] = self.counts
        return hist

    def shots_array(self) -> np.ndarray:
        return np.repeat(self.outcomes, self.counts)

    def merge(self, other: "BitstringCounts") -> "BitstringCounts":
        if other.n != self.n:
            raise ValueError("cannot merge tallies on different qubit counts")
        return BitstringCounts(
            self.n,
            np.concatenate([self.outcomes, other.outcomes]),
            np.concatenate([self.counts, other.counts]),
            self.circuit,
        )


@dataclass(frozen=True)
class WeightedCounts:
    """Real-valued stand-in for counts, used to feed exact distributions.

    Estimators only depend on frequencies, so passing ``M * p(z)`` as a
    weighted tally evaluates them at infinite sample size.
    """

    n: int
    outcomes: np.ndarray
    counts: np.ndarray
    circuit: int = 0

    def __post_init__(self) -> None:
        uniq, inv = np.unique(np.asarray(self.outcomes, dtype=np.int64), return_inverse=True)
        weights = np.bincount(inv, weights=np.asarray(self.counts, dtype=float), minlength=uniq.size)
        object.__setattr__(self, "outcomes", uniq)
        object.__setattr__(self, "counts", weights)

    @property
    def shots(self) -> float:
        return float(np.sum(self.counts))

    @classmethod
    def from_distribution(cls, prob: np.ndarray, shots: float = 1.0, circuit: int = 0,
                          cutoff: float = 0.0) -> "WeightedCounts":
        prob = np.asarray(prob, dtype=float)
        n = int(round(np.log2(prob.size)))
        idx = np.flatnonzero(np.abs(prob) > cutoff)
        return cls(n, idx.astype(np.int64), prob[idx] * shots, circuit)

    def histogram(self) -> np.ndarray:
        hist = np.zeros(1 << self.n, dtype=float)
        hist[self.outcomes] = self.counts
        return hist

    def count(self, z: int) -> float:
        i = np.searchsorted(self.outcomes, z)
        if i < self.outcomes.size and self.outcomes[i] == z:
            return float(self.counts[i])
        return 0.0


def split_shots(M: int, n_circuits: int) -> list[int]:
    """Per-circuit shot numbers: floor split, remainder to the first circuits."""
    if n_circuits < 1:
        raise ValueError("need at least one circuit")
    base, rem = divmod(int(M), n_circuits)
    return [base + (1 if i < rem else 0) for i in range(n_circuits)]
