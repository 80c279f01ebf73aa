"""First-order response of the output distribution to each signal.

For a coherent signal the pattern is ``dp(z) = d p(z) / d theta`` at zero
signal; for an incoherent signal it is ``k(z)``, the outcome distribution
with the Pauli inserted deterministically.  Ramsey and Clifford protocols
have closed forms that are evaluated lazily from a mask; scrambling
dynamics without structure (RUC, Hamiltonian) fall back to dense simulation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .clifford import CliffordTableau, conjugate
from .dense import (
    Circuit,
    InsertPauli,
    MAX_DENSE_QUBITS,
    PauliChannel,
    PauliRotation,
    SimulationError,
    apply_element,
    apply_hadamard_all,
    apply_rotation,
    build_protocol_circuit,
    evolve,
    initial_state,
    probabilities,
)
from .pauli import PauliString, count_y, x_support
from .signals import COHERENT, SignalSet, SignalSpec


class PatternError(ValueError):
    """Raised for generators a closed-form pattern does not cover."""


class FiniteDifferenceError(SimulationError):
    """Raised when the Richardson check on a finite difference fails."""


def _parity(z: np.ndarray, mask: int) -> np.ndarray:
    return np.bitwise_count(np.bitwise_and(np.asarray(z, dtype=np.int64), np.int64(mask))) & 1


@dataclass(frozen=True)
class PointMass:
    """Pattern equal to one at bitstring ``z`` and zero elsewhere."""

    n: int
    z: int

    def value(self, zs) -> np.ndarray:
        return (np.asarray(zs, dtype=np.int64) == self.z).astype(float)

    def dense(self) -> np.ndarray:
        out = np.zeros(1 << self.n)
        out[self.z] = 1.0
        return out


@dataclass(frozen=True)
class SignedUniform:
    """Pattern ``sigma * (-1)^{parity(z & mask)} * magnitude``."""

    n: int
    mask: int
    sigma: int
    magnitude: float

    def __post_init__(self) -> None:
        if self.sigma not in (-1, 0, 1):
            raise PatternError(f"sign must be -1, 0 or +1, got {self.sigma}")
        if self.magnitude < 0:
            raise PatternError("magnitude must be nonnegative")

    @property
    def visible(self) -> bool:
        return self.sigma != 0

    def value(self, zs) -> np.ndarray:
        signs = 1.0 - 2.0 * _parity(zs, self.mask)
        return self.sigma * self.magnitude * signs

    def dense(self) -> np.ndarray:
        return self.value(np.arange(1 << self.n, dtype=np.int64))


@dataclass(frozen=True)
class DensePattern:
    values: np.ndarray = field(compare=False)

    @property
    def n(self) -> int:
        return int(round(math.log2(self.values.size)))

    def value(self, zs) -> np.ndarray:
        return self.values[np.asarray(zs, dtype=np.int64)]

    def dense(self) -> np.ndarray:
        return self.values


def _generator(signal: SignalSpec | PauliString) -> PauliString:
    return signal.generator if isinstance(signal, SignalSpec) else signal


def _z_mask(p: PauliString) -> int:
    if not p.is_z_type or p.is_identity:
        raise PatternError(f"Ramsey patterns need a non-identity Z string, got {p.label()}")
    return p.z


# -- closed forms ------------------------------------------------------------

def quad_pattern(signal: SignalSpec | PauliString) -> PointMass:
    """Point mass at the label mask of a Z string (second-order response)."""
    p = _generator(signal)
    return PointMass(p.n, _z_mask(p))


def tilted_pattern(signal: SignalSpec | PauliString, phi: float) -> SignedUniform:
    """``dp_a(z) = (-1)^{z.a} sin(s_a phi) / 2^{N-1}``, ``s_a`` the string weight."""
    p = _generator(signal)
    mask = _z_mask(p)
    s = math.sin(p.weight * phi)
    if abs(s) < 1e-12:
        warnings.warn(
            f"tilt angle makes {p.label()} an insensitive direction (sin(s*phi) = 0)",
            RuntimeWarning,
            stacklevel=2,
        )
        return SignedUniform(p.n, mask, 0, 0.0)
    return SignedUniform(p.n, mask, 1 if s > 0 else -1, abs(s) / 2 ** (p.n - 1))


def clifford_incoherent_pattern(prefix: CliffordTableau, signal: SignalSpec | PauliString) -> PointMass:
    """Codeword ``x_support(U^dag P U)`` of an incoherent signal."""
    p_frame, _ = conjugate(prefix, _generator(signal))
    return PointMass(prefix.n, x_support(p_frame))


def clifford_coherent_pattern(prefix: CliffordTableau, signal: SignalSpec | PauliString) -> SignedUniform:
    """Signed-uniform pattern of a coherent signal in an x-basis Clifford circuit.

    With ``U^dag P U = s P'`` the pattern has mask ``x_support(P')`` and sign
    ``Im[s i^{n_y}]``, which vanishes when ``P'`` holds an even number of Ys.
    """
    p_frame, sign = conjugate(prefix, _generator(signal))
    n = prefix.n
    n_y = count_y(p_frame)
    if n_y % 2 == 0:
        return SignedUniform(n, x_support(p_frame), 0, 0.0)
    # Im[i^{n_y}] is +1 for n_y = 1 mod 4 and -1 for n_y = 3 mod 4
    sigma = sign * (1 if n_y % 4 == 1 else -1)
    return SignedUniform(n, x_support(p_frame), sigma, 1.0 / 2 ** (n - 1))


def clifford_patterns(family, signals: SignalSet) -> list:
    """Closed-form pattern for every signal under one circuit family."""
    out = []
    for s in signals:
        prefix = family.prefixes[s.t - 1]
        if s.kind == COHERENT:
            out.append(clifford_coherent_pattern(prefix, s))
        else:
            out.append(clifford_incoherent_pattern(prefix, s))
    return out


# -- dense patterns ----------------------------------------------------------

@dataclass
class DensePatterns:
    """``p0`` plus one dense pattern per signal, aligned with ``signals``."""

    p0: np.ndarray
    patterns: list[np.ndarray]
    ids: list[int]

    def pattern(self, signal_id: int) -> np.ndarray:
        return self.patterns[self.ids.index(signal_id)]


def _finish(psi: np.ndarray, circuit: Circuit) -> np.ndarray:
    if circuit.basis == "x":
        psi = apply_hadamard_all(psi)
    return probabilities(psi)


def dense_patterns(protocol: str, signals: SignalSet, randomness=None, phi: float | None = None,
                   h: float = 1e-4, rel_tol: float = 1e-6,
                   max_qubits: int = MAX_DENSE_QUBITS) -> DensePatterns:
    """Dense ``p0``, ``dp`` and ``k`` for every signal by state-vector simulation.

    ``k`` inserts the Pauli deterministically.  ``dp`` is a central finite
    difference in the angle with step ``h``; the step-``h/2`` difference must
    agree within ``rel_tol`` of the pattern's largest entry and the
    Richardson combination of the two is returned.
    """
    if signals.n > max_qubits:
        raise SimulationError(f"n={signals.n} exceeds the dense cap of {max_qubits} qubits")
    zero = signals.with_amplitudes(np.zeros(len(signals)))
    circuit = build_protocol_circuit(protocol, zero, randomness, phi)
    psi = initial_state(circuit.n, circuit.initial)
    elements = circuit.elements
    by_id: dict[int, np.ndarray] = {}
    for i, el in enumerate(elements):
        if isinstance(el, (PauliRotation, PauliChannel)) and el.signal_id is not None:
            rest = elements[i + 1:]
            if isinstance(el, PauliChannel):
                by_id[el.signal_id] = _finish(evolve(rest, apply_element(InsertPauli(el.pauli), psi)), circuit)
            else:
                def prob(theta: float) -> np.ndarray:
                    return _finish(evolve(rest, apply_rotation(psi, el.pauli, theta)), circuit)

                d1 = (prob(h) - prob(-h)) / (2 * h)
                d2 = (prob(h / 2) - prob(-h / 2)) / h
                scale = max(float(np.abs(d2).max()), 1e-12)
                if float(np.abs(d1 - d2).max()) > rel_tol * scale + 1e-12:
                    raise FiniteDifferenceError(
                        f"finite difference for signal {el.signal_id} did not converge"
                    )
                by_id[el.signal_id] = (4 * d2 - d1) / 3
        psi = apply_element(el, psi)
    p0 = _finish(psi, circuit)
    ids = [s.id for s in signals]
    return DensePatterns(p0, [by_id[i] for i in ids], ids)


__all__ = [
    "DensePattern",
    "DensePatterns",
    "FiniteDifferenceError",
    "PatternError",
    "PointMass",
    "SignedUniform",
    "clifford_coherent_pattern",
    "clifford_incoherent_pattern",
    "clifford_patterns",
    "dense_patterns",
    "quad_pattern",
    "tilted_pattern",
]
