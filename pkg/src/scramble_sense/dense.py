"""Exact state-vector reference simulator.

State vectors are length ``2**n`` complex arrays indexed by bitstrings with
qubit 1 as the least significant bit.  Circuits are flat lists of elements;
Pauli channels are simulated by trajectories (each channel either applies its
Pauli or not), which is exact for Pauli noise.  Exact output distributions
sum trajectories over every jump pattern.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal

from .clifford import CircuitFamily, CliffordTableau, brickwork_pairs
from .counts import BitstringCounts
from .pauli import PauliString
from .readout import apply_bitflip_noise
from .signals import COHERENT, SignalSet

MAX_DENSE_QUBITS = 14
MAX_ENUMERATION_LOG2 = 26


class SimulationError(RuntimeError):
    """Raised when a simulation request exceeds its budget or is inconsistent."""


# -- primitive kernels -------------------------------------------------------

_IPOW = np.array([1, 1j, -1, -1j])


def basis_indices(n: int) -> np.ndarray:
    return np.arange(1 << n, dtype=np.int64)


def apply_pauli(psi: np.ndarray, p: PauliString) -> np.ndarray:
    """``P psi`` for a state vector (or a matrix whose rows index bitstrings)."""
    idx = basis_indices(p.n)
    quarter = (p.phase + (p.x & p.z).bit_count() + 2 * np.bitwise_count(idx & p.z)) % 4
    out = np.empty_like(psi, dtype=complex)
    factor = _IPOW[quarter]
    if psi.ndim == 1:
        out[idx ^ p.x] = factor * psi
    else:
        out[idx ^ p.x] = factor[:, None] * psi
    return out


def pauli_matrix(p: PauliString) -> np.ndarray:
    """Dense matrix of ``p`` (oracle use)."""
    return apply_pauli(np.eye(1 << p.n, dtype=complex), p)


def apply_rotation(psi: np.ndarray, p: PauliString, theta: float) -> np.ndarray:
    """``exp(-i theta P) psi`` for Hermitian ``P``."""
    if theta == 0.0:
        return psi
    return math.cos(theta) * psi - 1j * math.sin(theta) * apply_pauli(psi, p)


def _axis(n: int, qubit: int) -> int:
    return n - 1 - qubit


def apply_one_qubit(psi: np.ndarray, u: np.ndarray, qubit: int) -> np.ndarray:
    n = int(round(math.log2(psi.size)))
    ax = _axis(n, qubit)
    t = np.tensordot(u, psi.reshape((2,) * n), axes=([1], [ax]))
    return np.moveaxis(t, 0, ax).reshape(-1)


def apply_two_qubit(psi: np.ndarray, u: np.ndarray, qa: int, qb: int) -> np.ndarray:
    """Apply a 4x4 gate whose basis index is ``bit(qa) + 2 * bit(qb)``."""
    n = int(round(math.log2(psi.size)))
    ax_a, ax_b = _axis(n, qa), _axis(n, qb)
    u4 = u.reshape(2, 2, 2, 2)  # (out_b, out_a, in_b, in_a)
    t = np.tensordot(u4, psi.reshape((2,) * n), axes=([2, 3], [ax_b, ax_a]))
    return np.moveaxis(t, [0, 1], [ax_b, ax_a]).reshape(-1)


def fwht(vec: np.ndarray) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform along axis 0."""
    out = np.array(vec, copy=True)
    size = out.shape[0]
    h = 1
    while h < size:
        view = out.reshape((size // (2 * h), 2, h) + out.shape[1:])
        a = view[:, 0].copy()
        b = view[:, 1]
        view[:, 0] = a + b
        view[:, 1] = a - b
        h *= 2
    return out


def apply_hadamard_all(psi: np.ndarray) -> np.ndarray:
    return fwht(psi) / math.sqrt(psi.shape[0])


def x_rotation(phi: float) -> np.ndarray:
    """``X(phi) = exp(-i phi X / 2)``."""
    c, s = math.cos(phi / 2), math.sin(phi / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def apply_x_rotation_all(psi: np.ndarray, phi: float) -> np.ndarray:
    n = int(round(math.log2(psi.size)))
    u = x_rotation(phi)
    for q in range(n):
        psi = apply_one_qubit(psi, u, q)
    return psi


def tableau_unitary(tab: CliffordTableau) -> np.ndarray:
    """A dense unitary ``U`` (up to global phase) realising the tableau.

    ``W = U^dag`` maps ``|0>`` to the state stabilised by the Z-images and
    ``|b>`` to the X-images applied to that state.
    """
    n = tab.n
    dim = 1 << n
    psi0 = None
    for j in range(dim):
        v = np.zeros(dim, dtype=complex)
        v[j] = 1.0
        for g in tab.z_images:
            v = 0.5 * (v + apply_pauli(v, g))
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            psi0 = v / norm
            break
    if psi0 is None:  # pragma: no cover - impossible for a valid tableau
        raise SimulationError("tableau has no stabilised state")
    cols = psi0[:, None]
    for k in range(n):
        cols = np.concatenate([cols, apply_pauli(cols, tab.x_images[k])], axis=1)
    return cols.conj().T


def haar_two_qubit(rng: np.random.Generator) -> np.ndarray:
    """Haar-random 4x4 unitary from a QR decomposition with phase fix."""
    z = (rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


# -- Hamiltonians -------------------------------------------------------------

@dataclass(frozen=True)
class PauliSum:
    """Real linear combination of Pauli strings."""

    n: int
    terms: tuple[tuple[float, PauliString], ...]

    def to_sparse(self) -> sp.csr_matrix:
        dim = 1 << self.n
        idx = basis_indices(self.n)
        total = sp.csr_matrix((dim, dim), dtype=complex)
        for coef, p in self.terms:
            quarter = (p.phase + (p.x & p.z).bit_count() + 2 * np.bitwise_count(idx & p.z)) % 4
            mat = sp.csr_matrix((coef * _IPOW[quarter], (idx ^ p.x, idx)), shape=(dim, dim))
            total = total + mat
        return total.tocsr()

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()


KIM_HUSE_HX = (math.sqrt(5) + 5) / 8
KIM_HUSE_HZ = (math.sqrt(5) + 1) / 4


def kim_huse_hamiltonian(n: int, hx: float = KIM_HUSE_HX, hz: float = KIM_HUSE_HZ) -> PauliSum:
    """``H = -sum Z_i Z_{i+1} - hx sum X_i - hz sum Z_i`` on a ring.

    At ``n = 2`` both ring bonds join the same pair, so the ZZ coefficient
    totals -2.
    """
    if n < 2:
        raise SimulationError("the mixed-field Ising ring needs n >= 2")
    terms: list[tuple[float, PauliString]] = []
    for q in range(n):
        terms.append((-1.0, PauliString.from_sites(n, {q: "Z", (q + 1) % n: "Z"})))
    for q in range(n):
        terms.append((-hx, PauliString.single(n, q, "X")))
        terms.append((-hz, PauliString.single(n, q, "Z")))
    return PauliSum(n, tuple(terms))


def propagate_hamiltonian(h: sp.spmatrix | np.ndarray, tau: float, psi: np.ndarray,
                          tol: float = 1e-10, krylov_dim: int = 30,
                          max_steps: int = 200) -> np.ndarray:
    """Lanczos approximation of ``exp(-i H tau) psi``.

    The Krylov space is rebuilt at most ``max_steps`` times; each step halves
    its time slice until the a-posteriori error estimate drops below
    ``tol * dt / tau``.
    """
    if tau == 0.0:
        return np.array(psi, dtype=complex, copy=True)
    if tol <= 0:
        raise SimulationError("tolerance must be positive")
    v = np.array(psi, dtype=complex, copy=True)
    norm0 = np.linalg.norm(v)
    remaining = float(tau)
    dt = remaining
    steps = 0
    while remaining > 1e-15 * abs(tau):
        steps += 1
        if steps > max_steps:
            raise SimulationError("Krylov propagation did not converge within the step cap")
        beta0 = np.linalg.norm(v)
        basis = [v / beta0]
        alpha: list[float] = []
        beta: list[float] = []
        residual = 0.0
        for j in range(min(krylov_dim, v.size)):
            w = h @ basis[j]
            a = float(np.vdot(basis[j], w).real)
            w = w - a * basis[j] - (beta[-1] * basis[j - 1] if j else 0.0)
            # full reorthogonalisation keeps the small basis numerically exact
            for b in basis:
                w = w - np.vdot(b, w) * b
            alpha.append(a)
            residual = float(np.linalg.norm(w))
            if residual < 1e-14 or j == min(krylov_dim, v.size) - 1:
                break
            beta.append(residual)
            basis.append(w / residual)
        m = len(alpha)
        evals, evecs = eigh_tridiagonal(np.array(alpha), np.array(beta[: m - 1])) if m > 1 else (
            np.array(alpha), np.ones((1, 1)))
        dt = min(dt, remaining)
        while True:
            coeff = evecs @ (np.exp(-1j * evals * dt) * evecs[0].conj())
            err = residual * abs(coeff[-1]) * beta0
            if err <= tol * dt / abs(tau) or residual < 1e-14:
                break
            dt /= 2
        v = beta0 * (np.stack(basis[:m], axis=1) @ coeff)
        remaining -= dt
        dt = min(2 * dt, remaining) if remaining > 0 else dt
    return v * (norm0 / np.linalg.norm(v))


def propagate_dense(h: np.ndarray, tau: float, psi: np.ndarray) -> np.ndarray:
    """Eigendecomposition propagator (oracle for the Krylov path)."""
    evals, evecs = np.linalg.eigh(h)
    return evecs @ (np.exp(-1j * evals * tau) * (evecs.conj().T @ psi))


# -- circuit elements ----------------------------------------------------------

@dataclass(frozen=True)
class CliffordLayer:
    tableau: CliffordTableau


@dataclass(frozen=True)
class HadamardAll:
    pass


@dataclass(frozen=True)
class XRotationAll:
    phi: float


@dataclass(frozen=True)
class PauliRotation:
    pauli: PauliString
    theta: float
    signal_id: int | None = None


@dataclass(frozen=True)
class PauliChannel:
    pauli: PauliString
    gamma: float
    signal_id: int | None = None


@dataclass(frozen=True)
class HaarTwoQubit:
    unitary: np.ndarray = field(compare=False)
    qubits: tuple[int, int] = (0, 1)


@dataclass(frozen=True)
class HamiltonianSegment:
    hamiltonian: PauliSum
    tau: float


@dataclass(frozen=True)
class InsertPauli:
    """Deterministic Pauli insertion (used for exact incoherent patterns)."""

    pauli: PauliString


CircuitElement = Union[CliffordLayer, HadamardAll, XRotationAll, PauliRotation,
                       PauliChannel, HaarTwoQubit, HamiltonianSegment, InsertPauli]


@dataclass
class Circuit:
    n: int
    elements: list
    basis: str = "z"
    initial: str = "zero"

    def __post_init__(self) -> None:
        if self.basis not in ("z", "x"):
            raise SimulationError(f"unknown measurement basis {self.basis!r}")
        if self.initial not in ("zero", "plus", "plus_y"):
            raise SimulationError(f"unknown initial state {self.initial!r}")
        for el in self.elements:
            p = getattr(el, "pauli", None)
            if p is not None and (p.n != self.n or not p.is_hermitian):
                raise SimulationError("Pauli elements must be Hermitian and match n")

    @property
    def channels(self) -> list[PauliChannel]:
        return [el for el in self.elements if isinstance(el, PauliChannel)]

    def replace(self, index: int, element) -> "Circuit":
        elements = list(self.elements)
        elements[index] = element
        return Circuit(self.n, elements, self.basis, self.initial)


def initial_state(n: int, label: str) -> np.ndarray:
    dim = 1 << n
    if label == "zero":
        psi = np.zeros(dim, dtype=complex)
        psi[0] = 1.0
        return psi
    if label == "plus":
        return np.full(dim, 1 / math.sqrt(dim), dtype=complex)
    if label == "plus_y":
        one = np.array([1.0, 1j]) / math.sqrt(2)
        psi = np.ones(1, dtype=complex)
        for _ in range(n):
            psi = np.kron(one, psi)
        return psi
    raise SimulationError(f"unknown initial state {label!r}")


@lru_cache(maxsize=256)
def _cached_unitary(tab: CliffordTableau) -> np.ndarray:
    return tableau_unitary(tab)


@lru_cache(maxsize=64)
def _cached_sparse(h: PauliSum) -> sp.csr_matrix:
    return h.to_sparse()


def apply_element(el, psi: np.ndarray, jump: bool = False, tol: float = 1e-10) -> np.ndarray:
    """Apply one circuit element; ``jump`` decides whether a channel fires."""
    if isinstance(el, PauliRotation):
        return apply_rotation(psi, el.pauli, el.theta)
    if isinstance(el, PauliChannel):
        return apply_pauli(psi, el.pauli) if jump else psi
    if isinstance(el, InsertPauli):
        return apply_pauli(psi, el.pauli)
    if isinstance(el, HadamardAll):
        return apply_hadamard_all(psi)
    if isinstance(el, XRotationAll):
        return apply_x_rotation_all(psi, el.phi)
    if isinstance(el, CliffordLayer):
        return _cached_unitary(el.tableau) @ psi
    if isinstance(el, HaarTwoQubit):
        return apply_two_qubit(psi, el.unitary, *el.qubits)
    if isinstance(el, HamiltonianSegment):
        return propagate_hamiltonian(_cached_sparse(el.hamiltonian), el.tau, psi, tol=tol)
    raise SimulationError(f"unknown circuit element {el!r}")


def evolve(elements: Sequence, psi: np.ndarray, jumps: Sequence[bool] | None = None,
           tol: float = 1e-10) -> np.ndarray:
    """Run a list of elements; channels consume ``jumps`` in order (default: none fire)."""
    ch = 0
    for el in elements:
        jump = False
        if isinstance(el, PauliChannel):
            jump = bool(jumps[ch]) if jumps is not None else False
            ch += 1
        psi = apply_element(el, psi, jump, tol)
    return psi


def run_pure(circuit: Circuit, jumps: Sequence[bool] | None = None,
             psi: np.ndarray | None = None, max_qubits: int = MAX_DENSE_QUBITS,
             tol: float = 1e-10) -> np.ndarray:
    """Evolve a state through the circuit along one trajectory.

    ``jumps[i]`` decides whether the ``i``-th Pauli channel fires.  The state
    before measurement is returned (the x-basis rotation included when the
    circuit measures in x).
    """
    n = circuit.n
    if n > max_qubits:
        raise SimulationError(f"n={n} exceeds the dense cap of {max_qubits} qubits")
    n_channels = len(circuit.channels)
    if jumps is not None and len(jumps) != n_channels:
        raise SimulationError(f"jump pattern has {len(jumps)} entries, circuit has {n_channels} channels")
    if psi is None:
        psi = initial_state(n, circuit.initial)
    psi = evolve(circuit.elements, psi, jumps, tol)
    if circuit.basis == "x":
        psi = apply_hadamard_all(psi)
    return psi


def probabilities(psi: np.ndarray) -> np.ndarray:
    p = np.abs(psi) ** 2
    return p / p.sum()


def exact_distribution(circuit: Circuit, max_qubits: int = MAX_DENSE_QUBITS) -> np.ndarray:
    """Exact outcome distribution by enumerating every jump pattern."""
    chans = circuit.channels
    active = [i for i, c in enumerate(chans) if c.gamma > 0]
    if len(active) + circuit.n > MAX_ENUMERATION_LOG2:
        raise SimulationError(
            f"enumeration budget exceeded: {len(active)} channels on {circuit.n} qubits"
        )
    total = np.zeros(1 << circuit.n)
    for bits in itertools.product((False, True), repeat=len(active)):
        weight = 1.0
        jumps = [False] * len(chans)
        for i, b in zip(active, bits):
            g = chans[i].gamma
            weight *= g if b else 1.0 - g
            jumps[i] = b
        if weight == 0.0:
            continue
        total += weight * np.abs(run_pure(circuit, jumps, max_qubits=max_qubits)) ** 2
    return total


def sample_jumps(circuit: Circuit, M: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Distinct jump patterns among ``M`` shots and their multiplicities."""
    gammas = np.array([c.gamma for c in circuit.channels], dtype=float)
    if gammas.size == 0 or not np.any(gammas > 0):
        return np.zeros((1, gammas.size), dtype=bool), np.array([M])
    draws = rng.random((M, gammas.size)) < gammas
    patterns, mult = np.unique(draws, axis=0, return_counts=True)
    return patterns, mult


def sample_shots(circuit: Circuit, M: int, gamma_r: float, rng: np.random.Generator,
                 max_qubits: int = MAX_DENSE_QUBITS) -> BitstringCounts:
    """Draw ``M`` measurement shots including Pauli jumps and readout flips."""
    if M < 1:
        raise SimulationError("need at least one shot")
    if not 0.0 <= gamma_r < 0.5:
        raise SimulationError(f"readout error rate must lie in [0, 0.5), got {gamma_r}")
    hist = np.zeros(1 << circuit.n, dtype=np.int64)
    patterns, mult = sample_jumps(circuit, M, rng)
    for pattern, m in zip(patterns, mult):
        prob = probabilities(run_pure(circuit, list(pattern), max_qubits=max_qubits))
        hist += rng.multinomial(int(m), prob)
    counts = BitstringCounts.from_histogram(hist)
    return apply_bitflip_noise(counts, gamma_r, rng)


def sample_from_distribution(prob: np.ndarray, M: int, gamma_r: float,
                             rng: np.random.Generator, circuit: int = 0) -> BitstringCounts:
    hist = rng.multinomial(int(M), np.asarray(prob) / np.sum(prob))
    counts = BitstringCounts.from_histogram(hist, circuit)
    return apply_bitflip_noise(counts, gamma_r, rng)


# -- protocol randomness ---------------------------------------------------------

@dataclass
class RUCFamily:
    """``T + 1`` scrambling layers of Haar two-qubit gates in brickwork.

    Each layer is an even row followed by an odd row (periodic pair on the
    odd row).
    """

    n: int
    layers: list[list[tuple[np.ndarray, int, int]]]

    @property
    def T(self) -> int:
        return len(self.layers) - 1

    @classmethod
    def sample(cls, n: int, T: int, rng: np.random.Generator) -> "RUCFamily":
        layers = []
        for _ in range(T + 1):
            gates = []
            for row in (0, 1):
                for qa, qb in brickwork_pairs(n, row):
                    gates.append((haar_two_qubit(rng), qa, qb))
            layers.append(gates)
        return cls(n, layers)

    def elements(self, layer: int) -> list[HaarTwoQubit]:
        return [HaarTwoQubit(u, (qa, qb)) for u, qa, qb in self.layers[layer]]


@dataclass(frozen=True)
class HamiltonianDynamics:
    """Fixed evolution ``exp(-i H tau)`` between signal layers (``T + 1`` segments)."""

    hamiltonian: PauliSum
    tau: float
    T: int

    @property
    def n(self) -> int:
        return self.hamiltonian.n


PROTOCOLS = ("quad-ramsey", "tilted-ramsey", "clifford-z", "clifford-x", "ruc", "hamiltonian")


def signal_elements(signals: SignalSet, t: int) -> list:
    out = []
    for s in signals.at_step(t):
        if s.kind == COHERENT:
            out.append(PauliRotation(s.generator, s.amplitude, s.id))
        else:
            out.append(PauliChannel(s.generator, s.amplitude, s.id))
    return out


def build_protocol_circuit(protocol: str, signals: SignalSet, randomness=None,
                           phi: float | None = None) -> Circuit:
    """Assemble the literal sensing circuit for ``protocol``."""
    n = signals.n
    if protocol in ("quad-ramsey", "tilted-ramsey"):
        if randomness is not None:
            raise SimulationError("Ramsey protocols take no scrambling randomness")
        for s in signals:
            if not s.generator.is_z_type:
                raise SimulationError("Ramsey protocols sense Z-string generators only")
        elements = []
        for t in range(1, signals.T + 1):
            elements += signal_elements(signals, t)
        if protocol == "quad-ramsey":
            elements.append(HadamardAll())
        else:
            if phi is None:
                raise SimulationError("tilted Ramsey needs the tilt angle phi")
            elements.append(XRotationAll(phi))
        return Circuit(n, elements, "z", "plus")
    if protocol in ("clifford-z", "clifford-x"):
        if not isinstance(randomness, CircuitFamily):
            raise SimulationError("Clifford protocols need a CircuitFamily")
        if randomness.n != n or randomness.T != signals.T:
            raise SimulationError("circuit family shape differs from the signal set")
        elements = []
        for t in range(1, signals.T + 1):
            elements.append(CliffordLayer(randomness.layers[t - 1]))
            elements += signal_elements(signals, t)
        elements.append(CliffordLayer(randomness.terminal))
        if protocol == "clifford-x":
            elements.append(HadamardAll())
        return Circuit(n, elements, "z", "zero")
    if protocol == "ruc":
        if not isinstance(randomness, RUCFamily):
            raise SimulationError("the RUC protocol needs an RUCFamily")
        if randomness.n != n or randomness.T != signals.T:
            raise SimulationError("RUC family shape differs from the signal set")
        elements = []
        for t in range(1, signals.T + 1):
            elements += randomness.elements(t - 1)
            elements += signal_elements(signals, t)
        elements += randomness.elements(signals.T)
        return Circuit(n, elements, "z", "zero")
    if protocol == "hamiltonian":
        if not isinstance(randomness, HamiltonianDynamics):
            raise SimulationError("the Hamiltonian protocol needs HamiltonianDynamics")
        if randomness.n != n or randomness.T != signals.T:
            raise SimulationError("Hamiltonian dynamics shape differs from the signal set")
        seg = HamiltonianSegment(randomness.hamiltonian, randomness.tau)
        elements = []
        for t in range(1, signals.T + 1):
            elements.append(seg)
            elements += signal_elements(signals, t)
        elements.append(seg)
        return Circuit(n, elements, "z", "plus_y")
    raise SimulationError(f"unknown protocol {protocol!r}")
