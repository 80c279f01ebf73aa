"""Shot sampling for Clifford protocols without dense state vectors.

Every Clifford protocol closes with the inverse of its scrambling prefix, so
the whole circuit equals the signal operations conjugated into the frame of
the initial state: ``exp(-i theta s P')`` for a coherent signal and a jump
``P'`` for an incoherent one, applied to ``|0...0>`` in time order.  Starting
from a basis state these operations keep the amplitude vector supported on
at most ``2^r`` bitstrings, ``r`` being the number of nonzero rotations, so
sampling stays cheap at ``N = 20`` and beyond.

For x-basis measurement the Hadamard layer is never applied to a dense
vector.  The amplitude at ``y`` depends only on the parities of ``y`` against
a basis of the support's difference space; those parities are sampled
exactly and the remaining bits of ``y`` are uniform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clifford import CircuitFamily
from .counts import MAX_COUNT_QUBITS, BitstringCounts
from .dense import Circuit, HadamardAll, PauliChannel, PauliRotation, SimulationError, fwht
from .pauli import PauliString
from .readout import apply_bitflip_noise
from .signals import COHERENT, SignalSet

MAX_FRAME_ROTATIONS = 24


@dataclass(frozen=True)
class FrameOp:
    """A signal operation expressed in the frame of the initial state."""

    kind: str
    pauli: PauliString
    amplitude: float
    signal_id: int


@dataclass(frozen=True)
class FrameCircuit:
    n: int
    ops: tuple[FrameOp, ...]
    basis: str = "z"

    @property
    def rotations(self) -> list[FrameOp]:
        return [op for op in self.ops if op.kind == COHERENT and op.amplitude != 0.0]

    @property
    def channels(self) -> list[FrameOp]:
        return [op for op in self.ops if op.kind != COHERENT and op.amplitude > 0.0]


def frame_circuit(family: CircuitFamily, signals: SignalSet, basis: str = "z") -> FrameCircuit:
    """Frame form of a Clifford protocol; ``basis`` is ``"z"`` or ``"x"``."""
    if basis not in ("z", "x"):
        raise SimulationError(f"unknown measurement basis {basis!r}")
    if family.n != signals.n or family.T != signals.T:
        raise SimulationError("circuit family shape differs from the signal set")
    ops = []
    for s in signals.in_time_order():
        p_frame, sign = family.frame(s.generator, s.t)
        signed = p_frame if sign == 1 else PauliString(p_frame.n, p_frame.x, p_frame.z, 2)
        ops.append(FrameOp(s.kind, signed, s.amplitude, s.id))
    return FrameCircuit(signals.n, tuple(ops), basis)


def frame_dense_circuit(frame: FrameCircuit) -> Circuit:
    """The same frame circuit as a dense-simulator circuit (for cross-checks)."""
    elements = []
    for op in frame.ops:
        if op.kind == COHERENT:
            elements.append(PauliRotation(op.pauli, op.amplitude, op.signal_id))
        else:
            elements.append(PauliChannel(op.pauli, op.amplitude, op.signal_id))
    if frame.basis == "x":
        elements.append(HadamardAll())
    return Circuit(frame.n, elements, "z", "zero")


# -- sparse amplitudes -----------------------------------------------------------

def _pauli_on_bits(p: PauliString, bits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``P|z> = factor |z ^ x>`` for an array of basis states."""
    ph = (p.phase + int(bin(p.x & p.z).count("1"))
          + 2 * (np.bitwise_count(bits & np.int64(p.z)) & 1)) % 4
    return bits ^ np.int64(p.x), (1j) ** ph


def _merge(bits: np.ndarray, amps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    uniq, inv = np.unique(bits, return_inverse=True)
    out = np.zeros(uniq.size, dtype=complex)
    np.add.at(out, inv, amps)
    return uniq, out


def sparse_state(frame: FrameCircuit, jumps: dict[int, bool] | None = None
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Support and amplitudes of the pre-measurement state (z basis).

    ``jumps`` maps signal ids of incoherent ops to whether they fire.
    """
    bits = np.zeros(1, dtype=np.int64)
    amps = np.ones(1, dtype=complex)
    for op in frame.ops:
        if op.kind == COHERENT:
            if op.amplitude == 0.0:
                continue
            nb, fac = _pauli_on_bits(op.pauli, bits)
            c, s = np.cos(op.amplitude), np.sin(op.amplitude)
            bits, amps = _merge(np.concatenate([bits, nb]),
                                np.concatenate([c * amps, -1j * s * fac * amps]))
        elif jumps and jumps.get(op.signal_id, False):
            bits, fac = _pauli_on_bits(op.pauli, bits)
            amps = amps * fac
    return bits, amps


def _rref(vectors: list[int]) -> tuple[list[int], list[int]]:
    """Reduced row echelon basis over GF(2) and the pivot bit of each row."""
    rows: list[int] = []
    pivots: list[int] = []
    for v in vectors:
        for r, p in zip(rows, pivots):
            if v >> p & 1:
                v ^= r
        if v == 0:
            continue
        p = v.bit_length() - 1
        for i in range(len(rows)):
            if rows[i] >> p & 1:
                rows[i] ^= v
        rows.append(v)
        pivots.append(p)
    return rows, pivots


def _coordinates(e: int, rows: list[int], pivots: list[int]) -> int:
    c = 0
    for j, p in enumerate(pivots):
        if e >> p & 1:
            c |= 1 << j
    return c


def _sample_x_basis(n: int, bits: np.ndarray, amps: np.ndarray, m: int,
                    rng: np.random.Generator) -> np.ndarray:
    z0 = int(bits[0])
    rows, pivots = _rref([int(b) ^ z0 for b in bits])
    d = len(rows)
    g = np.zeros(1 << d, dtype=complex)
    for b, a in zip(bits, amps):
        g[_coordinates(int(b) ^ z0, rows, pivots)] += a
    prob = np.abs(fwht(g)) ** 2 / (1 << d)
    prob /= prob.sum()
    parity_counts = rng.multinomial(m, prob)
    pattern = np.repeat(np.arange(1 << d, dtype=np.int64), parity_counts)
    free = ((1 << n) - 1) & ~sum(1 << p for p in pivots)
    y = rng.integers(0, 1 << n, size=m, dtype=np.int64) & np.int64(free)
    for j, (r, p) in enumerate(zip(rows, pivots)):
        target = (pattern >> j) & 1
        have = np.bitwise_count(y & np.int64(r & ~(1 << p))) & 1
        y |= ((target ^ have).astype(np.int64) << p)
    return y


def sample_frame_shots(frame: FrameCircuit, M: int, gamma_r: float, rng: np.random.Generator,
                       circuit: int = 0) -> BitstringCounts:
    """Draw ``M`` shots of a frame circuit, including jumps and readout flips."""
    n = frame.n
    if n > MAX_COUNT_QUBITS:
        raise SimulationError(f"frame sampling supports n <= {MAX_COUNT_QUBITS}")
    if len(frame.rotations) > MAX_FRAME_ROTATIONS:
        raise SimulationError(
            f"{len(frame.rotations)} nonzero rotations exceed the sparse budget of {MAX_FRAME_ROTATIONS}"
        )
    chans = frame.channels
    gammas = np.array([op.amplitude for op in chans])
    if chans:
        draws = rng.random((M, len(chans))) < gammas
        patterns, mult = np.unique(draws, axis=0, return_counts=True)
    else:
        patterns, mult = np.zeros((1, 0), dtype=bool), np.array([M])
    shots = []
    for pattern, m in zip(patterns, mult):
        jumps = {op.signal_id: bool(b) for op, b in zip(chans, pattern)}
        bits, amps = sparse_state(frame, jumps)
        if frame.basis == "z":
            prob = np.abs(amps) ** 2
            shots.append(np.repeat(bits, rng.multinomial(int(m), prob / prob.sum())))
        else:
            shots.append(_sample_x_basis(n, bits, amps, int(m), rng))
    counts = BitstringCounts.from_shots(n, np.concatenate(shots), circuit)
    return apply_bitflip_noise(counts, gamma_r, rng)


__all__ = [
    "FrameCircuit",
    "FrameOp",
    "MAX_FRAME_ROTATIONS",
    "frame_circuit",
    "frame_dense_circuit",
    "sample_frame_shots",
    "sparse_state",
]
