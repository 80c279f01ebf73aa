"""Signal declarations: coherent angles and incoherent Pauli-channel rates.

A coherent signal ``theta`` on generator ``P`` at step ``t`` applies
``exp(-i theta P)``; an incoherent signal ``gamma`` applies the channel
``rho -> (1 - gamma) rho + gamma P rho P``.  Within a time step all signals act
in ascending ``id`` order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .pauli import PauliString, make_pauli

COHERENT = "coherent"
INCOHERENT = "incoherent"
KINDS = (COHERENT, INCOHERENT)


class SignalError(ValueError):
    """Raised when a signal or signal set violates its invariants."""


@dataclass(frozen=True)
class SignalSpec:
    id: int
    kind: str
    generator: PauliString
    t: int
    amplitude: float

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise SignalError(f"unknown signal kind {self.kind!r}")
        if self.generator.phase != 0:
            raise SignalError("signal generators must be unsigned Pauli strings")
        if self.generator.is_identity:
            raise SignalError(f"signal {self.id}: identity generator carries no signal")
        if self.t < 1:
            raise SignalError(f"signal {self.id}: time steps start at 1, got {self.t}")
        a = float(self.amplitude)
        if self.kind == INCOHERENT and not 0.0 <= a < 1.0:
            raise SignalError(f"signal {self.id}: rate {a} outside [0, 1)")
        if self.kind == COHERENT and not -math.pi / 2 < a < math.pi / 2:
            raise SignalError(f"signal {self.id}: angle {a} outside (-pi/2, pi/2)")

    @property
    def coherent(self) -> bool:
        return self.kind == COHERENT

    def with_amplitude(self, amplitude: float) -> "SignalSpec":
        return SignalSpec(self.id, self.kind, self.generator, self.t, amplitude)


@dataclass(frozen=True)
class SignalSet:
    """Ordered collection of signals on ``n`` qubits over ``T`` steps."""

    n: int
    T: int
    signals: tuple[SignalSpec, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "signals", tuple(self.signals))
        seen_ids: set[int] = set()
        seen_keys: set[tuple] = set()
        for s in self.signals:
            if s.generator.n != self.n:
                raise SignalError(f"signal {s.id} acts on {s.generator.n} qubits, set has {self.n}")
            if s.t > self.T:
                raise SignalError(f"signal {s.id} at step {s.t} beyond T={self.T}")
            if s.id in seen_ids:
                raise SignalError(f"duplicate signal id {s.id}")
            key = (s.kind, s.generator.x, s.generator.z, s.t)
            if key in seen_keys:
                raise SignalError(
                    f"duplicate ({s.kind}, {s.generator.letters()}, t={s.t}) signal"
                )
            seen_ids.add(s.id)
            seen_keys.add(key)

    def __len__(self) -> int:
        return len(self.signals)

    def __iter__(self):
        return iter(self.signals)

    def of_kind(self, kind: str) -> list[SignalSpec]:
        return [s for s in self.signals if s.kind == kind]

    @property
    def coherent(self) -> list[SignalSpec]:
        return self.of_kind(COHERENT)

    @property
    def incoherent(self) -> list[SignalSpec]:
        return self.of_kind(INCOHERENT)

    def at_step(self, t: int) -> list[SignalSpec]:
        """Signals of step ``t`` in application order."""
        return sorted((s for s in self.signals if s.t == t), key=lambda s: s.id)

    def in_time_order(self) -> list[SignalSpec]:
        return sorted(self.signals, key=lambda s: (s.t, s.id))

    @property
    def strength(self) -> float:
        """Total perturbation strength ``sum theta^2 + sum gamma``."""
        return sum(s.amplitude ** 2 for s in self.coherent) + sum(
            s.amplitude for s in self.incoherent
        )

    @property
    def perturbative(self) -> bool:
        return self.strength < 1.0

    def amplitudes(self) -> np.ndarray:
        return np.array([s.amplitude for s in self.signals], dtype=float)

    def with_amplitudes(self, values: Sequence[float]) -> "SignalSet":
        if len(values) != len(self.signals):
            raise SignalError("amplitude vector length differs from signal count")
        return SignalSet(
            self.n, self.T, tuple(s.with_amplitude(float(v)) for s, v in zip(self.signals, values))
        )

    def subset(self, keep: Iterable[int]) -> "SignalSet":
        ids = set(keep)
        return SignalSet(self.n, self.T, tuple(s for s in self.signals if s.id in ids))

    def nonzero(self) -> "SignalSet":
        return SignalSet(self.n, self.T, tuple(s for s in self.signals if s.amplitude != 0))


def signal_fidelity_A(signals: SignalSet | Iterable[SignalSpec]) -> float:
    """Probability that no signal event happens: ``prod cos^2 theta * prod (1 - gamma)``."""
    a = 1.0
    for s in signals:
        a *= math.cos(s.amplitude) ** 2 if s.coherent else 1.0 - s.amplitude
    return a


def build_signal_set(n: int, T: int, rows: Iterable[tuple[str, str | PauliString, int, float]]) -> SignalSet:
    """Convenience constructor from ``(kind, pauli, t, amplitude)`` rows."""
    specs = []
    for i, (kind, pauli, t, amp) in enumerate(rows):
        gen = make_pauli(pauli) if isinstance(pauli, str) else pauli
        specs.append(SignalSpec(i, kind, gen, int(t), float(amp)))
    return SignalSet(n, T, tuple(specs))


# -- generator pools -------------------------------------------------------

def local_pool(n: int) -> list[PauliString]:
    """On-site ``X_i, Y_i, Z_i`` plus open-chain ``X_i X_{i+1}`` and ``Z_i Z_{i+1}``.

    At ``n = 12`` this gives 58 generators per time step, the candidate set
    of the ``fig3`` preset.
    """
    pool = [PauliString.single(n, q, letter) for q in range(n) for letter in "XYZ"]
    pool += [PauliString.from_sites(n, {q: "X", q + 1: "X"}) for q in range(n - 1)]
    pool += [PauliString.from_sites(n, {q: "Z", q + 1: "Z"}) for q in range(n - 1)]
    return pool


def z_string_pool(n: int, bodies: Sequence[int] = (1, 2)) -> list[PauliString]:
    """Single-body ``Z_i`` and open-chain nearest-neighbour ``Z_i Z_{i+1}`` strings."""
    pool = []
    if 1 in bodies:
        pool += [PauliString.z_string(n, 1 << q) for q in range(n)]
    if 2 in bodies:
        pool += [PauliString.z_string(n, 3 << q) for q in range(n - 1)]
    return pool


def random_weight_pool(n: int, size: int, rng: np.random.Generator,
                       max_weight: int = 3, same_letter: bool = False) -> list[PauliString]:
    """``size`` distinct random X/Y/Z strings of weight 1..``max_weight`` on any sites.

    With ``same_letter`` every string repeats one letter (``X_i X_j``,
    ``Z_i Z_j Z_k`` and so on).
    """
    per_site = 1 if same_letter else None
    available = sum(
        math.comb(n, w) * (3 if per_site else 3 ** w) for w in range(1, min(max_weight, n) + 1)
    )
    if size > available:
        raise SignalError(f"pool of {size} exceeds the {available} eligible Pauli strings")
    seen: set[tuple[int, int]] = set()
    pool = []
    while len(pool) < size:
        w = int(rng.integers(1, max_weight + 1))
        sites = rng.choice(n, size=min(w, n), replace=False)
        if same_letter:
            letters = [str(rng.choice(list("XYZ")))] * len(sites)
        else:
            letters = rng.choice(list("XYZ"), size=len(sites))
        p = PauliString.from_sites(n, {int(q): str(l) for q, l in zip(sites, letters)})
        if (p.x, p.z) not in seen:
            seen.add((p.x, p.z))
            pool.append(p)
    return pool


def _nonzero_count(sparsity: float | int, k: int) -> int:
    if isinstance(sparsity, (int, np.integer)) and not isinstance(sparsity, bool):
        if not 0 <= sparsity <= k:
            raise SignalError(f"nonzero count {sparsity} outside 0..{k}")
        return int(sparsity)
    if not 0.0 <= sparsity <= 1.0:
        raise SignalError(f"sparsity fraction {sparsity} outside [0, 1]")
    return int(round(sparsity * k))


def random_sparse_instance(
    generator_pool: Sequence[PauliString],
    T: int,
    sparsity: float | int | dict[str, float | int],
    ranges: dict[str, tuple[float, float]],
    rng: np.random.Generator,
    kinds: Sequence[str] = KINDS,
    random_signs: bool = True,
) -> SignalSet:
    """Candidate set ``pool x {1..T}`` per kind with a random sparse support.

    ``sparsity`` is a fraction of candidates (float) or an exact count of
    nonzero signals (int), optionally given per kind as a dict.  Nonzero
    coherent angles are uniform in ``ranges["theta"]`` with a random sign
    (unless ``random_signs`` is false) and incoherent rates uniform in
    ``ranges["gamma"]``.  All other candidates
    stay in the set with amplitude 0.
    """
    if not generator_pool:
        raise SignalError("generator pool is empty")
    n = generator_pool[0].n
    specs: list[SignalSpec] = []
    next_id = 0
    for kind in kinds:
        cands = [(t, g) for t in range(1, T + 1) for g in generator_pool]
        spars = sparsity[kind] if isinstance(sparsity, dict) else sparsity
        n_nz = _nonzero_count(spars, len(cands))
        chosen = set(rng.choice(len(cands), size=n_nz, replace=False).tolist()) if n_nz else set()
        for i, (t, g) in enumerate(cands):
            amp = 0.0
            if i in chosen:
                if kind == COHERENT:
                    lo, hi = ranges["theta"]
                    amp = float(rng.uniform(lo, hi))
                    if random_signs and rng.random() < 0.5:
                        amp = -amp
                else:
                    lo, hi = ranges["gamma"]
                    amp = float(rng.uniform(lo, hi))
            specs.append(SignalSpec(next_id, kind, g, t, amp))
            next_id += 1
    return SignalSet(n, T, tuple(specs))


FIG3_RANGES = {"theta": (0.1, 0.15), "gamma": (0.07, 0.1)}
