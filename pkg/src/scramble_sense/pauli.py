"""Bit-packed N-qubit Pauli algebra.

A Pauli string is stored as two integer masks plus a quarter-turn phase::

    P = i**phase * sigma_1 (x) sigma_2 (x) ... (x) sigma_n

where ``sigma_k`` is the single-qubit letter on qubit ``k`` (I, X, Y or Z).
Bit ``k - 1`` of ``x`` is set when qubit ``k`` carries X or Y, bit ``k - 1`` of
``z`` is set when it carries Z or Y.  Qubit 1 is the least significant bit and
the leftmost character of a text label.

Masks are plain Python integers, so any ``n`` works and popcounts are a single
``int.bit_count`` call.  Bitstrings (measurement outcomes, supports, codewords)
use the same integer convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_LETTER = {v: k for k, v in _LETTER_BITS.items()}
_PHASE_PREFIX = {0: "+", 1: "+i", 2: "-", 3: "-i"}


class PauliError(ValueError):
    """Raised for malformed labels or incompatible operands."""


def popcount(v: int) -> int:
    return v.bit_count()


@dataclass(frozen=True, slots=True)
class PauliString:
    """An ``n``-qubit Pauli operator ``i**phase * sigma``.

    Instances are immutable and hashable.  Letter-built strings have
    ``phase == 0`` and are Hermitian; in this representation a string is
    Hermitian exactly when ``phase`` is even.
    """

    n: int
    x: int
    z: int
    phase: int = 0

    def __post_init__(self) -> None:
        if self.n < 0:
            raise PauliError(f"qubit count must be nonnegative, got {self.n}")
        limit = 1 << self.n
        if not (0 <= self.x < limit and 0 <= self.z < limit):
            raise PauliError(f"mask has bits at positions >= n={self.n}")
        object.__setattr__(self, "phase", self.phase % 4)

    # -- construction -------------------------------------------------
    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Parse a dense label such as ``"IXYZ"`` or ``"-XZ"``.

        An optional leading sign (``+``, ``-``, ``+i``, ``-i``, ``i``) sets the
        phase.  Qubit 1 is the leftmost letter.
        """
        phase = 0
        body = label.strip()
        for prefix, ph in (("+i", 1), ("-i", 3), ("i", 1), ("+", 0), ("-", 2)):
            if body.startswith(prefix) and (len(body) == len(prefix) or body[len(prefix)] in _LETTER_BITS):
                phase = ph
                body = body[len(prefix):]
                break
        x = z = 0
        for k, ch in enumerate(body):
            try:
                bx, bz = _LETTER_BITS[ch]
            except KeyError:
                raise PauliError(f"unknown Pauli letter {ch!r} in {label!r}") from None
            x |= bx << k
            z |= bz << k
        return cls(len(body), x, z, phase)

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n, 0, 0, 0)

    @classmethod
    def single(cls, n: int, qubit: int, letter: str) -> "PauliString":
        """Single-site Pauli on 0-based ``qubit``."""
        bx, bz = _LETTER_BITS[letter.upper()]
        return cls(n, bx << qubit, bz << qubit, 0)

    @classmethod
    def from_sites(cls, n: int, sites: dict[int, str]) -> "PauliString":
        """Build from a ``{0-based qubit: letter}`` mapping."""
        x = z = 0
        for q, letter in sites.items():
            if not 0 <= q < n:
                raise PauliError(f"site {q} outside 0..{n - 1}")
            try:
                bx, bz = _LETTER_BITS[letter.upper()]
            except KeyError:
                raise PauliError(f"unknown Pauli letter {letter!r}") from None
            x |= bx << q
            z |= bz << q
        return cls(n, x, z, 0)

    @classmethod
    def z_string(cls, n: int, mask: int) -> "PauliString":
        """The commuting Z-type string ``Z_a`` labelled by bitstring ``mask``."""
        return cls(n, 0, mask, 0)

    # -- text ----------------------------------------------------------
    def letters(self) -> str:
        return "".join(
            _BITS_LETTER[((self.x >> k) & 1, (self.z >> k) & 1)] for k in range(self.n)
        )

    def label(self, signed: bool = False) -> str:
        if not signed:
            return self.letters()
        return _PHASE_PREFIX[self.phase] + self.letters()

    def __str__(self) -> str:
        return self.label(signed=self.phase != 0)

    # -- basic queries ------------------------------------------------
    @property
    def weight(self) -> int:
        return popcount(self.x | self.z)

    @property
    def is_hermitian(self) -> bool:
        return self.phase % 2 == 0

    @property
    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    @property
    def is_z_type(self) -> bool:
        return self.x == 0

    def unsigned(self) -> "PauliString":
        """The same letters with phase 0."""
        return PauliString(self.n, self.x, self.z, 0)

    def __mul__(self, other: "PauliString") -> "PauliString":
        return multiply(self, other)


def make_pauli(labels: str | Iterable[str]) -> PauliString:
    """Hermitian phase-0 Pauli from a letter sequence over ``{I, X, Y, Z}``."""
    text = labels if isinstance(labels, str) else "".join(labels)
    p = PauliString.from_label(text)
    if p.phase != 0:
        raise PauliError(f"letter labels must be unsigned, got {text!r}")
    return p


def weight(p: PauliString) -> int:
    return p.weight


def _check_same_n(p: PauliString, q: PauliString) -> None:
    if p.n != q.n:
        raise PauliError(f"qubit count mismatch: {p.n} vs {q.n}")


def commutes(p: PauliString, q: PauliString) -> bool:
    _check_same_n(p, q)
    return (popcount(p.x & q.z) + popcount(p.z & q.x)) % 2 == 0


def multiply(p: PauliString, q: PauliString) -> PauliString:
    """Exact product ``p * q`` including the quarter-turn phase."""
    _check_same_n(p, q)
    x = p.x ^ q.x
    z = p.z ^ q.z
    # Rewrite each letter string as i^|x&z| X^x Z^z, commute Z^z1 past X^x2,
    # then convert the result back to letter form.
    phase = (
        p.phase
        + q.phase
        + popcount(p.x & p.z)
        + popcount(q.x & q.z)
        + 2 * popcount(p.z & q.x)
        - popcount(x & z)
    )
    return PauliString(p.n, x, z, phase % 4)


def apply_to_basis(p: PauliString, z: int) -> tuple[int, int]:
    """Action on a computational basis state: ``P|z> = i**phase |z_out>``.

    Returns ``(phase, z_out)`` with ``phase`` a quarter-turn counter.
    """
    if z >> p.n:
        raise PauliError(f"bitstring has bits at positions >= n={p.n}")
    phase = p.phase + popcount(p.x & p.z) + 2 * popcount(p.z & z)
    return phase % 4, z ^ p.x


def x_support(p: PauliString) -> int:
    """Bitstring of sites carrying X or Y (the bits ``P`` flips)."""
    return p.x


def count_y(p: PauliString) -> int:
    return popcount(p.x & p.z)


def overlap_parity(z: int, a: int) -> int:
    """Parity of the bitwise product ``z . a``."""
    return popcount(z & a) & 1


def format_bits(bits: int, n: int) -> str:
    """Text form of a bitstring with qubit 1 leftmost."""
    return "".join("1" if (bits >> k) & 1 else "0" for k in range(n))


def parse_bits(text: str) -> int:
    """Inverse of :func:`format_bits`."""
    value = 0
    for k, ch in enumerate(text.strip()):
        if ch not in "01":
            raise PauliError(f"bad bit character {ch!r} in {text!r}")
        value |= (ch == "1") << k
    return value


def all_paulis(n: int) -> Iterable[PauliString]:
    """Every unsigned Pauli string on ``n`` qubits (4**n of them)."""
    for x in range(1 << n):
        for z in range(1 << n):
            yield PauliString(n, x, z, 0)
