"""Clifford unitaries as signed stabilizer tableaux.

A :class:`CliffordTableau` for a unitary ``C`` stores the Heisenberg images
``C^dag X_k C`` and ``C^dag Z_k C`` of every single-qubit generator, each a
Pauli string with phase 0 or 2 (sign +1 or -1).  With that convention

* ``conjugate(c, p)`` returns ``C^dag P C``;
* ``compose(a, b)`` is the tableau of the product unitary ``a b`` (apply ``b``
  first, then ``a``), so ``conjugate(compose(a, b), p)`` equals
  ``conjugate(b, conjugate(a, p))``.

Prefix products ``U_t = C_t ... C_1`` therefore satisfy
``U_t = compose(C_t, U_{t-1})`` and ``conjugate(U_t, P) = U_t^dag P U_t``,
which is the frame in which every signal of a Clifford protocol acts on the
initial state.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .pauli import PauliError, PauliString, multiply, popcount


class CliffordError(ValueError):
    """Raised for inconsistent tableaux or operands."""


def _sympl(ax: int, az: int, bx: int, bz: int) -> int:
    return (popcount(ax & bz) + popcount(az & bx)) & 1


@dataclass(frozen=True)
class CliffordTableau:
    """Signed images of ``X_k`` and ``Z_k`` under ``P -> C^dag P C``."""

    n: int
    x_images: tuple[PauliString, ...]
    z_images: tuple[PauliString, ...]

    def __post_init__(self) -> None:
        if len(self.x_images) != self.n or len(self.z_images) != self.n:
            raise CliffordError("tableau needs exactly n X-images and n Z-images")
        for img in (*self.x_images, *self.z_images):
            if img.n != self.n:
                raise CliffordError("image qubit count differs from tableau size")
            if img.phase not in (0, 2):
                raise CliffordError(f"image {img} must carry sign +1 or -1")

    @classmethod
    def identity(cls, n: int) -> "CliffordTableau":
        return cls(
            n,
            tuple(PauliString(n, 1 << k, 0) for k in range(n)),
            tuple(PauliString(n, 0, 1 << k) for k in range(n)),
        )

    def is_valid(self) -> bool:
        """Check the symplectic commutation relations of the images."""
        imgs = [*self.x_images, *self.z_images]
        for i in range(2 * self.n):
            for j in range(i + 1, 2 * self.n):
                anti = _sympl(imgs[i].x, imgs[i].z, imgs[j].x, imgs[j].z)
                expected = 1 if j == i + self.n else 0
                if anti != expected:
                    return False
        return True

    # -- serialization --------------------------------------------------
    def to_text(self) -> str:
        """One signed label per line: the n X-images, then the n Z-images."""
        lines = [img.label(signed=True) for img in (*self.x_images, *self.z_images)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CliffordTableau":
        rows = [PauliString.from_label(line) for line in text.split() if line.strip()]
        if len(rows) % 2:
            raise CliffordError("tableau text needs an even number of rows")
        n = len(rows) // 2
        return cls(n, tuple(rows[:n]), tuple(rows[n:]))

    def key(self) -> tuple:
        return tuple((p.x, p.z, p.phase) for p in (*self.x_images, *self.z_images))


# -- core operations ----------------------------------------------------

def _conjugate_raw(c: CliffordTableau, p: PauliString) -> PauliString:
    """``C^dag P C`` for any (possibly non-Hermitian) ``p``, phase included."""
    if p.n != c.n:
        raise CliffordError(f"qubit count mismatch: tableau {c.n}, Pauli {p.n}")
    # Letter form -> i^{|x&z|} X^x Z^z, then substitute each generator image.
    acc = PauliString(c.n, 0, 0, p.phase + popcount(p.x & p.z))
    x, z = p.x, p.z
    k = 0
    while x:
        if x & 1:
            acc = multiply(acc, c.x_images[k])
        x >>= 1
        k += 1
    k = 0
    while z:
        if z & 1:
            acc = multiply(acc, c.z_images[k])
        z >>= 1
        k += 1
    return acc


def conjugate(c: CliffordTableau, p: PauliString) -> tuple[PauliString, int]:
    """Return ``(P', s)`` with ``C^dag P C = s * P'``, ``P'`` unsigned."""
    if not p.is_hermitian:
        raise CliffordError(f"conjugate expects a Hermitian Pauli, got {p}")
    out = _conjugate_raw(c, p)
    return out.unsigned(), 1 if out.phase == 0 else -1


def compose(a: CliffordTableau, b: CliffordTableau) -> CliffordTableau:
    """Tableau of the unitary ``a b`` (``b`` acts first)."""
    if a.n != b.n:
        raise CliffordError(f"qubit count mismatch: {a.n} vs {b.n}")
    return CliffordTableau(
        a.n,
        tuple(_conjugate_raw(b, img) for img in a.x_images),
        tuple(_conjugate_raw(b, img) for img in a.z_images),
    )


def inverse(a: CliffordTableau) -> CliffordTableau:
    """Tableau of ``C^dag``.

    The unsigned images follow from invariance of the symplectic form; the
    signs are then fixed so that each image maps back onto ``+X_k`` / ``+Z_k``.
    """
    n = a.n
    xi, zi = [], []
    for k in range(n):
        bit = 1 << k
        # coefficients of the preimage Q_k of X_k (resp. Z_k) on X_j and Z_j
        qx_x = sum(((a.z_images[j].z >> k) & 1) << j for j in range(n))
        qx_z = sum(((a.x_images[j].z >> k) & 1) << j for j in range(n))
        qz_x = sum(((a.z_images[j].x >> k) & 1) << j for j in range(n))
        qz_z = sum(((a.x_images[j].x >> k) & 1) << j for j in range(n))
        for qx, qz, target, out in ((qx_x, qx_z, (bit, 0), xi), (qz_x, qz_z, (0, bit), zi)):
            q = PauliString(n, qx, qz, 0)
            img = _conjugate_raw(a, q)
            if (img.x, img.z) != target or img.phase % 2:
                raise CliffordError("tableau is not a valid Clifford")
            out.append(PauliString(n, qx, qz, img.phase))
    return CliffordTableau(n, tuple(xi), tuple(zi))


def tableaux_equal(a: CliffordTableau, b: CliffordTableau) -> bool:
    return a.n == b.n and a.key() == b.key()


# -- elementary gates (used by oracles and tests) ------------------------

def _with_images(n: int, updates: dict[tuple[str, int], PauliString]) -> CliffordTableau:
    ident = CliffordTableau.identity(n)
    xs = list(ident.x_images)
    zs = list(ident.z_images)
    for (kind, q), img in updates.items():
        (xs if kind == "x" else zs)[q] = img
    return CliffordTableau(n, tuple(xs), tuple(zs))


def hadamard(n: int, q: int) -> CliffordTableau:
    return _with_images(n, {
        ("x", q): PauliString(n, 0, 1 << q),
        ("z", q): PauliString(n, 1 << q, 0),
    })


def phase_gate(n: int, q: int) -> CliffordTableau:
    """The S gate ``diag(1, i)``: ``S^dag X S = -Y``, ``Z`` fixed."""
    return _with_images(n, {("x", q): PauliString(n, 1 << q, 1 << q, 2)})


def cnot(n: int, control: int, target: int) -> CliffordTableau:
    if control == target:
        raise CliffordError("control and target must differ")
    c, t = 1 << control, 1 << target
    return _with_images(n, {
        ("x", control): PauliString(n, c | t, 0),
        ("z", target): PauliString(n, 0, c | t),
    })


def pauli_gate(p: PauliString) -> CliffordTableau:
    """Tableau of conjugation by the Pauli ``p`` itself (signs only)."""
    n = p.n
    xs, zs = [], []
    for k in range(n):
        flip_x = (p.z >> k) & 1
        flip_z = (p.x >> k) & 1
        xs.append(PauliString(n, 1 << k, 0, 2 * flip_x))
        zs.append(PauliString(n, 0, 1 << k, 2 * flip_z))
    return CliffordTableau(n, tuple(xs), tuple(zs))


# -- uniform sampling ----------------------------------------------------

def _combine(vectors: Sequence[int], bits: np.ndarray) -> int:
    acc = 0
    for v, b in zip(vectors, bits):
        if b:
            acc ^= v
    return acc


def sample_uniform_clifford(n: int, rng: np.random.Generator) -> CliffordTableau:
    """Exactly uniform random ``n``-qubit Clifford (up to global phase).

    The symplectic part is built one conjugate pair at a time: the image of
    ``X_k`` is uniform over nonzero vectors of the current symplectic
    subspace, the image of ``Z_k`` is uniform over vectors of that subspace
    pairing to 1 with it, and the subspace is then replaced by the symplectic
    complement of the chosen pair.  Every symplectic matrix arises from
    exactly one sequence of choices, each made uniformly, so the result is
    uniform.  Signs are independent fair coins.
    """
    if n < 1:
        raise CliffordError(f"n must be >= 1, got {n}")
    mask = (1 << n) - 1
    # symplectic vectors packed as x | (z << n)
    span = [1 << k for k in range(2 * n)]

    def omega(u: int, v: int) -> int:
        return _sympl(u & mask, u >> n, v & mask, v >> n)

    x_imgs, z_imgs = [], []
    for _ in range(n):
        v = 0
        while v == 0:
            v = _combine(span, rng.integers(0, 2, len(span)))
        w = _combine(span, rng.integers(0, 2, len(span)))
        if omega(v, w) == 0:
            # adding a fixed partner is a bijection between the two cosets
            partner = next(u for u in span if omega(v, u))
            w ^= partner
        x_imgs.append(v)
        z_imgs.append(w)
        # project the spanning set onto the complement of span(v, w)
        span = [u ^ (omega(u, w) * v) ^ (omega(u, v) * w) for u in span]
        span = [u for u in span if u]
    signs = rng.integers(0, 2, 2 * n)
    xs = tuple(PauliString(n, v & mask, v >> n, 2 * int(s)) for v, s in zip(x_imgs, signs[:n]))
    zs = tuple(PauliString(n, w & mask, w >> n, 2 * int(s)) for w, s in zip(z_imgs, signs[n:]))
    return CliffordTableau(n, xs, zs)


@lru_cache(maxsize=None)
def two_qubit_clifford_table() -> tuple[tuple[tuple[int, int, int], ...], ...]:
    """All 11520 two-qubit Cliffords as image tuples, in a fixed order.

    Each entry lists ``(x, z, phase)`` for the images of ``X_1, X_2, Z_1, Z_2``.
    The 720 symplectic matrices are found by exhaustive search over 4-bit
    vectors and combined with the 16 sign choices.
    """
    vecs = range(1, 16)

    def om(u: int, v: int) -> int:
        return _sympl(u & 3, u >> 2, v & 3, v >> 2)

    symplectic = []
    for x1, x2, z1, z2 in itertools.product(vecs, repeat=4):
        if (om(x1, z1) and om(x2, z2) and not om(x1, x2) and not om(z1, z2)
                and not om(x1, z2) and not om(x2, z1)):
            symplectic.append((x1, x2, z1, z2))
    table = []
    for imgs in symplectic:
        for signs in range(16):
            table.append(tuple(
                (v & 3, v >> 2, 2 * ((signs >> i) & 1)) for i, v in enumerate(imgs)
            ))
    return tuple(table)


def _embed_two_qubit(n: int, entry: tuple, qa: int, qb: int,
                     xs: list[PauliString], zs: list[PauliString]) -> None:
    def place(bits: int) -> int:
        return ((bits & 1) << qa) | (((bits >> 1) & 1) << qb)

    imgs = [PauliString(n, place(x), place(z), ph) for x, z, ph in entry]
    xs[qa], xs[qb], zs[qa], zs[qb] = imgs


def two_qubit_gate(n: int, index: int, qa: int, qb: int) -> CliffordTableau:
    """Embed entry ``index`` of the two-qubit table on qubits ``(qa, qb)``."""
    table = two_qubit_clifford_table()
    ident = CliffordTableau.identity(n)
    xs, zs = list(ident.x_images), list(ident.z_images)
    _embed_two_qubit(n, table[index], qa, qb, xs, zs)
    return CliffordTableau(n, tuple(xs), tuple(zs))


def brickwork_pairs(n: int, row: int) -> list[tuple[int, int]]:
    """Qubit pairs of brickwork row ``row`` (0-based qubits).

    Even rows pair ``(0,1), (2,3), ...``; odd rows pair ``(1,2), (3,4), ...``
    and close the ring with ``(n-1, 0)`` when ``n`` is even and larger than 2.
    """
    if row % 2 == 0:
        return [(q, q + 1) for q in range(0, n - 1, 2)]
    pairs = [(q, q + 1) for q in range(1, n - 1, 2)]
    if n % 2 == 0 and n > 2:
        pairs.append((n - 1, 0))
    return pairs


def sample_brickwork_row(n: int, row: int, rng: np.random.Generator,
                         record: list | None = None) -> CliffordTableau:
    """One row of independent uniform two-qubit Cliffords."""
    table = two_qubit_clifford_table()
    ident = CliffordTableau.identity(n)
    xs, zs = list(ident.x_images), list(ident.z_images)
    for qa, qb in brickwork_pairs(n, row):
        idx = int(rng.integers(len(table)))
        if record is not None:
            record.append((idx, qa, qb))
        _embed_two_qubit(n, table[idx], qa, qb, xs, zs)
    return CliffordTableau(n, tuple(xs), tuple(zs))


def sample_brickwork_layer(n: int, rng: np.random.Generator, depth: int = 2,
                           record: list | None = None) -> CliffordTableau:
    """``depth`` alternating brickwork rows; row 0 acts first.

    If ``record`` is a list, ``(table index, qa, qb)`` triples are appended in
    application order so the layer can be replayed gate by gate.
    """
    if n < 2:
        raise CliffordError(f"brickwork needs n >= 2, got {n}")
    layer = CliffordTableau.identity(n)
    for row in range(depth):
        layer = compose(sample_brickwork_row(n, row, rng, record), layer)
    return layer


# -- circuit families ----------------------------------------------------

@dataclass
class CircuitFamily:
    """Per-step scrambling layers ``C_1..C_T`` with cached prefix products.

    ``prefixes[t - 1]`` is ``U_t = C_t ... C_1`` and ``terminal`` is
    ``U_T^dag``, the closing inverse layer.
    """

    kind: str
    layers: list[CliffordTableau]
    seed: int | None = None
    prefixes: list[CliffordTableau] = field(init=False)
    terminal: CliffordTableau = field(init=False)

    def __post_init__(self) -> None:
        if self.kind not in ("global-uniform", "brickwork-local"):
            raise CliffordError(f"unknown circuit family kind {self.kind!r}")
        if not self.layers:
            raise CliffordError("a circuit family needs at least one layer")
        prefix = self.layers[0]
        self.prefixes = [prefix]
        for layer in self.layers[1:]:
            prefix = compose(layer, prefix)
            self.prefixes.append(prefix)
        self.terminal = inverse(prefix)

    @property
    def n(self) -> int:
        return self.layers[0].n

    @property
    def T(self) -> int:
        return len(self.layers)

    def frame(self, p: PauliString, t: int) -> tuple[PauliString, int]:
        """``U_t^dag P U_t`` as ``(P', sign)`` for a 1-based time step."""
        return conjugate(self.prefixes[t - 1], p)

    @classmethod
    def sample(cls, kind: str, n: int, T: int, rng: np.random.Generator,
               depth: int = 2, seed: int | None = None) -> "CircuitFamily":
        if kind == "global-uniform":
            layers = [sample_uniform_clifford(n, rng) for _ in range(T)]
        elif kind == "brickwork-local":
            layers = [sample_brickwork_layer(n, rng, depth) for _ in range(T)]
        else:
            raise CliffordError(f"unknown circuit family kind {kind!r}")
        return cls(kind, layers, seed)


__all__ = [
    "CliffordError",
    "CliffordTableau",
    "CircuitFamily",
    "PauliError",
    "brickwork_pairs",
    "cnot",
    "compose",
    "conjugate",
    "hadamard",
    "inverse",
    "pauli_gate",
    "phase_gate",
    "sample_brickwork_layer",
    "sample_brickwork_row",
    "sample_uniform_clifford",
    "tableaux_equal",
    "two_qubit_clifford_table",
    "two_qubit_gate",
]
