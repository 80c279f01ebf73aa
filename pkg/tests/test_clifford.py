import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from scramble_sense.clifford import (
    CircuitFamily,
    CliffordError,
    CliffordTableau,
    brickwork_pairs,
    cnot,
    compose,
    conjugate,
    hadamard,
    inverse,
    phase_gate,
    sample_brickwork_layer,
    sample_uniform_clifford,
    tableaux_equal,
    two_qubit_clifford_table,
    two_qubit_gate,
)
from scramble_sense.dense import pauli_matrix
from scramble_sense.pauli import PauliString, make_pauli, x_support

H1 = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
S1 = np.diag([1, 1j])


def embed_one(u, q, n):
    out = np.eye(1)
    for k in range(n):
        out = np.kron(u if k == q else np.eye(2), out)
    return out


def cnot_matrix(c, t, n):
    dim = 2**n
    m = np.zeros((dim, dim))
    for z in range(dim):
        m[z ^ (((z >> c) & 1) << t), z] = 1
    return m


def random_gate_circuit(n, depth, rng):
    """Tableau and explicit matrix of the same random H/S/CNOT circuit."""
    tab = CliffordTableau.identity(n)
    mat = np.eye(2**n, dtype=complex)
    for _ in range(depth):
        kind = rng.integers(3)
        if kind == 0:
            q = int(rng.integers(n))
            gt, gm = hadamard(n, q), embed_one(H1, q, n)
        elif kind == 1:
            q = int(rng.integers(n))
            gt, gm = phase_gate(n, q), embed_one(S1, q, n)
        else:
            c, t = (int(v) for v in rng.choice(n, 2, replace=False))
            gt, gm = cnot(n, c, t), cnot_matrix(c, t, n)
        # the new gate acts after everything so far
        tab = compose(gt, tab)
        mat = gm @ mat
    return tab, mat


def random_pauli(n, rng):
    while True:
        x, z = (int(v) for v in rng.integers(0, 2**n, 2))
        if x or z:
            return PauliString(n, x, z)


def test_conjugate_matches_dense_matrices(rng):
    n = 6
    for _ in range(5):
        tab, U = random_gate_circuit(n, 40, rng)
        for _ in range(20):
            p = random_pauli(n, rng)
            q, sign = conjugate(tab, p)
            lhs = U.conj().T @ pauli_matrix(p) @ U
            assert np.allclose(lhs, sign * pauli_matrix(q), atol=1e-12)


def test_compose_equals_sequential_conjugation(rng):
    n = 5
    for _ in range(5):
        a, b = sample_uniform_clifford(n, rng), sample_uniform_clifford(n, rng)
        ab = compose(a, b)
        for _ in range(100):
            p = random_pauli(n, rng)
            q1, s1 = conjugate(a, p)
            q2, s2 = conjugate(b, q1)
            q, s = conjugate(ab, p)
            assert (q, s) == (q2, s1 * s2)


@pytest.mark.parametrize("n", [1, 2, 4, 7])
def test_inverse_round_trips(n, rng):
    for _ in range(20):
        c = sample_uniform_clifford(n, rng)
        assert tableaux_equal(inverse(inverse(c)), c)
        assert tableaux_equal(compose(c, inverse(c)), CliffordTableau.identity(n))


def _single_qubit_group():
    """Closure of {H, S} acting on the 1-qubit tableau, by breadth-first search."""
    gens = [hadamard(1, 0), phase_gate(1, 0)]
    seen = {CliffordTableau.identity(1).key(): CliffordTableau.identity(1)}
    frontier = list(seen.values())
    while frontier:
        nxt = []
        for t in frontier:
            for g in gens:
                u = compose(g, t)
                if u.key() not in seen:
                    seen[u.key()] = u
                    nxt.append(u)
        frontier = nxt
    return seen


def test_single_qubit_sampling_is_uniform_over_24(rng):
    group = _single_qubit_group()
    assert len(group) == 24
    draws = 24000
    counts = {k: 0 for k in group}
    for _ in range(draws):
        counts[sample_uniform_clifford(1, rng).key()] += 1
    p = 1 / 24
    sigma = np.sqrt(draws * p * (1 - p))
    assert all(abs(c - draws * p) < 5 * sigma for c in counts.values())


def test_z_image_is_rarely_diagonal(rng):
    n, draws = 10, 10_000
    z1 = PauliString.single(n, 0, "Z")
    hits = sum(x_support(conjugate(sample_uniform_clifford(n, rng), z1)[0]) == 0 for _ in range(draws))
    p = (2**n - 1) / (4**n - 1)
    assert abs(hits - draws * p) < 5 * np.sqrt(draws * p) + 1


def test_image_of_fixed_pauli_is_uniform_chi_square(rng):
    n, draws = 3, 100_000
    p = make_pauli("XIZ")
    cells = np.zeros((4**n, 2))
    for _ in range(draws):
        q, s = conjugate(sample_uniform_clifford(n, rng), p)
        cells[(q.x << n) | q.z, (1 - s) // 2] += 1
    observed = cells[1:].ravel()
    assert cells[0].sum() == 0
    assert stats.chisquare(observed).pvalue > 1e-4


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_sampled_tableaux_are_valid(n, seed):
    rng = np.random.default_rng(seed)
    assert sample_uniform_clifford(n, rng).is_valid()
    if n >= 2:
        assert sample_brickwork_layer(n, rng).is_valid()


def test_two_qubit_table_has_11520_distinct_valid_entries():
    table = two_qubit_clifford_table()
    assert len(table) == 11520
    assert len(set(table)) == 11520
    for idx in range(0, 11520, 97):
        assert two_qubit_gate(2, idx, 0, 1).is_valid()


def test_brickwork_layer_matches_gate_by_gate_replay(rng):
    n = 6
    record = []
    layer = sample_brickwork_layer(n, rng, 2, record)
    replay = CliffordTableau.identity(n)
    for idx, qa, qb in record:
        replay = compose(two_qubit_gate(n, idx, qa, qb), replay)
    assert tableaux_equal(layer, replay)


def test_brickwork_lightcone(rng):
    n = 6
    near = {n - 2, n - 1, 0, 1}
    allowed = sum(1 << q for q in near)
    z1 = PauliString.single(n, 0, "Z")
    for _ in range(200):
        q, _ = conjugate(sample_brickwork_layer(n, rng), z1)
        assert (q.x | q.z) & ~allowed == 0


def test_brickwork_pairs_close_the_ring():
    assert brickwork_pairs(6, 0) == [(0, 1), (2, 3), (4, 5)]
    assert brickwork_pairs(6, 1) == [(1, 2), (3, 4), (5, 0)]
    assert brickwork_pairs(5, 1) == [(1, 2), (3, 4)]


def test_circuit_family_prefixes_and_terminal(rng):
    fam = CircuitFamily.sample("global-uniform", 5, 4, rng)
    prefix = CliffordTableau.identity(5)
    for t, layer in enumerate(fam.layers):
        prefix = compose(layer, prefix)
        assert tableaux_equal(prefix, fam.prefixes[t])
    closing = compose(fam.terminal, fam.prefixes[-1])
    assert tableaux_equal(closing, CliffordTableau.identity(5))


def test_text_round_trip(rng):
    c = sample_uniform_clifford(4, rng)
    assert tableaux_equal(CliffordTableau.from_text(c.to_text()), c)


def test_errors():
    with pytest.raises(CliffordError):
        cnot(3, 1, 1)
    with pytest.raises(CliffordError):
        CircuitFamily("nope", [CliffordTableau.identity(2)])
    with pytest.raises(CliffordError):
        conjugate(CliffordTableau.identity(1), PauliString(1, 1, 1, 1))
