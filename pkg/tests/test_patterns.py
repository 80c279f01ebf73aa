import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scramble_sense.clifford import CircuitFamily, CliffordTableau, hadamard, sample_uniform_clifford
from scramble_sense.dense import (
    HamiltonianDynamics,
    RUCFamily,
    build_protocol_circuit,
    exact_distribution,
    kim_huse_hamiltonian,
)
from scramble_sense.patterns import (
    PatternError,
    PointMass,
    SignedUniform,
    clifford_coherent_pattern,
    clifford_incoherent_pattern,
    clifford_patterns,
    dense_patterns,
    quad_pattern,
    tilted_pattern,
)
from scramble_sense.pauli import PauliString, make_pauli
from scramble_sense.signals import COHERENT, INCOHERENT, build_signal_set


def random_pauli(n, rng):
    while True:
        p = PauliString(n, int(rng.integers(1 << n)), int(rng.integers(1 << n)))
        if not p.is_identity:
            return p


def fd_derivative(protocol, signals, sid, randomness=None, phi=None, h=1e-5):
    """Central difference of the exact distribution in one amplitude."""

    def prob(theta):
        amps = [theta if s.id == sid else s.amplitude for s in signals]
        return exact_distribution(build_protocol_circuit(protocol, signals.with_amplitudes(amps), randomness, phi))

    return (prob(h) - prob(-h)) / (2 * h)


# -- Ramsey -----------------------------------------------------------------------


def test_quad_pattern_is_point_mass_at_label():
    pat = quad_pattern(make_pauli("IZI"))
    assert pat == PointMass(3, 0b010)
    assert pat.dense().sum() == 1.0


def test_quad_pattern_rejects_identity_and_non_z():
    with pytest.raises(PatternError):
        quad_pattern(make_pauli("III"))
    with pytest.raises(PatternError):
        quad_pattern(make_pauli("XZI"))


@pytest.mark.parametrize("label", ["ZIII", "IZZI", "ZIIZ"])
def test_quad_second_derivative_peaks_at_label(label):
    sig = build_signal_set(4, 1, [(COHERENT, label, 1, 0.0)])
    h = 1e-3

    def prob(theta):
        return exact_distribution(build_protocol_circuit("quad-ramsey", sig.with_amplitudes([theta])))

    second = (prob(h) - 2 * prob(0.0) + prob(-h)) / h**2
    assert int(np.argmax(second)) == quad_pattern(make_pauli(label)).z
    assert second[quad_pattern(make_pauli(label)).z] == pytest.approx(2.0, rel=1e-5)


def test_tilted_single_qubit_values():
    phi = 0.6
    pat = tilted_pattern(make_pauli("Z"), phi)
    np.testing.assert_allclose(pat.dense(), [math.sin(phi), -math.sin(phi)], atol=1e-15)


def test_tilted_insensitive_direction_warns():
    with pytest.warns(RuntimeWarning):
        pat = tilted_pattern(make_pauli("ZZ"), math.pi / 2)
    assert pat.sigma == 0 and not pat.visible


@pytest.mark.parametrize("label", ["ZIII", "IZZI", "ZZZI", "ZZZZ"])
def test_tilted_matches_finite_difference(label):
    phi = 0.45
    sig = build_signal_set(4, 1, [(COHERENT, label, 1, 0.0)])
    pat = tilted_pattern(make_pauli(label), phi)
    np.testing.assert_allclose(pat.dense(), fd_derivative("tilted-ramsey", sig, 0, phi=phi), atol=1e-8)


def test_tilted_pair_orthogonality_brute_force():
    n, phi = 6, 0.4
    pats = [tilted_pattern(PauliString.z_string(n, a), phi).dense() for a in range(1, 1 << n)]
    gram = np.array(pats) @ np.array(pats).T
    off = gram - np.diag(np.diag(gram))
    assert np.abs(off).max() < 1e-15


# -- Clifford closed forms ---------------------------------------------------------


def test_incoherent_identity_prefix():
    assert clifford_incoherent_pattern(CliffordTableau.identity(4), make_pauli("XIII")).z == 0b0001


def test_incoherent_hadamard_prefix():
    assert clifford_incoherent_pattern(hadamard(4, 0), make_pauli("ZIII")).z == 0b0001


def test_coherent_formula_direct_cases():
    ident = CliffordTableau.identity(1)
    y = clifford_coherent_pattern(ident, make_pauli("Y"))
    assert (y.mask, y.sigma, y.magnitude) == (1, 1, 1.0)
    x = clifford_coherent_pattern(ident, make_pauli("X"))
    assert x.sigma == 0 and x.magnitude == 0.0


def test_incoherent_matches_dense_k(rng):
    n = 8
    for _ in range(100):
        fam = CircuitFamily.sample("global-uniform", n, 1, rng)
        p = random_pauli(n, rng)
        sig = build_signal_set(n, 1, [(INCOHERENT, p, 1, 0.0)])
        k = dense_patterns("clifford-z", sig, fam).patterns[0]
        assert int(np.argmax(k)) == clifford_incoherent_pattern(fam.prefixes[0], p).z


def test_coherent_matches_finite_difference(rng):
    n = 6
    for _ in range(100):
        T = int(rng.integers(1, 3))
        fam = CircuitFamily.sample("global-uniform", n, T, rng)
        p = random_pauli(n, rng)
        t = int(rng.integers(1, T + 1))
        sig = build_signal_set(n, T, [(COHERENT, p, t, 0.0)])
        pat = clifford_coherent_pattern(fam.prefixes[t - 1], p)
        np.testing.assert_allclose(pat.dense(), fd_derivative("clifford-x", sig, 0, fam), atol=1e-8)


def test_coherent_visibility_is_half():
    rng = np.random.default_rng(12)
    draws = 2000
    p = make_pauli("XZIIYIIIZI")
    invisible = sum(clifford_coherent_pattern(sample_uniform_clifford(10, rng), p).sigma == 0
                    for _ in range(draws))
    assert abs(invisible / draws - 0.5) < 5 * math.sqrt(0.25 / draws)


def test_clifford_patterns_follow_kinds(rng):
    fam = CircuitFamily.sample("global-uniform", 4, 2, rng)
    sig = build_signal_set(4, 2, [(COHERENT, "XIII", 1, 0.1), (INCOHERENT, "IZIY", 2, 0.05)])
    pats = clifford_patterns(fam, sig)
    assert isinstance(pats[0], SignedUniform) and isinstance(pats[1], PointMass)


# -- invariants ----------------------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10), st.data())
def test_signed_uniform_sign_balance(n, data):
    mask = data.draw(st.integers(1, (1 << n) - 1))
    sigma = data.draw(st.sampled_from([-1, 1]))
    pat = SignedUniform(n, mask, sigma, 1.0 / 2 ** (n - 1))
    vals = pat.dense()
    assert abs(vals.sum()) < 1e-12
    assert np.count_nonzero(vals < 0) == 2 ** (n - 1)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 10), st.data())
def test_point_mass_sums_to_one(n, data):
    z = data.draw(st.integers(0, (1 << n) - 1))
    assert PointMass(n, z).dense().sum() == 1.0


def test_signed_uniform_validation():
    with pytest.raises(PatternError):
        SignedUniform(2, 1, 2, 0.5)
    with pytest.raises(PatternError):
        SignedUniform(2, 1, 1, -0.5)


# -- dense patterns -------------------------------------------------------------------


def test_dense_k_equals_closed_form(rng):
    n = 5
    fam = CircuitFamily.sample("global-uniform", n, 2, rng)
    rows = [(INCOHERENT, "XYIIZ", 1, 0.0), (INCOHERENT, "IIZXI", 2, 0.0), (COHERENT, "YIIII", 1, 0.0)]
    sig = build_signal_set(n, 2, rows)
    dp = dense_patterns("clifford-z", sig, fam)
    for s in sig.incoherent:
        closed = clifford_incoherent_pattern(fam.prefixes[s.t - 1], s).dense()
        np.testing.assert_allclose(dp.pattern(s.id), closed, atol=1e-12)
    # coherent responses vanish at first order in the z basis
    coh = sig.coherent[0].id
    np.testing.assert_allclose(dp.pattern(coh), 0.0, atol=1e-9)


def test_dense_coherent_equals_closed_form_x_basis(rng):
    n = 5
    fam = CircuitFamily.sample("global-uniform", n, 2, rng)
    rows = [(COHERENT, "XYIIZ", 1, 0.0), (COHERENT, "IIZXI", 2, 0.0), (COHERENT, "IYIII", 2, 0.0)]
    sig = build_signal_set(n, 2, rows)
    dp = dense_patterns("clifford-x", sig, fam)
    for s in sig:
        closed = clifford_coherent_pattern(fam.prefixes[s.t - 1], s).dense()
        np.testing.assert_allclose(dp.pattern(s.id), closed, atol=1e-9)


def test_dense_ruc_patterns_conserve_probability(rng):
    n = 5
    rows = [(COHERENT, "XIIII", 1, 0.0), (INCOHERENT, "IZZII", 2, 0.0), (COHERENT, "IIIYX", 2, 0.0)]
    sig = build_signal_set(n, 2, rows)
    dp = dense_patterns("ruc", sig, RUCFamily.sample(n, 2, rng))
    assert dp.p0.sum() == pytest.approx(1.0, abs=1e-10)
    for s in sig:
        total = dp.pattern(s.id).sum()
        assert total == pytest.approx(0.0 if s.kind == COHERENT else 1.0, abs=1e-10)


def test_dense_hamiltonian_dp_sums_to_zero():
    n = 8
    sig = build_signal_set(n, 1, [(COHERENT, "ZIIIIIII", 1, 0.0), (INCOHERENT, "IIIXIIII", 1, 0.0)])
    dyn = HamiltonianDynamics(kim_huse_hamiltonian(n), 5.0, 1)
    dp = dense_patterns("hamiltonian", sig, dyn)
    assert abs(dp.pattern(0).sum()) < 1e-9
    assert dp.pattern(1).sum() == pytest.approx(1.0, abs=1e-10)
    assert np.abs(dp.pattern(0)).max() > 1e-4


def test_dense_tilted_matches_closed_form():
    phi = 0.3
    rows = [(COHERENT, "ZIII", 1, 0.0), (COHERENT, "IZZI", 1, 0.0)]
    sig = build_signal_set(4, 1, rows)
    dp = dense_patterns("tilted-ramsey", sig, phi=phi)
    for s in sig:
        np.testing.assert_allclose(dp.pattern(s.id), tilted_pattern(s, phi).dense(), atol=1e-9)
