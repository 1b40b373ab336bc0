import math

import numpy as np
import pytest
from scipy.linalg import expm

from pressurelab import groups as G
from pressurelab import lengths as Ln
from pressurelab import reps as R
from pressurelab.errors import GaugeNotFound, OutsideValidity


def test_irreducible_lift_examples():
    np.testing.assert_allclose(R.irreducible_lift(np.diag([2, 0.5]), 3), np.diag([4, 1, 0.25]), atol=1e-15)
    U = R.irreducible_lift(np.array([[1.0, 1], [0, 1]]), 3)
    assert np.trace(U) == pytest.approx(3)
    N = U - np.eye(3)
    assert np.abs(N @ N @ N).max() < 1e-14 and np.abs(N).max() > 0.5


def test_irreducible_lift_functorial(rng):
    for d in (2, 3, 4, 5):
        g = np.array([[1.3, 0.4], [0.2, 1.0]])
        g /= math.sqrt(np.linalg.det(g))
        h = np.array([[0.7, -0.3], [0.5, 1.2]])
        h /= math.sqrt(np.linalg.det(h))
        np.testing.assert_allclose(R.irreducible_lift(g @ h, d), R.irreducible_lift(g, d) @ R.irreducible_lift(h, d),
                                   atol=1e-12)
        np.testing.assert_allclose(R.irreducible_lift(np.linalg.inv(g), d), np.linalg.inv(R.irreducible_lift(g, d)),
                                   atol=1e-12)
        mu = max(abs(np.linalg.eigvals(g)))
        ev = np.sort(np.abs(np.linalg.eigvals(R.irreducible_lift(g, d))))[::-1]
        np.testing.assert_allclose(ev, mu ** np.arange(d - 1, -d, -2), rtol=1e-10)


def test_homomorphism(rho_s, rng):
    for _ in range(20):
        w = G.reduce_word("".join(rng.choice(list("aAbB"), 7)))
        M = np.eye(3)
        for c in w:
            M = M @ rho_s.matrix(c)
        np.testing.assert_allclose(rho_s.matrix(w), M, atol=1e-9 * np.abs(M).max())
    assert rho_s.determinant_error() < 1e-10


def test_contragredient(rho_s, rng):
    D = R.Representation((np.diag([2, 1, 0.5]), np.diag([3, 1, 1 / 3])), rho_s.spec)
    C = R.contragredient(D)
    np.testing.assert_allclose(C.gens[0], np.diag([0.5, 1, 2]))
    assert R.contragredient(C) is D
    eta = R.family_eval(R.RepFamily(R.GENERATOR_PERTURBATION, rho_s, R.random_velocity(3, rng, 0.05)), [1.0])
    jt, jc = Ln.jordan_table(eta, 6), Ln.jordan_table(R.contragredient(eta), 6)
    wh = Ln.omega_hilbert(3)
    np.testing.assert_allclose(wh(jc.nu), wh(jt.nu), atol=1e-10)
    np.testing.assert_allclose(jc.nu, -jt.nu[:, ::-1], atol=1e-9)


def test_family_eval_zero_is_base(rho_s, rng):
    fam = R.RepFamily(R.GENERATOR_PERTURBATION, rho_s, R.random_velocity(3, rng))
    assert fam([0.0]) is rho_s


def test_small_deformation_is_hitchin(rho_s, rng):
    V = R.random_velocity(3, rng)
    V /= np.linalg.norm(V)
    fam = R.RepFamily(R.GENERATOR_PERTURBATION, rho_s, V)
    for t in (-0.05, 0.05):
        assert R.hitchin_validate(fam([t]), depth=5)


def test_contragredient_symmetrized_even(rho_s, rng):
    V = R.random_velocity(3, rng)
    V /= np.linalg.norm(V)
    fam = R.RepFamily(R.CONTRAGREDIENT_SYMMETRIZED, rho_s, V)
    wh = Ln.omega_hilbert(3)
    Q = fam.Q
    for t in (0.02, 0.05):
        plus, minus = fam([t]), fam([-t])
        # eval(-t) = Q^-1 C(eval(t)) Q on generators
        Qi = np.linalg.inv(Q)
        for gp, gm in zip(R.contragredient(plus).gens, minus.gens):
            np.testing.assert_allclose(Qi @ gp @ Q, gm, atol=1e-12)
        lp, lm = wh(Ln.jordan_table(plus, 7).nu), wh(Ln.jordan_table(minus, 7).nu)
        np.testing.assert_allclose(lp, lm, atol=1e-10)


def test_invariant_form(rho_s, rho_t, rng):
    expected = np.array([[0, 0, 1], [0, -1, 0], [1, 0, 0]]) / math.sqrt(3)
    for rho in (rho_s, rho_t):
        Q = R.invariant_form(rho)
        np.testing.assert_allclose(Q, expected, atol=1e-12)
        for g in rho.gens:
            np.testing.assert_allclose(g.T @ Q @ g, Q, atol=1e-10)
    V = R.random_velocity(3, rng)
    with pytest.raises(GaugeNotFound):
        R.invariant_form(R.family_eval(R.RepFamily(R.GENERATOR_PERTURBATION, rho_s, V), [0.05]))


def test_contragredient_differential(rho_s, rng):
    fam = R.RepFamily(R.GENERATOR_PERTURBATION, rho_s, np.zeros((2, 3, 3)))
    Q = R.invariant_form(rho_s)
    # tangent to the Fuchsian locus: self-dual
    X = np.array([[0.3, 0.7], [-0.2, -0.3]])
    V = np.array([R.sl2_to_lift_velocity(X, g, 3) for g in rho_s.spec.base_generators])
    sd, asd = R.contragredient_differential(fam, V, Q, method="fd")
    assert np.abs(asd).max() < 1e-8
    V = R.random_velocity(3, rng)
    sd, asd = R.contragredient_differential(fam, V, Q)
    sd2, asd2 = R.contragredient_differential(fam, asd, Q)
    np.testing.assert_allclose(asd2, asd, atol=1e-8)
    np.testing.assert_allclose(sd2, 0, atol=1e-8)
    np.testing.assert_allclose(sd + asd, V, atol=1e-14)
    DC = R.dual_velocity_fd(rho_s, V, Q)
    DCDC = R.dual_velocity_fd(rho_s, DC, Q)
    np.testing.assert_allclose(DCDC, V, atol=1e-6)
    np.testing.assert_allclose(DC, R.dual_velocity(V, Q), atol=1e-6)


def test_cusp_project_fixed_point(rho_t):
    out = R.cusp_project(rho_t)
    for g0, g1 in zip(rho_t.gens, out.gens):
        np.testing.assert_allclose(g0, g1, atol=1e-12)
    C = rho_t.peripheral_matrix()
    assert np.trace(C) == pytest.approx(3, abs=1e-12)
    assert np.trace(np.linalg.inv(C)) == pytest.approx(3, abs=1e-12)


def test_cusp_gradients_match_fd(rho_t, rng):
    A, B = (expm_small(g, rng) for g in rho_t.gens)
    Jm = R.cusp_gradients(A, B)
    h = 1e-6
    for _ in range(3):
        X, Y = (R._traceless(rng.standard_normal((3, 3))) for _ in range(2))
        f = lambda s: R._cusp_residual(expm(s * X) @ A, expm(s * Y) @ B)[0]
        fd = (f(h) - f(-h)) / (2 * h)
        np.testing.assert_allclose(Jm @ np.concatenate([X.ravel(), Y.ravel()]), fd, rtol=1e-5, atol=1e-7)


def expm_small(g, rng):
    return expm(0.03 * R._traceless(rng.standard_normal((3, 3)))) @ g


def test_cusp_project_random_perturbation(rho_t, rng):
    V = R.random_velocity(3, rng)
    V /= np.linalg.norm(V)
    guess = R.family_eval(R.RepFamily(R.GENERATOR_PERTURBATION, rho_t, V), [0.03])
    out = R.cusp_project(guess)
    C = out.peripheral_matrix()
    res = max(abs(np.trace(C) - 3), abs(np.trace(np.linalg.inv(C)) - 3))
    assert res < 1e-12 and out.type_preserving
    assert np.abs(C - np.eye(3)).max() > 1e-3  # not the identity
    # a residual r near a 3x3 Jordan block moves eigenvalues by about r^(1/3);
    # after double-precision Newton the moduli sit within ~1e-4 of 1
    mods = np.abs(np.linalg.eigvals(C))
    assert np.abs(mods - 1).max() < 5e-4


def test_cusp_family_type_preserving(rho_t, rng):
    V = R.random_velocity(3, rng)
    V /= np.linalg.norm(V)
    fam = R.RepFamily(R.CUSP_CONSTRAINED, rho_t, V)
    for t in np.linspace(-0.05, 0.05, 5):
        C = fam([t]).peripheral_matrix()
        assert abs(np.trace(C) - 3) < 1e-10


def test_hitchin_validate(rho_s, rho_t):
    for rho in (rho_s, rho_t):
        rep = R.hitchin_validate(rho, depth=5)
        assert rep.ok and rep.worst_margin > 0.01 and rep.classes_checked > 0
    th = 2 * math.pi / 7
    rot = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    broken = R.Representation((rho_s.gens[0], R.irreducible_lift(rot, 3)), rho_s.spec)
    assert not R.hitchin_validate(broken, depth=4).loxodromy_ok
    fam = R.RepFamily(R.GENERATOR_PERTURBATION, rho_s, np.zeros((2, 3, 3)))
    assert R.hitchin_validate(fam([0.0])) == R.hitchin_validate(rho_s)


def test_validity_radius(rho_s, rng):
    V = R.random_velocity(3, rng)
    V /= np.linalg.norm(V)
    fam = R.RepFamily(R.GENERATOR_PERTURBATION, rho_s, V)
    r = R.validity_radius(fam, depth=4, r_max=0.5, resolution=1e-2)
    assert 0.05 <= r <= 0.5
    bounded = R.RepFamily(R.GENERATOR_PERTURBATION, rho_s, V, radius=r)
    with pytest.raises(OutsideValidity):
        bounded([r + 0.1])


def test_conjugation_projection(rho_s, rng):
    C = R.conjugation_directions(rho_s)
    V = R.project_out_conjugation(rho_s, R.random_velocity(3, rng))
    for D in C:
        assert abs(np.sum(D * V)) < 1e-10
    np.testing.assert_allclose(R.project_out_conjugation(rho_s, C[0]), 0, atol=1e-10)
    assert R.frobenius_angle(V, -V) == pytest.approx(0, abs=1e-6)
