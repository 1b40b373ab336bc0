import math
import warnings

import numpy as np
import pytest

from pressurelab import groups as G
from pressurelab import lengths as Ln
from pressurelab import reps as R
from pressurelab.errors import EmptyWindow, HorizonExceeded, NotLoxodromic

L4 = math.log(4)
X = np.array([L4, 0.0, -L4])


def test_phi_examples(rng):
    assert Ln.phi_of(Ln.omega_hilbert(3), X) == pytest.approx(2 * L4)
    assert Ln.phi_of(Ln.alpha1(3), X) == pytest.approx(L4)
    w1 = Ln.omega1(3)
    assert w1.coeffs == pytest.approx((2 / 3, 1 / 3))
    for _ in range(10):
        x = rng.standard_normal(3)
        x -= x.mean()
        assert w1(x) == pytest.approx(x[0])


def test_phi_cone():
    with pytest.raises(ValueError):
        Ln.WeightFunctional((1.0, -0.5))
    with pytest.raises(ValueError):
        Ln.WeightFunctional((0.0, 0.0))


def test_torus_table_entries(jt_t10):
    tab = Ln._make_table(jt_t10, Ln.omega1(3))
    i = list(jt_t10.words()).index("a")
    assert tab.ell[i] == pytest.approx(2 * math.log((3 + math.sqrt(5)) / 2), rel=1e-12)
    tabH = Ln._make_table(jt_t10, Ln.omega_hilbert(3))
    ok = ~tab.peripheral
    np.testing.assert_allclose(tabH.ell[ok], 2 * tab.ell[ok], rtol=1e-12)
    j = list(jt_t10.words()).index(G.conj_class("abAB").rep)
    assert tab.peripheral[j] and tab.ell[j] == 0


def test_schottky_generator_length(jt_s10):
    tab = Ln._make_table(jt_s10, Ln.omega1(3))
    assert tab.ell[list(jt_s10.words()).index("a")] == pytest.approx(math.log(9), rel=1e-12)


def test_power_additivity(rho_s):
    phi = Ln.alpha1(3)
    from pressurelab.linalg import jordan_projection

    base = phi(jordan_projection(rho_s.matrix("ab")))
    for n in (2, 3, 5):
        assert phi(jordan_projection(rho_s.matrix("ab" * n))) == pytest.approx(n * base, abs=n * 1e-9)


def test_not_loxodromic_reported(rho_s):
    th = 2 * math.pi / 5
    rot = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    broken = R.Representation((rho_s.gens[0], R.irreducible_lift(rot, 3)), rho_s.spec)
    with pytest.raises(NotLoxodromic, match="class"):
        Ln.jordan_table(broken, 3)


def test_count_rt(jt_s10):
    tab = Ln._make_table(jt_s10, Ln.omega1(3))
    assert Ln.count_RT(tab, 0.5 * tab.systole) == 0
    Ts = np.linspace(0, tab.certified_T, 30)
    counts = [Ln.count_RT(tab, T) for T in Ts]
    assert all(b >= a for a, b in zip(counts, counts[1:]))
    T = tab.certified_T
    assert Ln.count_RT(tab, T) == sum(1 for e, p in zip(tab.ell, tab.peripheral) if not p and e <= T)
    with pytest.raises(HorizonExceeded):
        Ln.count_RT(tab, T * 1.01)


def test_certification_complete(rho_s):
    # every class of length <= certified_T at L = 8 also shows up at L = 11
    t8 = Ln.build_length_table(rho_s, Ln.omega1(3), 8)
    t11 = Ln.build_length_table(rho_s, Ln.omega1(3), 11)
    T = t8.certified_T
    assert Ln.count_RT(t8, T) == int(np.sum(t11.hyperbolic_lengths() <= T))


def test_entropy_relations(jt_t10):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ta = Ln._make_table(jt_t10, Ln.alpha1(3))
        tH = Ln._make_table(jt_t10, Ln.omega_hilbert(3))
        t2 = Ln._make_table(jt_t10, Ln.alpha1(3).scaled(2))
    ha, hH, h2 = (Ln.entropy_counting(t).h for t in (ta, tH, t2))
    assert hH == pytest.approx(0.5 * ha, rel=1e-9)
    assert h2 == pytest.approx(0.5 * ha, rel=1e-9)


def test_refined_ratio(jt_s10):
    tab = Ln._make_table(jt_s10, Ln.omega1(3))
    T = tab.certified_T
    assert Ln.refined_ratio(tab, 0.0, T) == 0
    h = 0.65
    assert Ln.refined_ratio(tab, 2 * h, T) < 0.05 * Ln.refined_ratio(tab, h, T)
    with pytest.raises(HorizonExceeded):
        Ln.refined_ratio(tab, h, 2 * T)


def test_intersection_orbital(jt_s10, rho_s, rng):
    tab = Ln._make_table(jt_s10, Ln.omega1(3))
    for T in np.linspace(2 * tab.systole, tab.certified_T, 5):
        assert Ln.intersection_orbital(tab, tab, T) == 1.0
    with pytest.raises(EmptyWindow):
        Ln.intersection_orbital(tab, tab, 0.5 * tab.systole)


def test_csv(jt_s10):
    tab = Ln._make_table(jt_s10, Ln.omega1(3))
    lines = tab.to_csv().splitlines()
    assert lines[0] == "class_word,word_length,peripheral,ell_phi"
    assert lines[1].startswith("a,1,0,")
    assert len(lines) == len(tab.ell) + 1


def test_functional_positivity(rho_s, rho_t):
    for rho in (rho_s, rho_t):
        rep = Ln.functional_positivity_check(rho, Ln.alpha1(3), 8)
        assert rep.ok
    r8 = Ln.functional_positivity_check(rho_s, Ln.alpha1(3), 8).margin
    r12 = Ln.functional_positivity_check(rho_s, Ln.alpha1(3), 12).margin
    assert abs(r12 - r8) <= 0.2 * r8


def test_contragredient_omega1(rho_s, rng):
    eta = R.family_eval(R.RepFamily(R.GENERATOR_PERTURBATION, rho_s, R.random_velocity(3, rng, 0.05)), [1.0])
    jt, jc = Ln.jordan_table(eta, 5), Ln.jordan_table(R.contragredient(eta), 5)
    np.testing.assert_allclose(Ln.omega1(3)(jc.nu), -jt.nu[:, -1], atol=1e-9)


def test_nielsen_count_invariance(rho_t):
    rho2 = rho_t.precompose(G.NIELSEN)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        t1 = Ln.build_length_table(rho_t, Ln.alpha1(3), 10)
        t2 = Ln.build_length_table(rho2, Ln.alpha1(3), 14)
    # classes of length <= T are the same multiset of lengths; rho o psi needs
    # longer words to reach them, hence the larger word-length cap
    T = min(t1.certified_T, t2.certified_T)
    a = np.sort(t1.hyperbolic_lengths()[t1.hyperbolic_lengths() <= T])
    b = np.sort(t2.hyperbolic_lengths()[t2.hyperbolic_lengths() <= T])
    assert len(a) == len(b)
    np.testing.assert_allclose(a, b, rtol=1e-10)
