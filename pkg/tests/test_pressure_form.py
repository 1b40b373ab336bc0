import numpy as np
import pytest

from pressurelab import experiments as E
from pressurelab import groups as G
from pressurelab import lengths as Ln
from pressurelab import pressure_form as PF
from pressurelab import reps as R

SLOPE = PF.Settings(route="slope", n=9)


@pytest.fixture(scope="module")
def fam_s(rho_s):
    return E.zero_family(rho_s)


@pytest.fixture(scope="module")
def ev_slope(fam_s):
    return PF.Evaluator(fam_s, SLOPE)


@pytest.fixture(scope="module")
def direction(rho_s):
    return E.unit_direction(rho_s, np.random.default_rng(99))


def test_stencils():
    f = {k: (0.3 * k) ** 2 + 0.1 * k for k in (-2, -1, 0, 1, 2)}
    assert PF.second_difference(f, 0.3) == pytest.approx(2.0)
    assert PF.first_difference(f, 0.3) == pytest.approx(0.1 / 0.3)
    g = {k: np.sin(0.1 * k) for k in (-2, -1, 0, 1, 2)}
    assert PF.first_difference(g, 0.1) == pytest.approx(1.0, abs=1e-5)


def test_J_value_identity(jt_s10, rho_s):
    tab = Ln._make_table(jt_s10, Ln.omega1(3))
    assert PF.J_value(tab, tab, 0.65, 0.65, tab.certified_T) == 1.0


def test_J_inner_automorphism(rho_s):
    phi = Ln.omega1(3)
    other = rho_s.precompose(G.inner("ab"))
    t0 = Ln.build_length_table(rho_s, phi, 9)
    t1 = Ln.build_length_table(other, phi, 9)
    assert PF.J_value(t0, t1, 1.0, 1.0, t0.certified_T) == pytest.approx(1.0, abs=1e-12)


def test_hessian_zero_direction(fam_s, ev_slope):
    s = PF.hessian_J(fam_s, np.zeros((2, 3, 3)), Ln.omega1(3), evaluator=ev_slope)
    assert s.value == 0.0


def test_hessian_scaling_and_path(fam_s, ev_slope, direction, rho_s):
    phi = Ln.omega1(3)
    p1 = PF.hessian_J(fam_s, direction, phi, evaluator=ev_slope)
    p2 = PF.hessian_J(fam_s, 2 * direction, phi, evaluator=ev_slope, fd_step=0.01)
    assert p1.value > 0
    assert p2.value == pytest.approx(4 * p1.value, rel=0.05)
    W = R.project_out_conjugation(rho_s, R.random_velocity(3, np.random.default_rng(5)))
    curved = PF.hessian_J(fam_s, direction, phi, evaluator=ev_slope, curvature=0.5 * W)
    assert curved.value == pytest.approx(p1.value, rel=0.05)
    assert abs(p1.diagnostics["first_derivative"]) < 1e-6
    js = p1.to_json()
    assert '"value"' in js and '"diagnostics"' in js


def test_hessian_orbital_route(rho_s, direction):
    fam = E.zero_family(rho_s)
    ev = PF.Evaluator(fam, PF.Settings(route="orbital", max_word_length=10))
    smp = PF.hessian_J(fam, direction, Ln.omega1(3), evaluator=ev)
    slope = PF.hessian_J(fam, direction, Ln.omega1(3), settings=SLOPE)
    assert smp.value > 0 and smp.diagnostics["T"] <= ev.horizon(Ln.omega1(3))
    assert smp.value == pytest.approx(slope.value, rel=0.5)


def test_degeneracy_identity_and_generic(fam_s, ev_slope, direction, rho_s):
    classes = E.sample_classes(20, rho_s.spec)
    d0 = PF.degeneracy_check(fam_s, np.zeros((2, 3, 3)), Ln.omega1(3), classes, evaluator=ev_slope)
    assert d0["max_normalized"] < 1e-12
    d1 = PF.degeneracy_check(fam_s, direction, Ln.omega1(3), classes, evaluator=ev_slope)
    assert d1["max_normalized"] > 1e-2


def test_log_type_K(fam_s, ev_slope, rho_s):
    classes = E.sample_classes(20, rho_s.spec)
    wh = Ln.omega_hilbert(3)
    f = PF.exp_length(wh)
    K0 = PF.log_type_K(fam_s, np.zeros((2, 3, 3)), f, classes, evaluator=ev_slope)
    assert np.allclose(K0["K"], 0)
    _, asd = E.split_direction(rho_s, R.random_velocity(3, np.random.default_rng(8)))
    K = PF.log_type_K(fam_s, asd, f, classes, evaluator=ev_slope)
    dh, h = PF.entropy_derivative(fam_s, asd, wh, evaluator=ev_slope)
    assert K["spread"] < 1e-2
    # both sides vanish along anti-self-dual directions at the Fuchsian base
    assert abs(K["mean"] + dh / h) < 1e-8


def test_log_type_K_zero_denominator(fam_s, ev_slope):
    from pressurelab.errors import ZeroDenominator

    with pytest.raises(ZeroDenominator):
        PF.log_type_K(fam_s, np.zeros((2, 3, 3)), lambda rep, w: 1.0, ["a"], evaluator=ev_slope)


def test_gram_generic_positive(fam_s, ev_slope, direction):
    g = PF.gram_matrix(fam_s, [direction], Ln.omega1(3), evaluator=ev_slope)
    assert g.smallest_eigenvalue > 10 * g.noise_floor and g.rank == 1


def test_gram_flags_conjugation_direction(fam_s, ev_slope, direction, rho_s):
    C = R.conjugation_directions(rho_s)[0]
    C = C / np.linalg.norm(C)
    g = PF.gram_matrix(fam_s, [direction, C], Ln.omega1(3), evaluator=ev_slope, project=False)
    assert abs(g.smallest_eigenvalue) < 1e-6 * g.eigenvalues[-1] + 10 * g.noise_floor
    assert g.rank == 1
    np.testing.assert_allclose(g.matrix, np.array(g.matrix).T)


def test_settings_validation():
    with pytest.raises(ValueError):
        PF.Settings(route="bogus")
    with pytest.raises(ValueError):
        PF.Settings(entropy="bogus")


def test_unsupported_on_torus(rho_t):
    from pressurelab.errors import UnsupportedGroup

    with pytest.raises(UnsupportedGroup):
        PF.Evaluator(E.zero_family(rho_t), SLOPE)
