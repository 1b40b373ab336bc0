import warnings

import numpy as np
import pytest

from pressurelab import groups as G
from pressurelab import lengths as Ln
from pressurelab import reps as R


@pytest.fixture(scope="session")
def schottky():
    return G.schottky_spec()


@pytest.fixture(scope="session")
def torus():
    return G.punctured_torus_spec()


@pytest.fixture(scope="session")
def rho_s(schottky):
    return R.fuchsian_rep(schottky, 3)


@pytest.fixture(scope="session")
def rho_t(torus):
    return R.fuchsian_rep(torus, 3)


@pytest.fixture(scope="session")
def jt_s10(rho_s):
    return Ln.jordan_table(rho_s, 10)


@pytest.fixture(scope="session")
def jt_t10(rho_t):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return Ln.jordan_table(rho_t, 10)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_sl(d, rng, scale=0.5):
    M = np.eye(d) + scale * rng.standard_normal((d, d))
    det = np.linalg.det(M)
    if det < 0:
        M[:, 0] *= -1
        det = -det
    return M / det ** (1 / d)


def random_loxodromic(d, rng):
    while True:
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        ev = np.sort(rng.uniform(0.3, 3.0, d))[::-1]
        if np.min(np.diff(np.log(ev[::-1]))) < 0.05:
            continue
        ev = ev / np.prod(ev) ** (1 / d)
        P = np.eye(d) + 0.5 * rng.standard_normal((d, d))
        if abs(np.linalg.det(P)) < 0.1:
            continue
        return P @ np.diag(ev) @ np.linalg.inv(P)


@pytest.fixture(scope="session")
def jt_s17(rho_s):
    """Schottky Fuchsian Jordan table at word length 17 (about 2 min, 1 GB)."""
    return Ln.jordan_table(rho_s, 17)


@pytest.fixture(scope="session")
def shift_s(schottky):
    from pressurelab import shift as S

    return S.build_shift(schottky)


@pytest.fixture(scope="session")
def h_root_s12(shift_s, rho_s):
    from pressurelab import shift as S

    return S.entropy_root(shift_s, rho_s, Ln.omega1(3), 12)


# one PASS/FAIL line per acceptance criterion, printed at the end of the run
_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance():
    def record(k: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
        _ACCEPTANCE[k] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
