"""Renormalized intersection J, the pressure form as the Hessian of J along
families, the degeneracy test, log-type-K estimates and Gram matrices."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import groups as G
from .errors import (
    HorizonExceeded,
    NoiseDominates,
    StencilValidationFailed,
    UnsupportedGroup,
    ZeroDenominator,
)
from .lengths import (
    JordanTable,
    LengthTable,
    WeightFunctional,
    _make_table,
    entropy_counting,
    entropy_grid,
    intersection_orbital,
    jordan_table,
)
from .reps import (
    RepFamily,
    Representation,
    family_eval,
    hitchin_validate,
    project_out_conjugation,
)
from .shift import OrbitData, _root, build_shift, orbit_data, pressure_of

FD_STEP = 0.02
RICHARDSON_TOL = 0.2


def J_value(table_rho: LengthTable, table_eta: LengthTable, h_rho: float, h_eta: float, T: float) -> float:
    """(h_eta / h_rho) I(rho, eta) at horizon T."""
    return (h_eta / h_rho) * intersection_orbital(table_rho, table_eta, T)


def second_difference(f, s: float) -> float:
    """Central five-point second derivative from values f[-2..2] (dict by offset)."""
    return (-f[2] + 16 * f[1] - 30 * f[0] + 16 * f[-1] - f[-2]) / (12 * s * s)


def first_difference(f, s: float) -> float:
    return (-f[2] + 8 * f[1] - 8 * f[-1] + f[-2]) / (12 * s)


@dataclass
class Settings:
    """Numerical choices shared by all pressure-form computations.

    route: "orbital" averages length ratios over the counting window of the
    base; "slope" uses the Gibbs-weighted ratio, i.e. the exact tangent slope
    of the period-n zero-pressure curve (Schottky only).
    entropy: "root" (pressure root at period n, Schottky only), "counting"
    (counting fit with the base's window held fixed) or "unit" (h = 1).
    """

    max_word_length: int = 12
    route: str = "orbital"
    entropy: str = "root"
    n: int = 10
    depth: int = 5
    fd_step: float = FD_STEP
    T: float | None = None
    validate: bool = True

    def __post_init__(self):
        if self.route not in ("orbital", "slope"):
            raise ValueError(f"unknown route {self.route!r}")
        if self.entropy not in ("root", "counting", "unit"):
            raise ValueError(f"unknown entropy method {self.entropy!r}")


class Evaluator:
    """Evaluates J^phi(rho_0, rho_t) along lines of a family, caching the
    representations, Jordan tables and orbit data at each stencil point."""

    def __init__(self, fam: RepFamily, settings: Settings | None = None):
        self.fam = fam
        self.settings = settings or Settings()
        s = self.settings
        if (s.route == "slope" or s.entropy == "root") and fam.base.spec.kind != G.SCHOTTKY:
            raise UnsupportedGroup("route 'slope' and entropy 'root' need a Schottky group")
        self._reps: dict = {}
        self._jordan: dict = {}
        self._orbits: dict = {}
        self._h: dict = {}
        self._base_window: dict = {}

    # -- representations at stencil points
    @staticmethod
    def _key(v, t, curvature=None):
        k = (np.asarray(v, dtype=float) * t).round(15).tobytes()
        if curvature is not None and t != 0:
            k += (np.asarray(curvature) * t * t).round(15).tobytes()
        return k

    def rep(self, v, t: float, curvature=None) -> Representation:
        key = self._key(v, t, curvature)
        if key not in self._reps:
            if t == 0:
                rep = self.fam.base
            else:
                rep = family_eval(self.fam.line(v, curvature), [t])
                if self.settings.validate:
                    report = hitchin_validate(rep, self.settings.depth)
                    if not report:
                        raise StencilValidationFailed(
                            f"stencil point t={t:g} fails Hitchin validation ({report})"
                        )
            self._reps[key] = rep
        return self._reps[key]

    def jordan(self, rep: Representation) -> JordanTable:
        if id(rep) not in self._jordan:
            self._jordan[id(rep)] = jordan_table(rep, self.settings.max_word_length)
        return self._jordan[id(rep)]

    def orbits(self, rep: Representation) -> OrbitData:
        if id(rep) not in self._orbits:
            self._orbits[id(rep)] = orbit_data(rep, self.settings.n)
        return self._orbits[id(rep)]

    def table(self, rep: Representation, phi: WeightFunctional) -> LengthTable:
        return _make_table(self.jordan(rep), phi)

    # -- entropy
    def entropy(self, rep: Representation, phi: WeightFunctional) -> float:
        key = (id(rep), phi)
        if key in self._h:
            return self._h[key]
        method = self.settings.entropy
        if method == "unit":
            h = 1.0
        elif method == "root":
            data = self.orbits(rep)
            ell = phi(data.nu)
            h = _root(lambda x: pressure_of(data, ell, x))
        else:
            base = self.table(self.fam.base, phi)
            if phi not in self._base_window:
                grid = entropy_grid(base)
                self._base_window[phi] = (grid[0], grid[-1], grid[1] - grid[0])
            lo, hi, step = self._base_window[phi]
            h = entropy_counting(self.table(rep, phi), window=(lo, hi), step=step).h
        self._h[key] = h
        return h

    # -- J
    def horizon(self, phi: WeightFunctional) -> float:
        if self.settings.T is not None:
            return self.settings.T
        return self.table(self.fam.base, phi).certified_T

    def J(self, phi: WeightFunctional, rep: Representation, T: float | None = None) -> float:
        base = self.fam.base
        h0, h1 = self.entropy(base, phi), self.entropy(rep, phi)
        if self.settings.route == "slope":
            d0, d1 = self.orbits(base), self.orbits(rep)
            l0, l1 = phi(d0.nu), phi(d1.nu)
            logw = -h0 * l0
            w = d0.multiplicity * np.exp(logw - logw.max())
            I = math.fsum(w * l1) / math.fsum(w * l0)
            return (h1 / h0) * I
        T = self.horizon(phi) if T is None else T
        t0, t1 = self.table(base, phi), self.table(rep, phi)
        if T > t1.certified_T:
            # the window is fixed by the base; the deformed table must reach it
            raise HorizonExceeded(
                f"T = {T:.6g} exceeds the certified horizon {t1.certified_T:.6g} of {rep.label}"
            )
        sel = ~t0.peripheral & (t0.ell <= T)
        return (h1 / h0) * math.fsum(t1.ell[sel] / t0.ell[sel]) / int(sel.sum())


@dataclass
class PressureFormSample:
    """``value`` is the Richardson-extrapolated second derivative; ``central``
    and ``half_step`` are the raw stencil values at s and s/2, and
    ``error_estimate`` = |central - half_step| / 15 bounds the error of value."""

    phi: str
    base: str
    direction: list
    value: float
    central: float
    half_step: float
    discrepancy: float
    error_estimate: float
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)


def _stencil_values(ev: Evaluator, phi, v, s, curvature=None, T=None):
    J, H = {}, {}
    for k in (-2, -1, 0, 1, 2):
        rep = ev.rep(v, k * s, curvature)
        J[k] = ev.J(phi, rep, T)
        H[k] = ev.entropy(rep, phi)
    return J, H


def hessian_J(fam: RepFamily, v, phi: WeightFunctional, T: float | None = None, fd_step: float | None = None,
              settings: Settings | None = None, evaluator: Evaluator | None = None, curvature=None,
              check_noise: bool = True, noise_atol: float = 1e-10) -> PressureFormSample:
    """Second derivative of t -> J(rho_0, rho_t) at t = 0 along the line with
    velocity v, by a central five-point stencil with one Richardson halving."""
    ev = evaluator or Evaluator(fam, settings)
    s = fd_step or ev.settings.fd_step
    v = np.asarray(v, dtype=float)
    if T is None and ev.settings.route == "orbital":
        T = ev.horizon(phi)
        if np.any(v) and ev.settings.T is None:
            # common certified horizon of every stencil point, so that one
            # fixed counting window serves the whole stencil
            for k in (-2, -1, 1, 2):
                for step in (s, s / 2):
                    T = min(T, ev.table(ev.rep(v, k * step, curvature), phi).certified_T)
    if not np.any(v):
        zeros = {k: 1.0 for k in (-2, -1, 0, 1, 2)}
        return PressureFormSample(phi.name, fam.base.label, v.tolist(), 0.0, 0.0, 0.0, 0.0, 0.0,
                                  {"fd_step": s, "T": T, "J": zeros})
    Jf, Hf = _stencil_values(ev, phi, v, s, curvature, T)
    Jh, Hh = _stencil_values(ev, phi, v, s / 2, curvature, T)
    d_full, d_half = second_difference(Jf, s), second_difference(Jh, s / 2)
    rich = (16 * d_half - d_full) / 15
    disc = abs(d_full - d_half)
    # rounding floor of the half-step stencil applied to values of size |J|
    rounding = 64 * np.finfo(float).eps * max(abs(x) for x in Jh.values()) / (s / 2) ** 2
    diag = {
        "fd_step": s,
        "T": T,
        "route": ev.settings.route,
        "entropy_method": ev.settings.entropy,
        "max_word_length": ev.settings.max_word_length,
        "n": ev.settings.n,
        "J": {str(k): Jf[k] for k in sorted(Jf)},
        "J_half_step": {str(k): Jh[k] for k in sorted(Jh)},
        "entropy": {str(k): Hf[k] for k in sorted(Hf)},
        "first_derivative": first_difference(Jf, s),
    }
    sample = PressureFormSample(phi.name, fam.base.label, v.tolist(), float(rich), float(d_full), float(d_half),
                                float(disc), float(disc / 15 + rounding), diag)
    if check_noise and disc > RICHARDSON_TOL * abs(d_full) and disc > noise_atol:
        raise NoiseDominates(f"Richardson discrepancy {disc:.3g} vs value {d_full:.3g}")
    return sample


def degeneracy_check(fam: RepFamily, v, phi: WeightFunctional, classes, fd_step: float | None = None,
                     settings: Settings | None = None, evaluator: Evaluator | None = None) -> dict:
    """Max over sampled classes of |D_v (h l_gamma)| / (h l_gamma) at the base,
    by a central five-point first derivative."""
    ev = evaluator or Evaluator(fam, settings)
    s = fd_step or ev.settings.fd_step
    v = np.asarray(v, dtype=float)
    codes = [G.word_to_codes(G.conj_class(w).rep) for w in classes]
    vals = {}
    for k in (-2, -1, 0, 1, 2):
        rep = ev.rep(v, k * s) if np.any(v) else fam.base
        h = ev.entropy(rep, phi)
        vals[k] = np.array([h * phi(_nu(rep, c)) for c in codes])
    D = first_difference(vals, s)
    norm = np.abs(D) / np.abs(vals[0])
    i = int(np.argmax(norm))
    return {"max_normalized": float(norm[i]), "worst_class": classes[i], "per_class": norm.tolist(),
            "min_normalized": float(norm.min())}


def _nu(rep: Representation, codes: np.ndarray) -> np.ndarray:
    from .linalg import jordan_from_pair

    c = codes[None, :]
    return jordan_from_pair(rep.batch(c), rep.batch_inverse(c))[0][0]


def exp_length(phi: WeightFunctional):
    """f_gamma(rho) = exp(l^phi_rho(gamma))."""
    return lambda rep, w: math.exp(phi(_nu(rep, G.word_to_codes(G.conj_class(w).rep))))


def log_type_K(fam: RepFamily, v, f, classes, fd_step: float | None = None, settings: Settings | None = None,
               evaluator: Evaluator | None = None) -> dict:
    """K_gamma = D_v log|f_gamma| / log|f_gamma(base)| per class."""
    ev = evaluator or Evaluator(fam, settings)
    s = fd_step or ev.settings.fd_step
    v = np.asarray(v, dtype=float)
    vals = {}
    for k in (-2, -1, 0, 1, 2):
        rep = ev.rep(v, k * s) if np.any(v) else fam.base
        vals[k] = np.array([math.log(abs(f(rep, w))) for w in classes])
    if np.any(np.abs(vals[0]) < 1e-14):
        raise ZeroDenominator("|f(base)| = 1 for some class")
    K = first_difference(vals, s) / vals[0]
    return {"K": K.tolist(), "mean": float(K.mean()), "spread": float(K.max() - K.min())}


def entropy_derivative(fam: RepFamily, v, phi: WeightFunctional, fd_step: float | None = None,
                       settings: Settings | None = None, evaluator: Evaluator | None = None) -> tuple[float, float]:
    """(D_v h, h) at the base."""
    ev = evaluator or Evaluator(fam, settings)
    s = fd_step or ev.settings.fd_step
    hv = {k: ev.entropy(ev.rep(v, k * s) if np.any(v) else fam.base, phi) for k in (-2, -1, 0, 1, 2)}
    return first_difference(hv, s), hv[0]


@dataclass
class GramReport:
    phi: str
    basis: list
    matrix: list
    eigenvalues: list
    smallest_eigenvalue: float
    smallest_eigenvector: list
    noise_floor: float
    rank: int
    samples: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)


def gram_matrix(fam: RepFamily, basis, phi: WeightFunctional, T: float | None = None, settings: Settings | None = None,
                evaluator: Evaluator | None = None, project: bool = True, fd_step: float | None = None) -> GramReport:
    """Polarized Hessians G_ij = (P(v_i + v_j) - P(v_i - v_j)) / 4."""
    ev = evaluator or Evaluator(fam, settings)
    B = [np.asarray(v, dtype=float) for v in basis]
    if project and fam.kind != "fuchsian_locus":
        B = [project_out_conjugation(fam.base, v) for v in B]
    k = len(B)
    Gm = np.zeros((k, k))
    samples = []

    def P(v):
        smp = hessian_J(fam, v, phi, T, fd_step, evaluator=ev, check_noise=False)
        samples.append(smp)
        return smp

    for i in range(k):
        Gm[i, i] = P(B[i]).value
    for i in range(k):
        for j in range(i + 1, k):
            Gm[i, j] = Gm[j, i] = (P(B[i] + B[j]).value - P(B[i] - B[j]).value) / 4
    w, U = np.linalg.eigh(Gm)
    noise = max(s.error_estimate for s in samples)
    return GramReport(
        phi.name,
        [b.tolist() for b in B],
        Gm.tolist(),
        w.tolist(),
        float(w[0]),
        U[:, 0].tolist(),
        float(noise),
        int(np.sum(w > 10 * noise)),
        [asdict(s) for s in samples],
    )
