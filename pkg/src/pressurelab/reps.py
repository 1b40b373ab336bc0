"""Representations of the rank-2 free group into SL(d, R) and analytic families
of them: the Fuchsian locus, generator perturbations, cusp-constrained
(type-preserving) deformations and contragredient-symmetrized families."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import expm
from scipy.special import comb

from . import groups as G
from .errors import ConstraintDiverged, GaugeNotFound, OutsideValidity, ValidationFailed
from .linalg import LOX_TOL, eigen_projections, jordan_from_pair

FUCHSIAN_LOCUS = "fuchsian_locus"
GENERATOR_PERTURBATION = "generator_perturbation"
CUSP_CONSTRAINED = "cusp_constrained"
CONTRAGREDIENT_SYMMETRIZED = "contragredient_symmetrized"
FAMILY_KINDS = (
    FUCHSIAN_LOCUS,
    GENERATOR_PERTURBATION,
    CUSP_CONSTRAINED,
    CONTRAGREDIENT_SYMMETRIZED,
)


@dataclass(frozen=True, eq=False)
class Representation:
    """Images of the generators a, b as d x d unimodular matrices."""

    gens: tuple
    spec: G.GroupSpec
    type_preserving: bool = False
    label: str = ""
    _dual: "Representation | None" = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        a, b = (np.asarray(g, dtype=float) for g in self.gens)
        object.__setattr__(self, "gens", (a, b))
        for g in (a, b):
            if g.shape != a.shape or g.shape[0] != g.shape[1]:
                raise ValueError("generator images must be square and of equal size")

    @property
    def d(self) -> int:
        return self.gens[0].shape[0]

    @cached_property
    def letters(self) -> np.ndarray:
        """Stack of letter images in code order (a, A, b, B)."""
        a, b = self.gens
        return np.stack([a, np.linalg.inv(a), b, np.linalg.inv(b)])

    def matrix(self, w: str) -> np.ndarray:
        out = np.eye(self.d)
        for ch in w:
            out = out @ self.letters[G.CODE[ch]]
        return out

    def batch(self, codes: np.ndarray) -> np.ndarray:
        return G.batch_words(self.letters, codes)

    def batch_inverse(self, codes: np.ndarray) -> np.ndarray:
        """Images of the inverse words (letters inverted, order reversed)."""
        return G.batch_words(self.letters, (codes[:, ::-1] ^ 1).astype(np.int8))

    def determinant_error(self) -> float:
        return max(abs(np.linalg.det(g) - 1.0) for g in self.gens)

    def peripheral_matrix(self) -> np.ndarray:
        return self.matrix(G.COMMUTATOR)

    def precompose(self, auto: G.Automorphism) -> "Representation":
        """rho o psi: generator images are rho evaluated on the images of psi."""
        return Representation(
            (self.matrix(auto.image_a), self.matrix(auto.image_b)),
            self.spec,
            self.type_preserving,
            f"{self.label}*{auto.name}",
        )


# ---------------------------------------------------------------------------
# lifts and the contragredient


def irreducible_lift(g, d: int) -> np.ndarray:
    """Image of a 2x2 matrix under the d-dimensional irreducible representation
    (symmetric power of degree d-1), in the orthonormally scaled monomial basis
    x^(n-k) y^k, k = 0..n, n = d-1."""
    g = np.asarray(g, dtype=float)
    (p, q), (r, s) = g
    n = d - 1
    M = np.zeros((d, d))
    # column k: (p x + r y)^(n-k) (q x + s y)^k expanded in powers of y
    for k in range(d):
        poly = np.array([1.0])
        for _ in range(n - k):
            poly = np.convolve(poly, [p, r])
        for _ in range(k):
            poly = np.convolve(poly, [q, s])
        M[:, k] = poly
    scale = np.sqrt(comb(n, np.arange(d)))
    return M * scale[None, :] / scale[:, None]


def fuchsian_rep(spec: G.GroupSpec, d: int = 3) -> Representation:
    a, b = spec.base_generators
    return Representation(
        (irreducible_lift(a, d), irreducible_lift(b, d)),
        spec,
        spec.kind == G.PUNCTURED_TORUS,
        f"fuchsian(d={d})",
    )


def contragredient(rep: Representation) -> Representation:
    """g -> (g^-1)^T on generators; applying it twice returns the input object."""
    if rep._dual is not None:
        return rep._dual
    dual = Representation(
        tuple(np.linalg.inv(g).T for g in rep.gens),
        rep.spec,
        rep.type_preserving,
        f"C({rep.label})",
        rep,
    )
    return dual


# ---------------------------------------------------------------------------
# cusp projection


def _cusp_residual(A, B):
    C = A @ B @ np.linalg.inv(A) @ np.linalg.inv(B)
    Ci = np.linalg.inv(C)
    d = A.shape[0]
    return np.array([np.trace(C) - d, np.trace(Ci) - d]), C, Ci


def _traceless(X):
    return X - np.trace(X) / X.shape[0] * np.eye(X.shape[0])


def cusp_gradients(A, B) -> np.ndarray:
    """Gradients of (tr C, tr C^-1), C = [A, B], with respect to left
    multiplicative updates A -> exp(X) A, B -> exp(Y) B, as a 2 x 2d^2 array."""
    Ai, Bi = np.linalg.inv(A), np.linalg.inv(B)
    C = A @ B @ Ai @ Bi
    Ci = np.linalg.inv(C)
    rows = [
        (_traceless((C - Bi @ A @ B @ Ai).T), _traceless((B @ Ai @ Bi @ A - C).T)),
        (_traceless((A @ Bi @ Ai @ B - Ci).T), _traceless((Ci - Ai @ B @ A @ Bi).T)),
    ]
    return np.array([np.concatenate([X.ravel(), Y.ravel()]) for X, Y in rows])


def cusp_project(rep: Representation, tol: float = 1e-12, max_iter: int = 50) -> Representation:
    """Minimal-norm Gauss-Newton correction making the commutator unipotent
    (d = 3: tr C = tr C^-1 = 3)."""
    if rep.spec.kind != G.PUNCTURED_TORUS:
        raise ValidationFailed("cusp projection needs a punctured-torus group")
    if rep.d != 3:
        raise ValidationFailed("cusp projection is implemented for d = 3 only")
    A, B = rep.gens
    d = rep.d
    res, _, _ = _cusp_residual(A, B)
    it = 0
    while np.max(np.abs(res)) >= tol:
        if it >= max_iter:
            raise ConstraintDiverged(f"cusp Newton residual {np.max(np.abs(res)):.3g} after {it} steps")
        Jm = cusp_gradients(A, B)
        step = np.linalg.lstsq(Jm, -res, rcond=None)[0]
        X, Y = step[: d * d].reshape(d, d), step[d * d :].reshape(d, d)
        A, B = expm(X) @ A, expm(Y) @ B
        res, _, _ = _cusp_residual(A, B)
        it += 1
        if not np.all(np.isfinite(res)):
            raise ConstraintDiverged("cusp Newton produced non-finite values")
    if it == 0:
        return Representation(rep.gens, rep.spec, True, rep.label)
    return Representation((A, B), rep.spec, True, f"cusp({rep.label})")


# ---------------------------------------------------------------------------
# Hitchin validation


@dataclass
class HitchinReport:
    loxodromy_ok: bool
    positivity_ok: bool
    worst_margin: float
    classes_checked: int
    min_gap: float = float("nan")
    flags_checked: int = 0
    positivity_checked: bool = True
    offending: str = ""

    @property
    def ok(self) -> bool:
        return self.loxodromy_ok and self.positivity_ok

    def __bool__(self) -> bool:
        return self.ok


def _sample_elements(spec: G.GroupSpec, max_len: int = 3) -> list[str]:
    """Primitive reduced words of length <= max_len, with distinct attracting
    fixed points in the base group, sorted by their boundary angle."""
    words = []
    for L in range(1, max_len + 1):
        for tup in itertools.product(G.LETTERS, repeat=L):
            w = "".join(tup)
            if G.reduce_word(w) != w:
                continue
            if G.primitive_period(w) != L or G.cyclic_reduce(w) == "":
                continue
            if G.is_peripheral(spec, w):
                continue
            words.append(w)
    pts = {}
    for w in words:
        try:
            ang = G.fixed_points(spec.matrix(w))[0]
        except ValidationFailed:
            continue
        key = round(ang, 9)
        pts.setdefault(key, (ang, w))
    return [w for _, w in sorted(pts.values())]


def flag_positivity(rep: Representation, words: list[str]) -> tuple[float, int]:
    """Worst positivity margin of the attracting flags of ``words`` (d = 3).

    ``words`` must be sorted by the circle order of their base fixed points.
    Each flag is a point x (top eigenvector) and a covector f vanishing on the
    top two eigenvectors.  Checks triple ratios of all triples and the cross
    ratios f_i(x_j) f_k(x_l) / (f_i(x_l) f_k(x_j)) of all ordered quadruples.
    The margin of a positive ratio r is 1 / (1 + |log r|), so it only tends to
    zero as the ratio degenerates; a non-positive ratio scores -1.
    """
    xs, fs = [], []
    for w in words:
        E = eigen_projections(rep.matrix(w)).eigenvectors
        xs.append(E[:, 0])
        fs.append(np.cross(E[:, 0], E[:, 1]))
    D = np.array(fs) @ np.array(xs).T  # D[i, j] = f_i(x_j)
    n = len(words)
    i, j, k = np.array(list(itertools.combinations(range(n), 3))).T
    tri = D[i, j] * D[j, k] * D[k, i] / (D[i, k] * D[j, i] * D[k, j])
    q = np.array(list(itertools.combinations(range(n), 4)))
    ratios = [tri]
    if len(q):
        i, j, k, l = q.T
        ratios.append(D[i, j] * D[k, l] / (D[i, l] * D[k, j]))
        ratios.append(D[j, k] * D[l, i] / (D[j, i] * D[l, k]))
    r = np.concatenate(ratios)
    with np.errstate(divide="ignore", invalid="ignore"):
        m = np.where(r > 0, 1.0 / (1.0 + np.abs(np.log(np.abs(r)))), -1.0)
    m = np.where(np.isfinite(m), m, -1.0)
    return float(m.min()), n


def hitchin_validate(rep: Representation, depth: int = 5, sample_length: int = 3) -> HitchinReport:
    """Finite-depth Hitchin certificate: loxodromy of every non-peripheral class
    up to ``depth`` and positivity of attracting-flag tuples (d = 3)."""
    checked, min_gap, offending = 0, np.inf, ""
    for L in range(1, depth + 1):
        codes = G.class_codes(L)
        codes = codes[~G.peripheral_mask(rep.spec, codes)]
        if not len(codes):
            continue
        _, gap = jordan_from_pair(rep.batch(codes), rep.batch_inverse(codes))
        checked += len(codes)
        if gap.min() < min_gap:
            min_gap = float(gap.min())
            offending = G.codes_to_word(codes[int(np.argmin(gap))])
    lox_ok = min_gap >= LOX_TOL
    if not lox_ok:
        return HitchinReport(False, False, -np.inf, checked, min_gap, 0, rep.d == 3, offending)
    if rep.d != 3:
        return HitchinReport(True, True, float("nan"), checked, min_gap, 0, False)
    try:
        margin, n = flag_positivity(rep, _sample_elements(rep.spec, sample_length))
    except Exception as exc:  # eigen-solve failures count as non-positive
        return HitchinReport(True, False, -np.inf, checked, min_gap, 0, True, str(exc))
    return HitchinReport(True, margin > 0, margin, checked, min_gap, n)


# ---------------------------------------------------------------------------
# families


def sl2_to_lift_velocity(X, g, d: int) -> np.ndarray:
    """Velocity of t -> lift(exp(tX) g) written as V lift(g)."""
    h = 1e-6
    Lg = irreducible_lift(g, d)
    dL = (irreducible_lift(expm(h * X) @ g, d) - irreducible_lift(expm(-h * X) @ g, d)) / (2 * h)
    return dL @ np.linalg.inv(Lg)


@dataclass(eq=False)
class RepFamily:
    """Analytic family t -> rho_t with rho_0 = base.

    ``velocities`` has shape (k, 2, m, m): one pair of trace-zero matrices per
    parameter.  For the Fuchsian locus m = 2 (sl2 velocities of the base
    Fuchsian generators); otherwise m = d.  ``curvature``, when given, bends a
    one-parameter path to exp(t V + t^2 W) rho_0 without changing its velocity.
    """

    kind: str
    base: Representation
    velocities: np.ndarray
    radius: float | None = None
    Q: np.ndarray | None = None
    curvature: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}")
        V = np.asarray(self.velocities, dtype=float)
        if V.ndim == 3:
            V = V[None]
        if V.ndim != 4 or V.shape[1] != 2:
            raise ValueError("velocities must have shape (k, 2, m, m)")
        self.velocities = V
        if np.max(np.abs(np.trace(V, axis1=2, axis2=3)), initial=0) > 1e-10:
            raise ValueError("velocities must be trace-zero")
        if self.kind == CONTRAGREDIENT_SYMMETRIZED:
            if self.Q is None:
                self.Q = invariant_form(self.base)
            self.velocities = np.array([anti_self_dual_part(v, self.Q) for v in V])

    @property
    def dim(self) -> int:
        return self.velocities.shape[0]

    def line(self, v, curvature=None) -> "RepFamily":
        """One-parameter subfamily of the same kind with velocity ``v``."""
        return RepFamily(self.kind, self.base, np.asarray(v)[None], None, self.Q, curvature, self.label)

    def __call__(self, t) -> Representation:
        return family_eval(self, t)


def family_eval(fam: RepFamily, t) -> Representation:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if t.shape != (fam.dim,):
        raise ValueError(f"parameter must have {fam.dim} entries")
    if fam.radius is not None and np.max(np.abs(t)) > fam.radius + 1e-12:
        raise OutsideValidity(f"|t| = {np.max(np.abs(t)):.4g} exceeds radius {fam.radius:.4g}")
    if not np.any(t):
        return fam.base
    X = np.einsum("k,kgij->gij", t, fam.velocities)
    if fam.curvature is not None:
        X = X + t.sum() ** 2 * np.asarray(fam.curvature)
    if fam.kind == FUCHSIAN_LOCUS:
        d = fam.base.d
        g2 = [expm(X[i]) @ fam.base.spec.base_generators[i] for i in range(2)]
        return Representation(
            tuple(irreducible_lift(g, d) for g in g2),
            fam.base.spec,
            fam.base.type_preserving,
            f"{fam.kind}({t.tolist()})",
        )
    gens = tuple(expm(X[i]) @ fam.base.gens[i] for i in range(2))
    rep = Representation(gens, fam.base.spec, False, f"{fam.kind}({t.tolist()})")
    if fam.kind == CUSP_CONSTRAINED:
        rep = cusp_project(rep)
    return rep


def validity_radius(fam: RepFamily, depth: int = 5, r_max: float = 1.0, resolution: float = 1e-3) -> float:
    """Largest r (to ``resolution``) such that hitchin_validate passes at depth
    ``depth`` at t = +-r e_k for every parameter direction e_k."""

    def ok(r):
        for k in range(fam.dim):
            for sgn in (1, -1):
                t = np.zeros(fam.dim)
                t[k] = sgn * r
                try:
                    rep = family_eval(RepFamily(fam.kind, fam.base, fam.velocities, None, fam.Q), t)
                except (ConstraintDiverged, OutsideValidity):
                    return False
                if not hitchin_validate(rep, depth):
                    return False
        return True

    if ok(r_max):
        return r_max
    lo, hi = 0.0, r_max
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


def random_velocity(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    V = rng.standard_normal((2, d, d)) * scale
    return np.array([_traceless(X) for X in V])


def perturbation_family(base: Representation, velocities, kind=GENERATOR_PERTURBATION, radius=None) -> RepFamily:
    return RepFamily(kind, base, np.asarray(velocities), radius)


# ---------------------------------------------------------------------------
# self-duality gauge and the contragredient differential


def invariant_form(rep: Representation, tol: float = 1e-8) -> np.ndarray:
    """Symmetric Q (unit Frobenius norm) with g^T Q g = Q for both generators."""
    d = rep.d
    I = np.eye(d * d)
    # row-major vec(g^T Q g) = kron(g^T, g^T) vec(Q)
    A = np.vstack([np.kron(g.T, g.T) - I for g in rep.gens])
    _, s, Vt = np.linalg.svd(A)
    scale = max(s[0], 1.0)
    null = int(np.sum(s < tol * scale))
    if null != 1:
        raise GaugeNotFound(f"invariant form solution space has dimension {null}")
    Q = Vt[-1].reshape(d, d)
    if np.linalg.norm(Q - Q.T) > np.linalg.norm(Q + Q.T):
        raise GaugeNotFound("invariant form is antisymmetric")
    Q = 0.5 * (Q + Q.T)
    Q /= np.linalg.norm(Q)
    flat = Q.ravel()
    if flat[np.flatnonzero(np.abs(flat) > 1e-12)[0]] < 0:
        Q = -Q
    return Q


def dual_velocity(V, Q) -> np.ndarray:
    """The contragredient differential in the gauge Q: V -> -Q^-1 V^T Q per generator."""
    Qi = np.linalg.inv(Q)
    return np.array([-Qi @ X.T @ Q for X in np.asarray(V)])


def anti_self_dual_part(V, Q) -> np.ndarray:
    V = np.asarray(V)
    return 0.5 * (V - dual_velocity(V, Q))


def self_dual_part(V, Q) -> np.ndarray:
    V = np.asarray(V)
    return 0.5 * (V + dual_velocity(V, Q))


def dual_velocity_fd(base: Representation, V, Q, h: float = 1e-4) -> np.ndarray:
    """Central finite difference of t -> Q^-1 C(rho_t) Q along rho_t = exp(tV) rho_0,
    expressed as a velocity (derivative times rho_0^-1)."""
    Qi = np.linalg.inv(Q)
    out = []
    for X, g in zip(np.asarray(V), base.gens):
        plus = Qi @ np.linalg.inv(expm(h * X) @ g).T @ Q
        minus = Qi @ np.linalg.inv(expm(-h * X) @ g).T @ Q
        out.append((plus - minus) / (2 * h) @ np.linalg.inv(g))
    return np.array(out)


def contragredient_differential(fam: RepFamily, v, Q=None, method: str = "analytic"):
    """Split a velocity at a self-dual base into (self-dual, anti-self-dual) parts."""
    if Q is None:
        Q = fam.Q if fam.Q is not None else invariant_form(fam.base)
    v = np.asarray(v, dtype=float)
    if method == "fd":
        dv = dual_velocity_fd(fam.base, v, Q)
    else:
        dv = dual_velocity(v, Q)
    return 0.5 * (v + dv), 0.5 * (v - dv)


def conjugation_directions(rep: Representation) -> np.ndarray:
    """Velocities X - Ad_g X of conjugation by exp(sX), X over a basis of sl(d)."""
    d = rep.d
    basis = []
    for i in range(d):
        for j in range(d):
            if i != j:
                E = np.zeros((d, d))
                E[i, j] = 1.0
                basis.append(E)
    for i in range(d - 1):
        E = np.zeros((d, d))
        E[i, i], E[i + 1, i + 1] = 1.0, -1.0
        basis.append(E)
    out = []
    for X in basis:
        out.append(np.array([X - g @ X @ np.linalg.inv(g) for g in rep.gens]))
    return np.array(out)


def project_out_conjugation(rep: Representation, V) -> np.ndarray:
    """Frobenius-orthogonal projection of V onto the complement of the
    conjugation orbit's tangent space at ``rep``."""
    C = conjugation_directions(rep).reshape(-1, 2 * rep.d**2)
    U, s, _ = np.linalg.svd(C.T, full_matrices=False)
    U = U[:, s > 1e-10 * s[0]]
    v = np.asarray(V, dtype=float).ravel()
    return (v - U @ (U.T @ v)).reshape(np.shape(V))


def frobenius_angle(u, v) -> float:
    """Angle in degrees between two velocities, ignoring sign."""
    u, v = np.ravel(u), np.ravel(v)
    c = abs(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.degrees(math.acos(min(1.0, c)))
