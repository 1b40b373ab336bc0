"""Trace functions and the limit identities relating eigenvalues of products
to traces of eigen-projections, plus transversality and the Vandermonde
determinant."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import groups as G
from .errors import AxesIntersect
from .linalg import eigen_projections, ext_square, proj_pq, sym_square
from .reps import Representation

NOISE_FLOOR = 1e-10


@dataclass
class LimitSequenceReport:
    name: str
    n: list
    values: list
    target: float
    rel_errors: list
    rate: float = float("nan")
    notes: list = field(default_factory=list)

    @property
    def final_error(self) -> float:
        return self.rel_errors[-1]

    def monotone_tail(self, floor: float = NOISE_FLOOR) -> bool:
        """Relative errors are non-increasing over the final third of the grid,
        ignoring steps where both errors sit below the rounding floor."""
        e = np.array(self.rel_errors)
        tail = e[len(e) - max(3, len(e) // 3) :]
        return all(b <= a or max(a, b) < floor for a, b in zip(tail, tail[1:]))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "value", "target", "rel_error"])
        for n, v, e in zip(self.n, self.values, self.rel_errors):
            w.writerow([n, f"{v:.12e}", f"{self.target:.12e}", f"{e:.12e}"])
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(buf.getvalue())
        return buf.getvalue()


def trace_fn(rep: Representation, w: str) -> float:
    return float(np.trace(rep.matrix(w)))


# ---------------------------------------------------------------------------
# log-domain eigenvalue helpers


def _log_product(factors) -> tuple[np.ndarray, float]:
    """Normalized product and the log of the removed scale."""
    P = np.eye(factors[0].shape[0])
    log_scale = 0.0
    for F in factors:
        P = P @ F
        s = np.abs(P).max()
        P /= s
        log_scale += math.log(s)
    return P, log_scale


def _log_top(factors) -> float:
    P, ls = _log_product(factors)
    return math.log(np.abs(np.linalg.eigvals(P)).max()) + ls


def log_spectrum(M_factors, d: int) -> np.ndarray:
    """log|L_1|, log|L_1 L_2|, ... via top eigenvalues of the compounds, and
    log|L_d| via the inverse product; returns the ordered log moduli."""
    logs = np.empty(d)
    top = _log_top(M_factors)
    inv = [np.linalg.inv(F) for F in reversed(M_factors)]
    bottom = -_log_top(inv)
    logs[0], logs[-1] = top, bottom
    if d == 3:
        two = _log_top([ext_square(F) for F in M_factors])
        logs[1] = two - top
    elif d > 3:
        from .linalg import compound

        acc = 0.0
        for k in range(1, d - 1):
            val = _log_top([compound(F, k + 1) for F in M_factors])
            logs[k] = val - top - acc
            acc += logs[k]
    return logs


def _power(M, n):
    return [M] * n


def _rel(value, target):
    return abs(value - target) / abs(target)


def _rate(ns, errs):
    e = np.array(errs)
    ok = e > NOISE_FLOOR * 100
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.array(ns)[ok], np.log(e[ok]), 1)[0])


def _report(name, ns, vals, target):
    errs = [_rel(v, target) for v in vals]
    return LimitSequenceReport(name, list(ns), [float(v) for v in vals], float(target), errs, _rate(ns, errs))


def _grid(n_max: int):
    return list(range(1, n_max + 1))


# ---------------------------------------------------------------------------
# the identities


def limit_trace_identity(rep: Representation, alpha: str, beta: str, n_max: int = 30):
    """lambda_1(a^n b^n) / (lambda_1(a^n) lambda_1(b^n)) -> |Tr(p1(a) p1(b))| and
    lambda_1(a^n b) / lambda_1(a^n) -> |Tr(p1(a) rho(b))|."""
    A, B = rep.matrix(alpha), rep.matrix(beta)
    ea, eb = eigen_projections(A), eigen_projections(B)
    t1 = abs(np.trace(ea.projections[0] @ eb.projections[0]))
    t2 = abs(np.trace(ea.projections[0] @ B))
    ns = _grid(n_max)
    v1, v2 = [], []
    for n in ns:
        la, lb = _log_top(_power(A, n)), _log_top(_power(B, n))
        v1.append(math.exp(_log_top(_power(A, n) + _power(B, n)) - la - lb))
        v2.append(math.exp(_log_top(_power(A, n) + [B]) - la))
    return (
        _report(f"trace_identity[{alpha}^n {beta}^n]", ns, v1, t1),
        _report(f"trace_identity[{alpha}^n {beta}]", ns, v2, t2),
    )


def _log_ratio13(factors):
    return _log_top(factors) + _log_top([np.linalg.inv(F) for F in reversed(factors)])


def hilbert_trace_identity(rep: Representation, alpha: str, beta: str, n_max: int = 30):
    """(lambda_1/lambda_3)-ratio sequences against products of projection traces.

    The second target uses rho(beta)^-1 in the p_3 factor: the smallest
    eigenvalue of a^n b is governed by the top eigenvalue of b^-1 a^-n.
    """
    if rep.d != 3:
        raise ValueError("the Hilbert identity is for d = 3")
    A, B = rep.matrix(alpha), rep.matrix(beta)
    ea, eb = eigen_projections(A), eigen_projections(B)
    pa, pb = ea.projections, eb.projections
    t1 = abs(np.trace(pa[0] @ pb[0]) * np.trace(pa[2] @ pb[2]))
    t2 = abs(np.trace(pa[0] @ B) * np.trace(pa[2] @ np.linalg.inv(B)))
    ns = _grid(n_max)
    v1, v2 = [], []
    for n in ns:
        ra, rb = _log_ratio13(_power(A, n)), _log_ratio13(_power(B, n))
        v1.append(math.exp(_log_ratio13(_power(A, n) + _power(B, n)) - ra - rb))
        v2.append(math.exp(_log_ratio13(_power(A, n) + [B]) - ra))
    return (
        _report(f"hilbert_identity[{alpha}^n {beta}^n]", ns, v1, t1),
        _report(f"hilbert_identity[{alpha}^n {beta}]", ns, v2, t2),
    )


def require_disjoint_axes(rep: Representation, alpha: str, beta: str) -> None:
    spec = rep.spec
    if G.axes_intersect(spec.matrix(alpha), spec.matrix(beta)):
        raise AxesIntersect(f"axes of {alpha} and {beta} intersect (or coincide) in the base group")


def _log_ratio12(factors):
    top = _log_top(factors)
    return 2 * top - _log_top([ext_square(F) for F in factors])


def s2e2_asymptotics(rep: Representation, alpha: str, beta: str, n_max: int = 30):
    """(lambda_1/lambda_2)-ratio sequences against the p_11 / q_12 trace ratios."""
    require_disjoint_axes(rep, alpha, beta)
    A, B = rep.matrix(alpha), rep.matrix(beta)
    p11a, _ = proj_pq(A, 1, 1)
    p11b, _ = proj_pq(B, 1, 1)
    _, q12a = proj_pq(A, 1, 2)
    _, q12b = proj_pq(B, 1, 2)
    t1 = abs(np.trace(p11a @ p11b) / np.trace(q12a @ q12b))
    t2 = abs(np.trace(p11a @ sym_square(B)) / np.trace(q12a @ ext_square(B)))
    ns = _grid(n_max)
    v1, v2 = [], []
    for n in ns:
        ra, rb = _log_ratio12(_power(A, n)), _log_ratio12(_power(B, n))
        v1.append(math.exp(_log_ratio12(_power(A, n) + _power(B, n)) - ra - rb))
        v2.append(math.exp(_log_ratio12(_power(A, n) + [B]) - ra))
    return (
        _report(f"s2e2[{alpha}^n {beta}^n]", ns, v1, t1),
        _report(f"s2e2[{alpha}^n {beta}]", ns, v2, t2),
    )


def nonvanishing_targets(rep: Representation, alpha: str, beta: str) -> dict:
    """Moduli of every projection trace the identities divide by or assert
    nonzero; these are only guaranteed nonzero for disjoint axes."""
    require_disjoint_axes(rep, alpha, beta)
    A, B = rep.matrix(alpha), rep.matrix(beta)
    pa, pb = eigen_projections(A).projections, eigen_projections(B).projections
    d = rep.d
    out = {f"Tr(p{i + 1}(a)p{j + 1}(b))": abs(float(np.trace(pa[i] @ pb[j]))) for i in range(d) for j in range(d)}
    out["Tr(p1(a)b)"] = abs(float(np.trace(pa[0] @ B)))
    out["Tr(p3(a)b^-1)"] = abs(float(np.trace(pa[-1] @ np.linalg.inv(B))))
    for i, j in itertools.product(range(1, d + 1), repeat=2):
        pia, _ = proj_pq(A, i, i)
        pjb, _ = proj_pq(B, j, j)
        out[f"Tr(p{i}{i}(a)p{j}{j}(b))"] = abs(float(np.trace(pia @ pjb)))
    _, q12a = proj_pq(A, 1, 2)
    _, q12b = proj_pq(B, 1, 2)
    out["Tr(q12(a)q12(b))"] = abs(float(np.trace(q12a @ q12b)))
    return out


@dataclass
class TransversalityReport:
    margin: float
    pairing_margin: float
    determinants: dict

    @property
    def ok(self) -> bool:
        return self.margin > 0 and self.pairing_margin > 0


def transversality_check(rep: Representation, alpha: str, beta: str) -> TransversalityReport:
    """min |det| over all d-subsets of the 2d unit eigenvectors of rho(alpha)
    and rho(beta), and min |p_i(alpha) e_j(beta)|."""
    require_disjoint_axes(rep, alpha, beta)
    ea, eb = eigen_projections(rep.matrix(alpha)), eigen_projections(rep.matrix(beta))
    vecs = np.hstack([ea.eigenvectors, eb.eigenvectors])
    names = [f"e{i + 1}(a)" for i in range(rep.d)] + [f"e{i + 1}(b)" for i in range(rep.d)]
    dets = {}
    for idx in itertools.combinations(range(2 * rep.d), rep.d):
        Msub = vecs[:, idx]
        dets[",".join(names[i] for i in idx)] = abs(float(np.linalg.det(Msub / np.linalg.norm(Msub, axis=0))))
    pairing = min(
        float(np.linalg.norm(ea.projections[i] @ eb.eigenvectors[:, j]))
        for i in range(rep.d)
        for j in range(rep.d)
    )
    return TransversalityReport(min(dets.values()), pairing, dets)


# ---------------------------------------------------------------------------
# Vandermonde


@dataclass
class VandermondeResult:
    determinant: float
    factored: float
    sign: int  # determinant = sign * factored
    match: bool
    exact_determinant: Fraction = field(repr=False, default=Fraction(0))


def vandermonde_check(L: float, n: int, m: int, l: int) -> VandermondeResult:
    """det [[x_i^2, x_i, 1]] for x = (L^n, L^(n+m), L^(n+m+l)) against the
    product (x_1 - x_2)(x_1 - x_3)(x_2 - x_3), in exact rational arithmetic
    on the binary value of L."""
    if not L > 1 or min(n, m, l) < 1:
        raise ValueError("need L > 1 and n, m, l >= 1")
    q = Fraction(L)
    x1, x2, x3 = q**n, q ** (n + m), q ** (n + m + l)
    rows = [(x * x, x, Fraction(1)) for x in (x1, x2, x3)]
    (a, b, c), (d, e, f), (g, h, i) = rows
    det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    fac = (x1 - x2) * (x1 - x3) * (x2 - x3)
    sign = 1 if (det > 0) == (fac > 0) else -1
    return VandermondeResult(float(det), float(fac), sign, det == sign * fac, det)
