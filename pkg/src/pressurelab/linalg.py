"""Spectral kernels: Jordan and Cartan projections, eigen-projections, flags,
the Iwasawa cocycle and the symmetric / exterior square lifts."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import subspace_angles

from .errors import GapTooSmall, NotLoxodromic, SingularInput

LOX_TOL = 1e-9


def _as_matrix(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    return M


def _check_gaps(log_mod: np.ndarray, tol: float, what="eigenvalue") -> None:
    gaps = -np.diff(log_mod)
    if gaps.size and gaps.min() < tol:
        k = int(np.argmin(gaps)) + 1
        raise NotLoxodromic(
            f"{what} moduli {k} and {k + 1} are not separated (gap {gaps.min():.3g})"
        )


# ---------------------------------------------------------------------------
# Jordan / Cartan projections


def jordan_projection(M, allow_unipotent: bool = False, tol: float = LOX_TOL) -> np.ndarray:
    """Ordered logs of eigenvalue moduli, normalized to sum zero.

    Raises NotLoxodromic when two moduli are closer than ``tol`` (relative),
    unless ``allow_unipotent`` is set.
    """
    M = _as_matrix(M)
    vals = np.linalg.eigvals(M)
    mod = np.abs(vals)
    if np.any(mod == 0):
        raise SingularInput("matrix has a zero eigenvalue")
    x = np.sort(np.log(mod))[::-1]
    if not allow_unipotent:
        _check_gaps(x, tol)
        if np.max(np.abs(vals.imag)) > 0:
            raise NotLoxodromic("complex eigenvalues")
    return x - x.mean()


def cartan_projection(M) -> np.ndarray:
    """Ordered logs of singular values, normalized to sum zero."""
    M = _as_matrix(M)
    s = np.linalg.svd(M, compute_uv=False)
    if s[-1] <= 0 or s[-1] < s[0] * 1e-300:
        raise SingularInput("matrix is singular")
    x = np.log(s)
    return x - x.mean()


def uk_plane(M, k: int, tol: float = LOX_TOL) -> np.ndarray:
    """Orthonormal basis (d x k) for the span of the first k major axes of M."""
    M = _as_matrix(M)
    d = M.shape[0]
    if not 1 <= k <= d:
        raise ValueError("k must be in 1..d")
    U, s, _ = np.linalg.svd(M)
    if k < d and math.log(s[k - 1]) - math.log(s[k]) < tol:
        raise GapTooSmall(f"singular values {k} and {k + 1} are not separated")
    return U[:, :k]


# ---------------------------------------------------------------------------
# eigen-projections


@dataclass(frozen=True)
class EigenData:
    eigenvalues: np.ndarray  # signed, decreasing modulus
    eigenvectors: np.ndarray  # columns, unit norm, first nonzero coordinate > 0
    covectors: np.ndarray  # rows, dual basis: covectors @ eigenvectors = I
    projections: np.ndarray  # (d, d, d): projections[i] = outer(e_i, f_i)

    @property
    def d(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        return np.einsum("i,ijk->jk", self.eigenvalues, self.projections)


def _sign_normalize(v: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > 1e-14 * np.abs(v).max())
    return -v if v[nz[0]] < 0 else v


def eigen_projections(M, tol: float = LOX_TOL) -> EigenData:
    M = _as_matrix(M)
    vals, vecs = np.linalg.eig(M)
    order = np.argsort(-np.abs(vals))
    vals, vecs = vals[order], vecs[:, order]
    if np.max(np.abs(vals.imag)) > 1e-12 * np.abs(vals).max():
        raise NotLoxodromic("complex eigenvalues")
    _check_gaps(np.log(np.abs(vals.real)), tol)
    vals, vecs = vals.real, vecs.real
    E = np.column_stack([_sign_normalize(v / np.linalg.norm(v)) for v in vecs.T])
    F = np.linalg.inv(E)
    P = np.einsum("ji,ik->ijk", E, F)
    return EigenData(vals, E, F, P)


def cubic_eigenvalues(M) -> np.ndarray:
    """Real eigenvalues of a 3x3 matrix from the characteristic cubic
    (trigonometric form), with one Newton polish.  Oracle for tests."""
    M = _as_matrix(M)
    c2 = -np.trace(M)
    c1 = 0.5 * (np.trace(M) ** 2 - np.trace(M @ M))
    c0 = -np.linalg.det(M)
    # depressed cubic y^3 + p y + q with x = y - c2/3
    p = c1 - c2 * c2 / 3
    q = 2 * c2**3 / 27 - c2 * c1 / 3 + c0
    if p >= 0:
        raise NotLoxodromic("characteristic cubic has complex roots")
    r = 2 * math.sqrt(-p / 3)
    arg = max(-1.0, min(1.0, 3 * q / (p * r)))
    theta = math.acos(arg) / 3
    roots = np.array([r * math.cos(theta - 2 * math.pi * k / 3) for k in range(3)]) - c2 / 3
    f = lambda x: ((x + c2) * x + c1) * x + c0
    df = lambda x: (3 * x + 2 * c2) * x + c1
    roots = np.array([x - f(x) / df(x) if df(x) != 0 else x for x in roots])
    return roots[np.argsort(-np.abs(roots))]


# ---------------------------------------------------------------------------
# flags


@dataclass(frozen=True)
class Flag:
    """A full flag stored as an orthonormal basis; the leading k columns span F^k."""

    basis: np.ndarray

    @classmethod
    def from_basis(cls, B) -> "Flag":
        B = _as_matrix(B)
        Q, R = np.linalg.qr(B)
        s = np.sign(np.diag(R))
        s[s == 0] = 1.0
        return cls(Q * s)

    @classmethod
    def standard(cls, d: int) -> "Flag":
        return cls(np.eye(d))

    @property
    def d(self) -> int:
        return self.basis.shape[0]

    def plane(self, k: int) -> np.ndarray:
        return self.basis[:, :k]

    def apply(self, M) -> "Flag":
        return Flag.from_basis(_as_matrix(M) @ self.basis)

    def distance(self, other: "Flag") -> float:
        """Largest principal angle over all partial subspaces."""
        return max(
            float(np.max(subspace_angles(self.plane(k), other.plane(k))))
            for k in range(1, self.d)
        )

    def equals(self, other: "Flag", tol: float = 1e-8) -> bool:
        return self.distance(other) < tol


def attracting_flag(M, tol: float = LOX_TOL) -> Flag:
    return Flag.from_basis(eigen_projections(M, tol).eigenvectors)


def repelling_flag(M, tol: float = LOX_TOL) -> Flag:
    return Flag.from_basis(eigen_projections(M, tol).eigenvectors[:, ::-1])


def iwasawa_cocycle(M, F: Flag) -> np.ndarray:
    """B(M, F): log of the diagonal of the triangular factor of M K, where K is
    the orthonormal basis of F (QR with positive diagonal)."""
    M = _as_matrix(M)
    R = np.linalg.qr(M @ F.basis, mode="r")
    return np.log(np.abs(np.diag(R)))


# ---------------------------------------------------------------------------
# symmetric and exterior squares


@lru_cache(maxsize=None)
def _sym_basis(d: int) -> np.ndarray:
    rows = []
    for i in range(d):
        for j in range(i, d):
            r = np.zeros((d, d))
            if i == j:
                r[i, i] = 1.0
            else:
                r[i, j] = r[j, i] = 1 / math.sqrt(2)
            rows.append(r.ravel())
    P = np.array(rows)
    P.setflags(write=False)
    return P


@lru_cache(maxsize=None)
def _ext_basis(d: int) -> np.ndarray:
    rows = []
    for i, j in itertools.combinations(range(d), 2):
        r = np.zeros((d, d))
        r[i, j], r[j, i] = 1 / math.sqrt(2), -1 / math.sqrt(2)
        rows.append(r.ravel())
    P = np.array(rows)
    P.setflags(write=False)
    return P


def sym_index(d: int) -> list[tuple[int, int]]:
    """Index pairs (i <= j) labelling the symmetric-square basis."""
    return [(i, j) for i in range(d) for j in range(i, d)]


def ext_index(d: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(d), 2))


def _lift(P: np.ndarray, M: np.ndarray) -> np.ndarray:
    if M.ndim == 2:
        return P @ np.kron(M, M) @ P.T
    K = np.einsum("nij,nkl->nikjl", M, M).reshape(M.shape[0], P.shape[1], P.shape[1])
    return P @ K @ P.T


def sym_square(M) -> np.ndarray:
    """Action on S^2 R^d in the orthonormal basis e_i e_i, sqrt(2) e_i e_j (i<j).

    Accepts a single matrix or a stack of matrices.
    """
    M = np.asarray(M, dtype=float)
    return _lift(_sym_basis(M.shape[-1]), M)


def ext_square(M) -> np.ndarray:
    """Action on the exterior square in the basis e_i ^ e_j, i < j."""
    M = np.asarray(M, dtype=float)
    return _lift(_ext_basis(M.shape[-1]), M)


def proj_pq(M, i: int, j: int, tol: float = LOX_TOL) -> tuple[np.ndarray, np.ndarray | None]:
    """Projections p_ij on S^2 and q_ij on the exterior square.

    Indices are 1-based, matching the eigenvalue labels L_1, ..., L_d.
    ``q`` is None when i == j.
    """
    if not 1 <= i <= j:
        raise ValueError("need 1 <= i <= j")
    ed = eigen_projections(M, tol)
    if j > ed.d:
        raise ValueError("index exceeds dimension")
    pi, pj = ed.projections[i - 1], ed.projections[j - 1]
    d = ed.d
    if i == j:
        return _sym_basis(d) @ np.kron(pi, pi) @ _sym_basis(d).T, None
    both = np.kron(pi, pj) + np.kron(pj, pi)
    return (
        _sym_basis(d) @ both @ _sym_basis(d).T,
        _ext_basis(d) @ both @ _ext_basis(d).T,
    )


# ---------------------------------------------------------------------------
# batched kernels for long words


def compound(M, k: int) -> np.ndarray:
    """k-th compound matrix (action on the k-th exterior power), batched."""
    M = np.asarray(M, dtype=float)
    d = M.shape[-1]
    idx = list(itertools.combinations(range(d), k))
    if k == 1:
        return M.copy()
    out = np.empty(M.shape[:-2] + (len(idx), len(idx)))
    for r, I in enumerate(idx):
        rows = M[..., list(I), :]
        for c, J in enumerate(idx):
            out[..., r, c] = np.linalg.det(rows[..., list(J)])
    return out


def top_log_modulus(mats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """log|top eigenvalue| and the relative gap log|L1| - log|L2| for a stack."""
    vals = np.linalg.eigvals(mats)
    mod = np.sort(np.abs(vals), axis=-1)
    with np.errstate(divide="ignore"):
        top = np.log(mod[..., -1])
        gap = top - np.log(mod[..., -2]) if mod.shape[-1] > 1 else np.full_like(top, np.inf)
    real = np.abs(vals.imag).max(axis=-1) <= 1e-12 * mod[..., -1]
    gap = np.where(real | (gap > 1e-6), gap, 0.0)
    return top, gap


def jordan_from_pair(mats: np.ndarray, inv_mats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Jordan projections of a stack using only top eigenvalues of compounds of
    M and M^{-1}; accurate when the spread of moduli exceeds double precision.

    Returns ``(nu, min_gap)`` with nu of shape (N, d).
    """
    d = mats.shape[-1]
    # partial sums s_k = log|L_1...L_k| from compounds of M
    half = d // 2
    s = [np.zeros(mats.shape[0])]
    gaps = []
    for k in range(1, half + 1):
        top, gap = top_log_modulus(compound(mats, k))
        s.append(top)
        gaps.append(gap)
    t = [np.zeros(mats.shape[0])]
    for k in range(1, d - half):
        top, gap = top_log_modulus(compound(inv_mats, k))
        t.append(top)
        gaps.append(gap)
    # smallest moduli: log|L_d...L_{d-k+1}| = -t_k
    nu = np.empty((mats.shape[0], d))
    for k in range(1, half + 1):
        nu[:, k - 1] = s[k] - s[k - 1]
    for k in range(1, d - half):
        nu[:, d - k] = -(t[k] - t[k - 1])
    # the one remaining entry comes from the zero-sum condition
    nu[:, half] = -(nu[:, :half].sum(axis=1) + nu[:, half + 1 :].sum(axis=1))
    nu -= nu.mean(axis=1, keepdims=True)
    min_gap = np.min(np.stack(gaps), axis=0) if gaps else np.full(len(nu), np.inf)
    ordered = np.all(np.diff(nu, axis=1) < 0, axis=1)
    min_gap = np.where(ordered, min_gap, 0.0)
    return nu, min_gap


def qr_product_flag(letter_mats: np.ndarray, codes: np.ndarray, seed_flag: np.ndarray) -> np.ndarray:
    """Orthonormal flag bases of rho(x_1)...rho(x_m) F for each row x of ``codes``.

    The product is applied right to left with QR re-orthonormalization after
    every factor, so only the flag (not the norm) is tracked.
    """
    N, m = codes.shape
    F = np.broadcast_to(seed_flag, (N,) + seed_flag.shape).copy()
    for i in range(m - 1, -1, -1):
        Q, R = np.linalg.qr(letter_mats[codes[:, i]] @ F)
        s = np.sign(np.diagonal(R, axis1=1, axis2=2))
        s[s == 0] = 1.0
        F = Q * s[:, None, :]
    return F


def generic_flag(d: int, seed: int = 20240611) -> np.ndarray:
    """A fixed orthonormal basis in general position."""
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))
