"""No-backtracking Markov coding of a Schottky group: periodic orbits, roof
functions, periodic-orbit pressure, entropy as a pressure root and the
tangent slope of the zero-pressure curve."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from . import groups as G
from .errors import BracketFailed, NotLoxodromic, UnsupportedGroup
from .lengths import WeightFunctional
from .linalg import LOX_TOL, generic_flag, iwasawa_cocycle, jordan_from_pair, qr_product_flag, Flag
from .reps import Representation

DEFAULT_HORIZON = 40


@dataclass(frozen=True)
class ShiftSystem:
    alphabet: str
    transitions: np.ndarray
    symbol_words: tuple  # G: symbol -> group word

    def transfer_power_trace(self, n: int) -> int:
        # exact integer arithmetic; counts overflow int64 beyond n ~ 39
        return int(np.trace(np.linalg.matrix_power(self.transitions.astype(object), n)))

    def is_mixing(self) -> bool:
        T = self.transitions.astype(np.int64)
        P = np.eye(len(T), dtype=np.int64)
        for _ in range(len(T) ** 2):
            P = np.minimum(P @ T, 1)
            if P.min() > 0:
                return True
        return False


def build_shift(spec: G.GroupSpec) -> ShiftSystem:
    if spec.kind != G.SCHOTTKY:
        raise UnsupportedGroup("only Schottky groups have a finite coding here")
    T = np.ones((4, 4), dtype=np.int8)
    for x in range(4):
        T[x, G.INVERSE_CODE[x]] = 0
    T.setflags(write=False)
    return ShiftSystem(G.LETTERS, T, tuple(G.LETTERS))


@dataclass(frozen=True)
class PeriodicOrbit:
    word: str

    @property
    def n(self) -> int:
        return len(self.word)

    def element(self, shift: ShiftSystem) -> str:
        return "".join(shift.symbol_words[shift.alphabet.index(c)] for c in self.word)


def fix_codes(shift: ShiftSystem, n: int) -> np.ndarray:
    """All admissible period-n words (rows), i.e. the whole of Fix^n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    T = shift.transitions.astype(bool)
    words = np.arange(len(T), dtype=np.int8).reshape(-1, 1)
    for _ in range(n - 1):
        nxt = [np.flatnonzero(T[s]) for s in range(len(T))]
        reps = np.array([len(x) for x in nxt])[words[:, -1]]
        ext = np.concatenate([nxt[s] for s in words[:, -1]])
        words = np.concatenate([np.repeat(words, reps, axis=0), ext[:, None]], axis=1).astype(np.int8)
    return words[T[words[:, -1], words[:, 0]]]


def periodic_orbits(shift: ShiftSystem, n: int) -> list[PeriodicOrbit]:
    return [PeriodicOrbit(G.codes_to_word(c)) for c in fix_codes(shift, n)]


# ---------------------------------------------------------------------------
# orbit data: one row per rotation class, weighted by its number of rotations


@dataclass(eq=False)
class OrbitData:
    n: int
    codes: np.ndarray
    multiplicity: np.ndarray
    nu: np.ndarray


def orbit_data(rep: Representation, n: int) -> OrbitData:
    codes = G.class_codes(n)
    mult = G.rotation_counts(codes)
    nu = np.empty((len(codes), rep.d))
    for s in range(0, len(codes), 200_000):
        c = codes[s : s + 200_000]
        part, gap = jordan_from_pair(rep.batch(c), rep.batch_inverse(c))
        if gap.min() < LOX_TOL:
            raise NotLoxodromic(f"orbit {G.codes_to_word(c[int(np.argmin(gap))])} is not loxodromic")
        nu[s : s + 200_000] = part
    return OrbitData(n, codes, mult, nu)


def roof_sum(rep: Representation, phi: WeightFunctional, orbit: PeriodicOrbit | str) -> float:
    """Ergodic sum of the roof over a periodic orbit: the phi-length of its element."""
    word = orbit.word if isinstance(orbit, PeriodicOrbit) else orbit
    codes = G.word_to_codes(word)[None, :]
    nu, gap = jordan_from_pair(rep.batch(codes), rep.batch_inverse(codes))
    if gap[0] < LOX_TOL:
        raise NotLoxodromic(f"orbit {word} is not loxodromic")
    return float(phi(nu[0]))


# ---------------------------------------------------------------------------
# pointwise roof via the Iwasawa cocycle


def roof_batch(rep: Representation, codes: np.ndarray, horizon: int = DEFAULT_HORIZON, seed_flag=None) -> np.ndarray:
    """Vector roof tau(sigma^i x) for every row x (extended periodically) and
    every shift i in 0..len(x)-1.  Returns an array of shape (N, L, d).

    The boundary flag of sigma^(i+1) x is approximated by
    rho(x_{i+2}) ... rho(x_{i+1+horizon}) applied to a generic flag.
    """
    N, L = codes.shape
    d = rep.d
    F0 = generic_flag(d) if seed_flag is None else seed_flag
    reps_needed = (horizon + L + 1) // L + 2
    ext = np.tile(codes, (1, reps_needed))
    out = np.empty((N, L, d))
    for i in range(L):
        tail = ext[:, i + 1 : i + 1 + horizon]
        K = qr_product_flag(rep.letters, tail, F0)
        A = rep.letters[codes[:, i]]
        R = np.linalg.qr(A @ K, mode="r")
        out[:, i] = np.log(np.abs(np.diagonal(R, axis1=1, axis2=2)))
    return out


def roof_pointwise(rep: Representation, x: str, horizon: int = DEFAULT_HORIZON) -> np.ndarray:
    """tau(x) for a symbol word x; x is extended periodically when shorter
    than horizon + 1."""
    if not x:
        raise ValueError("need a nonempty word")
    codes = G.word_to_codes(x)
    for i in range(len(codes)):
        if codes[(i + 1) % len(codes)] == G.INVERSE_CODE[codes[i]] and (i + 1 < len(codes) or len(codes) > 1):
            raise ValueError(f"word {x} is not admissible (cyclically)")
    return roof_batch(rep, codes[None, :], horizon)[0, 0]


def ergodic_sums(rep: Representation, codes: np.ndarray, horizon: int = DEFAULT_HORIZON) -> np.ndarray:
    """Sum of the vector roof over one period of each periodic row."""
    return roof_batch(rep, codes, horizon).sum(axis=1)


# ---------------------------------------------------------------------------
# pressure


def pressure_periodic(shift: ShiftSystem, weights, n: int) -> float:
    """P_n = (1/n) log sum over Fix^n of exp(S_n g).

    ``weights`` is either a callable mapping an (N, n) code array of Fix^n
    words to their ergodic sums, or an array of ergodic sums aligned with
    ``fix_codes(shift, n)``.
    """
    if callable(weights):
        S = np.asarray(weights(fix_codes(shift, n)), dtype=float)
    else:
        S = np.asarray(weights, dtype=float)
        if S.ndim == 0:
            # the same ergodic sum on every orbit
            return (math.log(shift.transfer_power_trace(n)) + float(S)) / n
    return float(logsumexp(S)) / n


def pressure_classes(values: np.ndarray, multiplicity: np.ndarray, n: int) -> float:
    """P_n computed over rotation classes, each weighted by its orbit size."""
    return float(logsumexp(values, b=multiplicity)) / n


def pressure_of(data: OrbitData, lengths: np.ndarray, h: float) -> float:
    return pressure_classes(-h * lengths, data.multiplicity, data.n)


def entropy_root(shift: ShiftSystem, rep: Representation, phi: WeightFunctional, n: int, data: OrbitData | None = None) -> float:
    """h with P_n(-h tau^phi) = 0."""
    if n < 8:
        raise ValueError("entropy_root needs n >= 8")
    data = data if data is not None else orbit_data(rep, n)
    ell = phi(data.nu)
    return _root(lambda h: pressure_of(data, ell, h))


def _root(f, hi: float = 1.0) -> float:
    if not f(0.0) > 0:
        raise BracketFailed("pressure at zero is not positive")
    for _ in range(60):
        if f(hi) < 0:
            break
        hi *= 2
    else:
        raise BracketFailed("could not bracket the pressure root")
    return float(brentq(f, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))


@dataclass
class SlopeResult:
    I: float
    I_gibbs: float
    h: float
    eps: float
    n: int
    samples: list = field(default_factory=list)  # (a, b, n, residual)
    z1_log_bound: float | None = None

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["a", "b", "n", "residual"])
        for a, b, n, r in self.samples:
            w.writerow([f"{a:.12e}", f"{b:.12e}", n, f"{r:.12e}"])
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(buf.getvalue())
        return buf.getvalue()


def pressure_curve(shift: ShiftSystem, rep_rho: Representation, rep_eta: Representation, phi: WeightFunctional, n: int,
                   data_rho: OrbitData | None = None, data_eta: OrbitData | None = None) -> SlopeResult:
    """Points (a, b) on the zero set of P_n(-a tau_rho - b tau_eta) for
    b in {0, eps, 2 eps}, eps = h_rho / 50, and the tangent slope there."""
    data_rho = data_rho if data_rho is not None else orbit_data(rep_rho, n)
    data_eta = data_eta if data_eta is not None else orbit_data(rep_eta, n)
    lr, le = phi(data_rho.nu), phi(data_eta.nu)
    h = _root(lambda a: pressure_of(data_rho, lr, a))
    eps = h / 50
    samples, a_vals = [], []
    for b in (0.0, eps, 2 * eps):
        f = lambda a: pressure_classes(-a * lr - b * le, data_rho.multiplicity, n)
        a = h if b == 0 else _root(f)
        a_vals.append(a)
        samples.append((a, b, n, f(a)))
    a0, a1, a2 = a_vals
    slope = (-3 * a0 + 4 * a1 - a2) / (2 * eps)
    w = data_rho.multiplicity * np.exp(-h * lr - logsumexp(-h * lr, b=data_rho.multiplicity))
    I_gibbs = math.fsum(w * le) / math.fsum(w * lr)
    return SlopeResult(-slope, I_gibbs, h, eps, n, samples)


def pressure_curve_slope(shift, rep_rho, rep_eta, phi, n) -> float:
    return pressure_curve(shift, rep_rho, rep_eta, phi, n).I


def z1_log_bound(shift: ShiftSystem, rep: Representation, phi: WeightFunctional, h: float,
                 sample_period: int = 6, horizon: int = DEFAULT_HORIZON) -> float:
    """First-level bound log sum_s exp(sup over [s] of -h phi(tau)), the sup
    estimated over periodic points of period <= sample_period."""
    best = np.full(len(shift.alphabet), -np.inf)
    for n in range(1, sample_period + 1):
        codes = fix_codes(shift, n)
        g = -h * phi(roof_batch(rep, codes, horizon)[:, 0])
        for s in range(len(best)):
            sel = codes[:, 0] == s
            if sel.any():
                best[s] = max(best[s], g[sel].max())
    return float(logsumexp(best))
