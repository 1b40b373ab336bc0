"""Weight functionals, length tables, counting, entropy and the orbital pressure
intersection."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import groups as G
from .errors import EmptyWindow, HorizonExceeded, InsufficientData, NotLoxodromic
from .linalg import LOX_TOL, jordan_from_pair
from .reps import Representation

CHUNK = 200_000


class CertificationWarning(UserWarning):
    """Shell minima deviate from a linear trend; certified_T may be optimistic."""


@dataclass(frozen=True)
class WeightFunctional:
    """phi(x) = sum_i a_i (x_i - x_{i+1}) with a_i >= 0, not all zero."""

    coeffs: tuple
    name: str = "custom"

    def __post_init__(self):
        c = tuple(float(x) for x in self.coeffs)
        if not c:
            raise ValueError("need at least one root coefficient")
        if any(x < 0 or not math.isfinite(x) for x in c) or sum(c) <= 0:
            raise ValueError(f"coefficients {c} are not in the positive cone")
        object.__setattr__(self, "coeffs", c)

    @property
    def d(self) -> int:
        return len(self.coeffs) + 1

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.d:
            raise ValueError(f"expected vectors of length {self.d}")
        return np.diff(-x, axis=-1) @ np.array(self.coeffs)

    def weight_vector(self) -> np.ndarray:
        """w with phi(x) = w . x."""
        a = np.array(self.coeffs)
        w = np.zeros(self.d)
        w[:-1] += a
        w[1:] -= a
        return w

    def scaled(self, c: float) -> "WeightFunctional":
        return WeightFunctional(tuple(c * a for a in self.coeffs), f"{c:g}*{self.name}")


def omega1(d: int = 3) -> WeightFunctional:
    """x -> x_1 on the trace-zero plane."""
    return WeightFunctional(tuple((d - i) / d for i in range(1, d)), "omega1")


def alpha1(d: int = 3) -> WeightFunctional:
    return WeightFunctional((1.0,) + (0.0,) * (d - 2), "alpha1")


def omega_hilbert(d: int = 3) -> WeightFunctional:
    """x -> x_1 - x_d."""
    return WeightFunctional((1.0,) * (d - 1), "omegaH")


def functional(name: str, d: int = 3, coeffs=None) -> WeightFunctional:
    named = {"omega1": omega1, "alpha1": alpha1, "omegaH": omega_hilbert}
    if coeffs is not None:
        return WeightFunctional(tuple(coeffs), name or "custom")
    if name not in named:
        raise ValueError(f"unknown functional {name!r}; use one of {sorted(named)}")
    return named[name](d)


def phi_of(phi: WeightFunctional, x) -> float:
    return float(phi(np.asarray(x, dtype=float)))


# ---------------------------------------------------------------------------
# tables


@dataclass(eq=False)
class JordanTable:
    """Jordan projections of every conjugacy class up to a word length."""

    rep: Representation
    max_word_length: int
    word_length: np.ndarray
    peripheral: np.ndarray
    nu: np.ndarray  # (N, d); zero rows for peripheral classes

    def words(self):
        for L in range(1, self.max_word_length + 1):
            for c in G.class_codes(L):
                yield G.codes_to_word(c)

    def word(self, i: int) -> str:
        for L in range(1, self.max_word_length + 1):
            n = len(G.class_codes(L))
            if i < n:
                return G.codes_to_word(G.class_codes(L)[i])
            i -= n
        raise IndexError(i)


def jordan_table(rep: Representation, max_word_length: int) -> JordanTable:
    lengths, pers, nus = [], [], []
    for L in range(1, max_word_length + 1):
        codes = G.class_codes(L)
        per = G.peripheral_mask(rep.spec, codes)
        nu = np.zeros((len(codes), rep.d))
        idx = np.flatnonzero(~per)
        for s in range(0, len(idx), CHUNK):
            sel = idx[s : s + CHUNK]
            c = codes[sel]
            part, gap = jordan_from_pair(rep.batch(c), rep.batch_inverse(c))
            if gap.min() < LOX_TOL:
                bad = G.codes_to_word(c[int(np.argmin(gap))])
                raise NotLoxodromic(f"class {bad} is not loxodromic under {rep.label}")
            nu[sel] = part
        lengths.append(np.full(len(codes), L, dtype=np.int16))
        pers.append(per)
        nus.append(nu)
    return JordanTable(
        rep, max_word_length, np.concatenate(lengths), np.concatenate(pers), np.concatenate(nus)
    )


@dataclass(eq=False)
class LengthTable:
    jordan: JordanTable
    phi: WeightFunctional
    ell: np.ndarray
    certified_T: float
    shell_minima: np.ndarray
    warnings: list = field(default_factory=list)

    @property
    def rep(self) -> Representation:
        return self.jordan.rep

    @property
    def max_word_length(self) -> int:
        return self.jordan.max_word_length

    @property
    def word_length(self) -> np.ndarray:
        return self.jordan.word_length

    @property
    def peripheral(self) -> np.ndarray:
        return self.jordan.peripheral

    @property
    def systole(self) -> float:
        return float(self.ell[~self.peripheral].min())

    def hyperbolic_lengths(self) -> np.ndarray:
        return self.ell[~self.peripheral]

    def sorted_lengths(self) -> np.ndarray:
        if not hasattr(self, "_sorted"):
            self._sorted = np.sort(self.hyperbolic_lengths())
        return self._sorted

    def with_phi(self, phi: WeightFunctional) -> "LengthTable":
        return _make_table(self.jordan, phi)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class_word", "word_length", "peripheral", "ell_phi"])
        for word, L, p, e in zip(self.jordan.words(), self.word_length, self.peripheral, self.ell):
            w.writerow([word, int(L), int(bool(p)), f"{e:.12e}"])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


def _certify(ell, word_length, peripheral, max_len):
    minima = np.full(max_len, np.nan)
    for L in range(1, max_len + 1):
        sel = (word_length == L) & ~peripheral
        if sel.any():
            minima[L - 1] = ell[sel].min()
    last = minima[max(0, max_len - 3) :]
    last = last[np.isfinite(last)]
    T = 0.95 * float(last.min()) if last.size else 0.0
    notes = []
    Ls = np.arange(1, max_len + 1)
    ok = np.isfinite(minima)
    if ok.sum() >= 3:
        slope, icpt = np.polyfit(Ls[ok], minima[ok], 1)
        trend = slope * Ls[-3:] + icpt
        dev = np.abs(minima[-3:] - trend) / np.abs(trend)
        if np.any(dev > 0.25):
            notes.append(
                f"last shell minima {np.round(minima[-3:], 4).tolist()} deviate from the linear "
                f"trend by up to {100 * np.nanmax(dev):.0f}%"
            )
    return T, minima, notes


def _make_table(jt: JordanTable, phi: WeightFunctional) -> LengthTable:
    if phi.d != jt.rep.d:
        raise ValueError(f"functional is for d={phi.d}, representation has d={jt.rep.d}")
    ell = phi(jt.nu)
    ell[jt.peripheral] = 0.0
    T, minima, notes = _certify(ell, jt.word_length, jt.peripheral, jt.max_word_length)
    for n in notes:
        warnings.warn(n, CertificationWarning, stacklevel=3)
    return LengthTable(jt, phi, ell, T, minima, notes)


def build_length_table(rep: Representation, phi: WeightFunctional, max_word_length: int) -> LengthTable:
    return _make_table(jordan_table(rep, max_word_length), phi)


# ---------------------------------------------------------------------------
# counting and entropy


def _check_horizon(table: LengthTable, T: float) -> None:
    if T > table.certified_T * (1 + 1e-12):
        raise HorizonExceeded(f"T = {T:.6g} exceeds certified horizon {table.certified_T:.6g}")


def count_RT(table: LengthTable, T: float) -> int:
    _check_horizon(table, T)
    return int(np.searchsorted(table.sorted_lengths(), T, side="right"))


def count_grid(table: LengthTable, Ts) -> np.ndarray:
    Ts = np.asarray(Ts, dtype=float)
    if Ts.size:
        _check_horizon(table, float(Ts.max()))
    return np.searchsorted(table.sorted_lengths(), Ts, side="right")


def entropy_grid(table: LengthTable, window=None, step=None) -> np.ndarray:
    """Fit grid: top half of [0, certified_T] with step systole/2, shrunk when
    needed so that at least five points fit.  Anchored at the top."""
    lo, hi = window if window is not None else (0.5 * table.certified_T, table.certified_T)
    if step is None:
        step = min(0.5 * table.systole, (hi - lo) / 4)
    if step <= 0:
        raise InsufficientData("empty fit window")
    k = int(math.floor((hi - lo) / step + 1e-9))
    return hi - step * np.arange(k, -1, -1)


@dataclass
class EntropyFit:
    h: float
    intercept: float
    residual_rms: float
    endpoint_sensitivity: float
    plain_slope: float
    grid: np.ndarray
    counts: np.ndarray

    def as_dict(self) -> dict:
        return {
            "h_estimate": self.h,
            "intercept": self.intercept,
            "residual_rms": self.residual_rms,
            "endpoint_sensitivity": self.endpoint_sensitivity,
            "plain_log_count_slope": self.plain_slope,
            "n_points": int(len(self.grid)),
            "window": [float(self.grid[0]), float(self.grid[-1])],
        }


def entropy_counting(table: LengthTable, window=None, step=None) -> EntropyFit:
    """Slope of log #R_T + log T against T over the fit grid."""
    grid = entropy_grid(table, window, step)
    counts = count_grid(table, grid)
    keep = counts > 0
    grid, counts = grid[keep], counts[keep]
    if len(grid) < 5:
        raise InsufficientData(f"only {len(grid)} usable grid points (need 5)")
    y = np.log(counts) + np.log(grid)
    A = np.column_stack([grid, np.ones_like(grid)])
    (h, c), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ np.array([h, c])
    sens = max(
        abs(np.polyfit(grid[1:], y[1:], 1)[0] - h),
        abs(np.polyfit(grid[:-1], y[:-1], 1)[0] - h),
    )
    plain = np.polyfit(grid, np.log(counts), 1)[0]
    return EntropyFit(float(h), float(c), float(np.sqrt(np.mean(resid**2))), float(sens), float(plain), grid, counts)


def refined_ratio(table: LengthTable, h: float, T: float) -> float:
    """h T #R_T / e^(h T)."""
    n = count_RT(table, T)
    if h == 0:
        return 0.0
    return float(h * T * n * math.exp(-h * T))


# ---------------------------------------------------------------------------
# intersection


def _same_classes(a: LengthTable, b: LengthTable) -> None:
    if a.max_word_length != b.max_word_length or a.rep.spec.kind != b.rep.spec.kind:
        raise ValueError("tables are not over the same class list")


def intersection_orbital(table_rho: LengthTable, table_eta: LengthTable, T: float) -> float:
    """Average of l_eta / l_rho over non-peripheral classes with l_rho <= T."""
    _same_classes(table_rho, table_eta)
    _check_horizon(table_rho, T)
    _check_horizon(table_eta, T)
    sel = ~table_rho.peripheral & (table_rho.ell <= T)
    n = int(sel.sum())
    if n == 0:
        raise EmptyWindow(f"no classes with length <= {T:.6g}")
    return math.fsum(table_eta.ell[sel] / table_rho.ell[sel]) / n


def intersection_weighted(table_rho: LengthTable, table_eta: LengthTable, T: float) -> float:
    """Sum of l_eta over sum of l_rho on the same window (a lower-variance
    companion of the orbital average, reported as a diagnostic)."""
    _same_classes(table_rho, table_eta)
    _check_horizon(table_rho, T)
    sel = ~table_rho.peripheral & (table_rho.ell <= T)
    if not sel.any():
        raise EmptyWindow(f"no classes with length <= {T:.6g}")
    return math.fsum(table_eta.ell[sel]) / math.fsum(table_rho.ell[sel])


@dataclass
class PositivityReport:
    margin: float
    worst_class: str
    per_length: dict

    @property
    def ok(self) -> bool:
        return self.margin > 0


def functional_positivity_check(rep: Representation, phi: WeightFunctional, depth: int) -> PositivityReport:
    """min over non-peripheral classes of phi(nu) / word length, up to ``depth``."""
    jt = jordan_table(rep, depth)
    vals = phi(jt.nu) / jt.word_length
    vals[jt.peripheral] = np.inf
    per = {
        L: float(vals[jt.word_length == L].min())
        for L in range(1, depth + 1)
        if np.isfinite(vals[jt.word_length == L]).any()
    }
    i = int(np.argmin(vals))
    return PositivityReport(float(vals[i]), jt.word(i), per)
