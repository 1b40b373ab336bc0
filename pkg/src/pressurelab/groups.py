"""Rank-2 free groups with a marked Fuchsian structure.

Words are strings over the alphabet ``a, A, b, B`` where capitals denote
inverses.  Internally letters are coded as small integers

    a -> 0, A -> 1, b -> 2, B -> 3

so that the inverse of a code ``c`` is ``c ^ 1`` and integer order agrees with
the letter order ``a < A < b < B`` used to pick canonical cyclic rotations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationFailed

LETTERS = "aAbB"
CODE = {ch: i for i, ch in enumerate(LETTERS)}
INVERSE_CODE = np.array([1, 0, 3, 2])
# successor letters allowed after each letter in a freely reduced word
_NEXT = np.array([[c for c in range(4) if c != INVERSE_CODE[x]] for x in range(4)])

SCHOTTKY = "schottky"
PUNCTURED_TORUS = "punctured_torus"
COMMUTATOR = "abAB"


# ---------------------------------------------------------------------------
# words


def inverse_letter(ch: str) -> str:
    return ch.swapcase()


def reduce_word(w: str) -> str:
    """Freely reduce ``w``."""
    out: list[str] = []
    for ch in w:
        if ch not in CODE:
            raise ValueError(f"invalid letter {ch!r} in word {w!r}")
        if out and out[-1] == ch.swapcase():
            out.pop()
        else:
            out.append(ch)
    return "".join(out)


def inverse_word(w: str) -> str:
    return "".join(ch.swapcase() for ch in reversed(w))


def multiply(*words: str) -> str:
    return reduce_word("".join(words))


def power(w: str, k: int) -> str:
    if k < 0:
        return reduce_word(inverse_word(w) * (-k))
    return reduce_word(w * k)


def cyclic_reduce(w: str) -> str:
    w = reduce_word(w)
    i, j = 0, len(w) - 1
    while i < j and w[i] == w[j].swapcase():
        i += 1
        j -= 1
    return w[i : j + 1]


def word_to_codes(w: str) -> np.ndarray:
    return np.array([CODE[ch] for ch in w], dtype=np.int8)


def codes_to_word(codes: Iterable[int]) -> str:
    return "".join(LETTERS[int(c)] for c in codes)


def _min_rotation(w: str) -> str:
    if not w:
        return w
    keyed = [tuple(CODE[ch] for ch in w[i:] + w[:i]) for i in range(len(w))]
    best = min(range(len(w)), key=lambda i: keyed[i])
    return w[best:] + w[:best]


def rotations(w: str) -> list[str]:
    return [w[i:] + w[:i] for i in range(len(w))] or [w]


def primitive_period(w: str) -> int:
    """Smallest p with w invariant under rotation by p (number of distinct rotations)."""
    n = len(w)
    for p in range(1, n + 1):
        if n % p == 0 and w[p:] + w[:p] == w:
            return p
    return max(n, 1)


@dataclass(frozen=True)
class ConjClass:
    rep: str
    word_length: int
    peripheral: bool = False

    def __str__(self) -> str:
        return self.rep or "1"


def conj_class(w: str, spec: "GroupSpec | None" = None) -> ConjClass:
    """Canonical conjugacy class of ``w``: cyclically reduced, minimal rotation."""
    rep = _min_rotation(cyclic_reduce(w))
    peripheral = spec is not None and is_peripheral(spec, rep)
    return ConjClass(rep, len(rep), peripheral)


def are_conjugate(u: str, w: str) -> bool:
    return conj_class(u).rep == conj_class(w).rep


# ---------------------------------------------------------------------------
# enumeration


def _extend(words: np.ndarray, steps: int) -> np.ndarray:
    for _ in range(steps):
        ext = _NEXT[words[:, -1]]
        words = np.concatenate(
            [np.repeat(words, 3, axis=0), ext.reshape(-1, 1)], axis=1
        ).astype(np.int8)
    return words


def _canonical_only(words: np.ndarray) -> np.ndarray:
    L = words.shape[1]
    words = words[words[:, -1] != INVERSE_CODE[words[:, 0]]]
    keys = np.zeros(len(words), dtype=np.int64)
    for i in range(L):
        keys = keys * 4 + words[:, i]
    top = 4 ** (L - 1)
    rolled = keys.copy()
    keep = np.ones(len(words), dtype=bool)
    for _ in range(1, L):
        rolled = (rolled % top) * 4 + rolled // top
        keep &= keys <= rolled
    return words[keep]


@lru_cache(maxsize=None)
def class_codes(length: int) -> np.ndarray:
    """Canonical representatives of all conjugacy classes of cyclically reduced
    length ``length``, as an ``(N, length)`` int8 array in lexicographic order."""
    if length < 1:
        raise ValueError("length must be >= 1")
    seeds = np.arange(4, dtype=np.int8).reshape(4, 1)
    prefix = 5
    if length <= prefix + 2:
        out = _canonical_only(_extend(seeds, length - 1))
    else:
        heads = _extend(seeds, prefix - 1)
        out = np.concatenate(
            [_canonical_only(_extend(h[None, :], length - prefix)) for h in heads]
        )
    out.setflags(write=False)
    return out


def rotation_counts(codes: np.ndarray) -> np.ndarray:
    """Number of distinct cyclic rotations of each row (the orbit size in Fix^n)."""
    N, L = codes.shape
    keys = np.zeros(N, dtype=np.int64)
    for i in range(L):
        keys = keys * 4 + codes[:, i]
    top = 4 ** (L - 1)
    rolled = keys.copy()
    period = np.full(N, L, dtype=np.int64)
    for r in range(1, L):
        rolled = (rolled % top) * 4 + rolled // top
        hit = (rolled == keys) & (period == L)
        period[hit] = r
    return period


def peripheral_mask(spec: "GroupSpec", codes: np.ndarray) -> np.ndarray:
    N, L = codes.shape
    if spec.kind != PUNCTURED_TORUS or L % 4:
        return np.zeros(N, dtype=bool)
    patterns = [np.tile(word_to_codes(p), L // 4) for p in ("abAB", "aBAb")]
    return np.any([np.all(codes == p, axis=1) for p in patterns], axis=0)


def enumerate_classes(spec: "GroupSpec", max_word_length: int) -> list[ConjClass]:
    """One representative per conjugacy class of cyclic word length <= max_word_length.

    Peripheral classes are flagged, not omitted.  Inverse classes are kept
    distinct.
    """
    if max_word_length < 1:
        raise ValueError("max_word_length must be >= 1")
    out = []
    for L in range(1, max_word_length + 1):
        codes = class_codes(L)
        per = peripheral_mask(spec, codes)
        out.extend(
            ConjClass(codes_to_word(c), L, bool(p)) for c, p in zip(codes, per)
        )
    return out


def is_peripheral(spec: "GroupSpec", c: "ConjClass | str") -> bool:
    """True iff the cyclic word is a rotation of [a,b]^k or [b,a]^k, k >= 1."""
    if spec.kind != PUNCTURED_TORUS:
        return False
    w = cyclic_reduce(c.rep if isinstance(c, ConjClass) else c)
    if not w or len(w) % 4:
        return False
    k = len(w) // 4
    return any(w in rotations(p * k) for p in ("abAB", "baBA"))


# ---------------------------------------------------------------------------
# automorphisms


@dataclass(frozen=True)
class Automorphism:
    """Endomorphism of the free group given by the images of ``a`` and ``b``."""

    image_a: str
    image_b: str
    name: str = ""

    def __call__(self, w: str) -> str:
        return apply_automorphism(self, w)

    def compose(self, other: "Automorphism") -> "Automorphism":
        """``self o other``."""
        return Automorphism(
            self(other.image_a), self(other.image_b), f"{self.name}*{other.name}"
        )


def transvection(k: int = 1) -> Automorphism:
    """The Nielsen map a -> a b^k, b -> b (k = -1 is the inverse of k = 1)."""
    return Automorphism(multiply("a", power("b", k)), "b", f"a->ab^{k}")


def inner(g: str) -> Automorphism:
    gi = inverse_word(g)
    return Automorphism(multiply(g, "a", gi), multiply(g, "b", gi), f"conj({g})")


NIELSEN = transvection(1)


def apply_automorphism(auto: Automorphism, w: str) -> str:
    images = {
        "a": auto.image_a,
        "b": auto.image_b,
        "A": inverse_word(auto.image_a),
        "B": inverse_word(auto.image_b),
    }
    return reduce_word("".join(images[ch] for ch in w))


# ---------------------------------------------------------------------------
# base Fuchsian groups


@dataclass(frozen=True)
class GroupSpec:
    kind: str
    base_generators: tuple[np.ndarray, np.ndarray] = field(repr=False)
    peripheral_word: str | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in (SCHOTTKY, PUNCTURED_TORUS):
            raise ValueError(f"unknown group kind {self.kind!r}")

    def matrix(self, w: str) -> np.ndarray:
        return word_matrix(self.base_generators, w)


def word_matrix(gens: Sequence[np.ndarray], w: str) -> np.ndarray:
    """Evaluate a word on generator images ``gens = (image of a, image of b)``."""
    a, b = (np.asarray(g, dtype=float) for g in gens)
    table = {"a": a, "A": np.linalg.inv(a), "b": b, "B": np.linalg.inv(b)}
    out = np.eye(a.shape[0])
    for ch in w:
        out = out @ table[ch]
    return out


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def schottky_spec(lam: float = 3.0) -> GroupSpec:
    """X = diag(lam, 1/lam) and Y its conjugate by the hyperbolic rotation of
    angle pi/2 about i (matrix angle pi/4)."""
    X = np.diag([lam, 1.0 / lam])
    R = rotation_matrix(np.pi / 4)
    Y = R @ X @ R.T
    return GroupSpec(SCHOTTKY, (X, Y), None, f"schottky(lambda={lam:g})")


def punctured_torus_spec() -> GroupSpec:
    a = np.array([[1.0, 1.0], [1.0, 2.0]])
    b = np.array([[1.0, -1.0], [-1.0, 2.0]])
    return GroupSpec(PUNCTURED_TORUS, (a, b), COMMUTATOR, "modular punctured torus")


def make_spec(kind: str, generators=None, lam: float = 3.0) -> GroupSpec:
    if generators is None:
        return schottky_spec(lam) if kind == SCHOTTKY else punctured_torus_spec()
    a, b = (np.asarray(g, dtype=float).reshape(2, 2) for g in generators)
    return GroupSpec(
        kind, (a, b), COMMUTATOR if kind == PUNCTURED_TORUS else None, "custom"
    )


_CAYLEY = np.array([[1.0, -1.0j], [1.0, 1.0j]])


def to_disk(g: np.ndarray) -> np.ndarray:
    """Conjugate a PSL(2,R) matrix into SU(1,1) acting on the unit disk."""
    return _CAYLEY @ g @ np.linalg.inv(_CAYLEY)


def isometric_circle(g: np.ndarray) -> tuple[complex, float]:
    """Center and radius of the isometric circle of ``g`` in the disk model."""
    p, q, r, s = to_disk(g).ravel()
    if abs(r) < 1e-14:
        raise ValidationFailed("generator fixes the disk center; no isometric circle")
    return -s / r, 1.0 / abs(r)


def fixed_points(g: np.ndarray) -> tuple[float, float]:
    """Attracting and repelling fixed points of a hyperbolic g, as boundary
    angles in the disk model, in [0, 2 pi)."""
    a, b, c, d = np.asarray(g, dtype=float).ravel()
    tr = a + d
    if abs(tr) <= 2.0:
        raise ValidationFailed(f"element with trace {tr:.6g} is not hyperbolic")
    vals, vecs = np.linalg.eig(np.asarray(g, dtype=float))
    order = np.argsort(-np.abs(vals))
    pts = []
    for i in order:
        x, y = vecs[:, i].real
        z = complex(np.inf) if abs(y) < 1e-300 else complex(x / y)
        w = 1.0 if np.isinf(z.real) else (z - 1j) / (z + 1j)
        pts.append(float(np.angle(w)) % (2 * np.pi))
    return pts[0], pts[1]


def axes_intersect(g: np.ndarray, h: np.ndarray) -> bool:
    """Whether the axes of two hyperbolic elements cross in the hyperbolic plane
    (their fixed-point pairs link on the circle)."""
    p, q = fixed_points(g)
    r, s = fixed_points(h)
    if len({round(x, 12) for x in (p, q, r, s)}) < 4:
        return True  # shared endpoint or identical axis: not disjoint
    lo, hi = sorted((p, q))
    return (lo < r < hi) != (lo < s < hi)


@dataclass
class FuchsianReport:
    kind: str
    ok: bool
    checks: dict

    def __bool__(self) -> bool:
        return self.ok


def base_fuchsian(spec: GroupSpec, depth: int = 6):
    """Validate the base generators and return ``(generators, report)``.

    Schottky: the four isometric circles are pairwise disjoint (ping-pong) and
    every class up to ``depth`` is hyperbolic.  Punctured torus: the commutator
    has trace -2 and every non-peripheral class up to ``depth`` is hyperbolic.
    """
    a, b = spec.base_generators
    checks: dict = {}
    for name, g in (("a", a), ("b", b)):
        if abs(np.linalg.det(g) - 1.0) > 1e-10:
            raise ValidationFailed(f"generator {name} is not unimodular")
    if spec.kind == SCHOTTKY:
        disks = [isometric_circle(g) for g in (a, np.linalg.inv(a), b, np.linalg.inv(b))]
        margin = min(
            abs(c1 - c2) - r1 - r2
            for i, (c1, r1) in enumerate(disks)
            for (c2, r2) in disks[i + 1 :]
        )
        checks["pingpong_margin"] = float(margin)
        if not margin > 1e-9:
            raise ValidationFailed(f"ping-pong fails (margin {margin:.3g})")
    else:
        tr = float(np.trace(word_matrix((a, b), COMMUTATOR)))
        checks["commutator_trace"] = tr
        if abs(tr + 2.0) > 1e-9:
            raise ValidationFailed(f"commutator trace {tr} != -2")
    worst = np.inf
    for L in range(1, depth + 1):
        codes = class_codes(L)
        per = peripheral_mask(spec, codes)
        mats = batch_words(np.stack([a, np.linalg.inv(a), b, np.linalg.inv(b)]), codes)
        tr = np.abs(np.trace(mats, axis1=1, axis2=2))[~per]
        if tr.size:
            worst = min(worst, float(tr.min()))
    checks["min_abs_trace"] = worst
    if not worst > 2.0 + 1e-12:
        raise ValidationFailed(f"non-hyperbolic class found (|trace| = {worst})")
    return (a.copy(), b.copy()), FuchsianReport(spec.kind, True, checks)


def batch_words(letter_mats: np.ndarray, codes: np.ndarray) -> np.ndarray:
    """Products of letter matrices for each row of ``codes``.

    ``letter_mats`` is a stack of four matrices in code order (a, A, b, B).
    """
    N, L = codes.shape
    d = letter_mats.shape[-1]
    out = np.broadcast_to(np.eye(d), (N, d, d)).copy()
    for i in range(L):
        out = out @ letter_mats[codes[:, i]]
    return out
