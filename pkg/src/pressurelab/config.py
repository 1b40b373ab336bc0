"""Experiment configuration: flat ``key = value`` text with dotted keys."""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import groups as G
from . import lengths as Ln
from . import reps as R
from .errors import ConfigInvalid

_INT_KEYS = ("d", "max_word_length", "n", "n_max", "depth", "pairs", "gram.k", "threads")
_FLOAT_KEYS = ("group.lambda", "family.t", "fd_step", "family.radius")


def parse_text(text: str) -> dict[str, str]:
    """Flat mapping of dotted keys to raw string values."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not all(part.replace("_", "").isalnum() for part in key.split(".")):
            raise ConfigInvalid(f"line {lineno}: bad key {key!r}")
        if key in out:
            raise ConfigInvalid(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def parse_matrix(value: str, d: int) -> np.ndarray:
    try:
        x = np.array([float(s) for s in value.split(",")])
    except ValueError as exc:
        raise ConfigInvalid(f"bad matrix entry in {value!r}") from exc
    if x.size != d * d:
        raise ConfigInvalid(f"matrix needs {d * d} entries, got {x.size}")
    return x.reshape(d, d)


@dataclass
class ExperimentConfig:
    group: str = G.SCHOTTKY
    group_lambda: float = 3.0
    d: int = 3
    family_kind: str = R.GENERATOR_PERTURBATION
    velocities: list = field(default_factory=list)  # each (2, d, d)
    family_t: float = 0.05
    family_radius: float | None = None
    phi: str = "omega1"
    phi_coeffs: tuple | None = None
    max_word_length: int = 12
    n: int = 10
    n_max: int = 30
    depth: int = 5
    fd_step: float = 0.02
    route: str = "auto"  # orbital, slope, or per-subcommand default
    entropy: str = "root"
    pairs: int = 4
    gram_k: int = 4
    alpha: str = "a"
    beta: str = "baBB"  # axes disjoint from a's in both built-in groups
    eta: str = "deformed"  # or "same"
    out: str = "out"
    seed: int = 0
    threads: int = 0
    source_sha256: str = ""

    def validate(self) -> "ExperimentConfig":
        if self.group not in (G.SCHOTTKY, G.PUNCTURED_TORUS):
            raise ConfigInvalid(f"unknown group {self.group!r}")
        if self.family_kind not in R.FAMILY_KINDS:
            raise ConfigInvalid(f"unknown family kind {self.family_kind!r}")
        for name in ("d", "max_word_length", "n", "n_max", "depth", "pairs", "gram_k"):
            if getattr(self, name) < 1:
                raise ConfigInvalid(f"{name} must be positive")
        if self.d < 2:
            raise ConfigInvalid("d must be at least 2")
        if not self.fd_step > 0 or not self.group_lambda > 1:
            raise ConfigInvalid("fd_step must be positive and group.lambda > 1")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigInvalid("seed must be an unsigned 64-bit integer")
        if self.route not in ("auto", "orbital", "slope") or self.entropy not in ("root", "counting", "unit"):
            raise ConfigInvalid("route must be auto|orbital|slope, entropy root|counting|unit")
        if self.eta not in ("deformed", "same"):
            raise ConfigInvalid("eta must be 'deformed' or 'same'")
        for w in (self.alpha, self.beta):
            if not w or any(c not in G.LETTERS for c in w):
                raise ConfigInvalid(f"bad word {w!r}")
        for V in self.velocities:
            m = self.velocity_size()
            if V.shape != (2, m, m):
                raise ConfigInvalid(f"velocities must be {m} x {m} for this family kind")
            if np.abs(np.trace(V, axis1=1, axis2=2)).max() > 1e-10:
                raise ConfigInvalid("velocities must be trace-zero")
        try:
            self.functional()
        except ValueError as exc:
            raise ConfigInvalid(str(exc)) from exc
        return self

    def velocity_size(self) -> int:
        # the Fuchsian locus is parametrized by sl2 velocities of the base group
        return 2 if self.family_kind == R.FUCHSIAN_LOCUS else self.d

    def functional(self) -> Ln.WeightFunctional:
        return Ln.functional(self.phi, self.d, self.phi_coeffs)

    def spec(self) -> G.GroupSpec:
        if self.group == G.SCHOTTKY:
            return G.schottky_spec(self.group_lambda)
        return G.punctured_torus_spec()

    def base(self) -> R.Representation:
        return R.fuchsian_rep(self.spec(), self.d)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["velocities"] = [V.tolist() for V in self.velocities]
        return out


def from_mapping(raw: dict[str, str], sha: str = "") -> ExperimentConfig:
    cfg = ExperimentConfig(source_sha256=sha)
    known = set(_INT_KEYS) | set(_FLOAT_KEYS) | {
        "group", "family.kind", "phi", "phi.coeffs", "route", "entropy", "alpha", "beta", "eta", "out", "seed",
    }
    try:
        for key, value in raw.items():
            if key.startswith("family.v"):
                continue
            if key not in known:
                raise ConfigInvalid(f"unknown key {key!r}")
            attr = key.replace(".", "_")
            if key == "group":
                cfg.group = value
            elif key == "family.kind":
                cfg.family_kind = value
            elif key == "phi.coeffs":
                cfg.phi_coeffs = tuple(float(s) for s in value.split(","))
            elif key in _INT_KEYS:
                setattr(cfg, attr, int(value))
            elif key in _FLOAT_KEYS:
                setattr(cfg, attr, float(value))
            elif key == "seed":
                cfg.seed = int(value)
            else:
                setattr(cfg, attr, value)
    except ValueError as exc:
        raise ConfigInvalid(str(exc)) from exc

    # family.v1.a, family.v1.b, family.v2.a, ...
    idx = sorted({int(k.split(".")[1][1:]) for k in raw if k.startswith("family.v")
                  if k.split(".")[1][1:].isdigit()})
    for i in idx:
        try:
            a, b = raw[f"family.v{i}.a"], raw[f"family.v{i}.b"]
        except KeyError as exc:
            raise ConfigInvalid(f"family.v{i} needs both .a and .b") from exc
        m = cfg.velocity_size()
        cfg.velocities.append(np.stack([parse_matrix(a, m), parse_matrix(b, m)]))
    if len(idx) * 2 != sum(1 for k in raw if k.startswith("family.v")):
        raise ConfigInvalid("malformed family.v* keys")
    return cfg.validate()


def load(path) -> ExperimentConfig:
    try:
        data = Path(path).read_bytes()
        text = data.decode("utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigInvalid(f"cannot read config: {exc}") from exc
    return from_mapping(parse_text(text), hashlib.sha256(data).hexdigest())
