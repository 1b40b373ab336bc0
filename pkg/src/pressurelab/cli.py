"""Command-line front end: ``pressurelab <subcommand> --config FILE --out DIR``.

Every run writes ``manifest.json`` next to its artifacts.  Exit status is 0 on
success, 2 for an invalid configuration and 3 for a numerical failure (the
error class name is recorded in the manifest).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import config as C
from . import experiments as E
from . import groups as G
from . import lengths as Ln
from . import pressure_form as PF
from . import reps as R
from . import shift as S
from . import traces as Tr
from .errors import ConfigInvalid, PressureLabError

SUBCOMMANDS = (
    "enumerate",
    "lengths",
    "entropy",
    "intersect",
    "pressure-form",
    "trace-check",
    "validate",
    "hilbert-degeneracy",
)

TOLERANCES = {
    "loxodromy_gap": 1e-9,
    "richardson_disagreement": PF.RICHARDSON_TOL,
    "limit_noise_floor": Tr.NOISE_FLOOR,
    "certify_safety_factor": 0.95,
    "roof_horizon": S.DEFAULT_HORIZON,
}


# ---------------------------------------------------------------------------
# output helpers


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_default) + "\n"


def rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([f"{x:.12e}" if isinstance(x, float) else x for x in r])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# shared setup


def _settings(cfg: C.ExperimentConfig, auto_route: str = "orbital") -> PF.Settings:
    entropy = cfg.entropy
    if cfg.group != G.SCHOTTKY and entropy == "root":
        entropy = "counting"
    route = cfg.route
    if route == "auto":
        route = auto_route if cfg.group == G.SCHOTTKY else "orbital"
    return PF.Settings(max_word_length=cfg.max_word_length, route=route, entropy=entropy, n=cfg.n,
                       depth=cfg.depth, fd_step=cfg.fd_step)


def _velocities(cfg: C.ExperimentConfig, base: R.Representation, count: int) -> list[np.ndarray]:
    if cfg.velocities:
        return [np.asarray(V) for V in cfg.velocities[:count]]
    rng = cfg.rng()
    return [E.unit_direction(base, rng) for _ in range(count)]


def _family(cfg, base, V) -> R.RepFamily:
    return R.RepFamily(cfg.family_kind, base, V, cfg.family_radius)


def _eta(cfg, base) -> R.Representation:
    if cfg.eta == "same":
        return base
    (V,) = _velocities(cfg, base, 1)
    return R.family_eval(_family(cfg, base, V), [cfg.family_t])


# ---------------------------------------------------------------------------
# subcommands; each returns (summary dict, {filename: text})


def cmd_enumerate(cfg):
    spec = cfg.spec()
    rows, per_len = [], {}
    for c in G.enumerate_classes(spec, cfg.max_word_length):
        rows.append((c.rep, c.word_length, int(c.peripheral)))
        per_len[c.word_length] = per_len.get(c.word_length, 0) + 1
    summary = {"classes": len(rows), "per_length": {str(k): v for k, v in sorted(per_len.items())}}
    return summary, {"classes.csv": rows_csv(["class_word", "word_length", "peripheral"], rows)}


def cmd_lengths(cfg):
    phi = cfg.functional()
    rho = cfg.base()
    files = {}
    summary = {}
    for name, rep in (("rho", rho), ("eta", _eta(cfg, rho))):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            table = Ln.build_length_table(rep, phi, cfg.max_word_length)
        files[f"lengths_{name}.csv"] = table.to_csv()
        summary[name] = {"certified_T": table.certified_T, "systole": table.systole, "classes": int(len(table.ell)),
                         "warnings": [str(w.message) for w in caught]}
    return summary, files


def cmd_entropy(cfg):
    phi = cfg.functional()
    rho = cfg.base()
    table = Ln.build_length_table(rho, phi, cfg.max_word_length)
    fit = Ln.entropy_counting(table)
    summary = dict(fit.as_dict(), certified_T=table.certified_T)
    files = {"entropy_grid.csv": rows_csv(["T", "count"], [(float(t), int(c)) for t, c in zip(fit.grid, fit.counts)])}
    h_ratio = fit.h
    if cfg.group == G.SCHOTTKY:
        h_root = S.entropy_root(S.build_shift(rho.spec), rho, phi, max(cfg.n, 8))
        summary["h_root"] = h_root
        h_ratio = h_root
    series = E.refined_ratio_series(table, h_ratio)
    summary["refined_ratio_h"] = h_ratio
    files["refined_ratio.csv"] = rows_csv(["T", "ratio"], series)
    return summary, files


def cmd_intersect(cfg):
    phi = cfg.functional()
    rho = cfg.base()
    eta = _eta(cfg, rho)
    out = E.intersection_pair(rho, eta, phi, cfg.max_word_length, cfg.n if cfg.group == G.SCHOTTKY else None)
    return out, {"intersection.json": dump_json(out)}


def cmd_pressure_form(cfg):
    phi = cfg.functional()
    rho = cfg.base()
    settings = _settings(cfg)
    basis = _velocities(cfg, rho, cfg.gram_k)
    fam = _family(cfg, rho, np.zeros((2, rho.d, rho.d)) if cfg.family_kind != R.FUCHSIAN_LOCUS else np.zeros((2, 2, 2)))
    ev = PF.Evaluator(fam, settings)
    report = PF.gram_matrix(fam, basis, phi, evaluator=ev, project=True)
    samples = report.samples[: len(basis)]
    summary = {
        "smallest_eigenvalue": report.smallest_eigenvalue,
        "noise_floor": report.noise_floor,
        "eigenvalues": report.eigenvalues,
        "rank": report.rank,
        "diagonal": [s["value"] for s in samples],
    }
    files = {"gram.json": report.to_json() + "\n"}
    for i, s in enumerate(samples):
        files[f"sample_{i}.json"] = dump_json(s)
    return summary, files


def cmd_trace_check(cfg):
    rho = cfg.base()
    eta = _eta(cfg, rho)
    alpha, beta = cfg.alpha, cfg.beta
    reports = list(Tr.limit_trace_identity(eta, alpha, beta, cfg.n_max))
    if eta.d == 3:
        reports += Tr.hilbert_trace_identity(eta, alpha, beta, cfg.n_max)
    a2, b2 = (alpha, beta)
    if G.axes_intersect(rho.spec.matrix(a2), rho.spec.matrix(b2)):
        a2, b2 = E.DISJOINT_PAIR
    reports += Tr.s2e2_asymptotics(eta, a2, b2, cfg.n_max)
    trans = Tr.transversality_check(eta, a2, b2)
    targets = Tr.nonvanishing_targets(eta, a2, b2)
    files = {}
    rows = []
    for i, rep in enumerate(reports):
        files[f"limit_{i}.csv"] = rep.to_csv()
        rows.append({"name": rep.name, "rel_error": rep.final_error, "target": rep.target, "rate": rep.rate,
                     "monotone_tail": rep.monotone_tail()})
    summary = {
        "reports": rows,
        "max_rel_error": max(r["rel_error"] for r in rows),
        "min_target": min(targets.values()),
        "transversality_margin": trans.margin,
        "pairing_margin": trans.pairing_margin,
        "min_report_target": min(abs(r["target"]) for r in rows),
        "disjoint_pair": [a2, b2],
    }
    return summary, {"targets.json": dump_json(targets)} | files


def cmd_validate(cfg):
    rho = cfg.base()
    summary = {}
    for name, rep in (("rho", rho), ("eta", _eta(cfg, rho))):
        rep_ = R.hitchin_validate(rep, cfg.depth)
        summary[name] = dict(vars(rep_), ok=rep_.ok)
    return summary, {}


def cmd_hilbert(cfg):
    if cfg.d != 3:
        raise ConfigInvalid("hilbert-degeneracy needs d = 3")
    rho = cfg.base()
    # the slope route removes the finite-window bias that masks the
    # anti-self-dual degeneracy on the orbital route
    settings = _settings(cfg, auto_route="slope")
    out = E.hilbert_degeneracy(rho, cfg.rng(), settings)
    out["route"] = settings.route
    return out, {"hilbert_degeneracy.json": dump_json(out)}


HANDLERS = {
    "enumerate": cmd_enumerate,
    "lengths": cmd_lengths,
    "entropy": cmd_entropy,
    "intersect": cmd_intersect,
    "pressure-form": cmd_pressure_form,
    "trace-check": cmd_trace_check,
    "validate": cmd_validate,
    "hilbert-degeneracy": cmd_hilbert,
}


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pressurelab", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="key = value experiment file (defaults apply when omitted)")
    p.add_argument("--out", help="output directory (overrides the config's 'out')")
    p.add_argument("--threads", type=int, default=None, help="worker count, 0 = auto (recorded only)")
    p.add_argument("--seed", type=int, default=None, help="unsigned seed for random sampling")
    return p


def run(subcommand: str, config_path=None, out=None, threads=None, seed=None) -> int:
    manifest = {"subcommand": subcommand, "version": __version__, "tolerances": TOLERANCES}
    out_dir = Path(out or "out")
    try:
        cfg = C.load(config_path) if config_path else C.ExperimentConfig().validate()
        if seed is not None:
            cfg.seed = seed
        if threads is not None:
            cfg.threads = threads
        cfg.validate()
        out_dir = Path(out or cfg.out)
    except ConfigInvalid as exc:
        manifest.update(status="config_invalid", error="ConfigInvalid", message=str(exc))
        write_atomic(out_dir / "manifest.json", dump_json(manifest))
        print(f"config invalid: {exc}", file=sys.stderr)
        return 2

    manifest["config"] = cfg.as_dict()
    manifest["config_sha256"] = cfg.source_sha256
    manifest["horizons"] = {"max_word_length": cfg.max_word_length, "n": cfg.n, "n_max": cfg.n_max,
                            "depth": cfg.depth, "fd_step": cfg.fd_step}
    try:
        summary, files = HANDLERS[subcommand](cfg)
    except ConfigInvalid as exc:
        manifest.update(status="config_invalid", error="ConfigInvalid", message=str(exc))
        write_atomic(out_dir / "manifest.json", dump_json(manifest))
        return 2
    except (PressureLabError, ValueError, np.linalg.LinAlgError) as exc:
        manifest.update(status="numerical_failure", error=type(exc).__name__, message=str(exc))
        write_atomic(out_dir / "manifest.json", dump_json(manifest))
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    for name, text in sorted(files.items()):
        write_atomic(out_dir / name, text)
    manifest.update(status="ok", results=summary, artifacts=sorted(files))
    write_atomic(out_dir / "manifest.json", dump_json(manifest))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args.subcommand, args.config, args.out, args.threads, args.seed)


if __name__ == "__main__":
    sys.exit(main())
