"""End-to-end experiments shared by the command line and the acceptance suite."""

from __future__ import annotations

import math

import numpy as np

from . import groups as G
from . import lengths as Ln
from . import pressure_form as PF
from . import reps as R
from . import shift as S

# pair used by the trace identities; the S^2/E^2 and transversality checks need
# disjoint axes, which no short cyclically reduced word has against a here
TRACE_PAIR = ("a", "b")
DISJOINT_PAIR = ("a", "baBB")


def unit_direction(rep: R.Representation, rng: np.random.Generator, project: bool = True) -> np.ndarray:
    V = R.random_velocity(rep.d, rng)
    if project:
        V = R.project_out_conjugation(rep, V)
    return V / np.linalg.norm(V)


def zero_family(base: R.Representation, kind: str = R.GENERATOR_PERTURBATION) -> R.RepFamily:
    """A one-parameter family whose lines are chosen per direction."""
    return R.RepFamily(kind, base, np.zeros((2, base.d, base.d)))


def sample_pairs(base: R.Representation, count: int, t: float, rng: np.random.Generator):
    """``count`` deformations eta = exp(t V) rho along random unit directions."""
    out = []
    for _ in range(count):
        V = unit_direction(base, rng)
        out.append((V, R.family_eval(R.RepFamily(R.GENERATOR_PERTURBATION, base, V), [t])))
    return out


def split_direction(base: R.Representation, V, Q=None):
    """Self-dual and anti-self-dual parts of V at a self-dual base, with the
    conjugation directions projected out, each scaled to unit norm."""
    Q = R.invariant_form(base) if Q is None else Q
    V = R.project_out_conjugation(base, V)
    sd = R.project_out_conjugation(base, R.self_dual_part(V, Q))
    asd = R.project_out_conjugation(base, R.anti_self_dual_part(V, Q))
    return sd / np.linalg.norm(sd), asd / np.linalg.norm(asd)


def hilbert_degeneracy(base: R.Representation, rng: np.random.Generator, settings: PF.Settings,
                       classes=None, n_generic: int = 3, offset: float = 0.1) -> dict:
    """The omega_H dichotomy: degenerate along anti-self-dual directions at a
    Fuchsian base, nondegenerate along every sampled direction elsewhere."""
    wh = Ln.omega_hilbert(base.d)
    classes = classes or sample_classes(20, base.spec)
    Q = R.invariant_form(base)
    sd, asd = split_direction(base, R.random_velocity(base.d, rng), Q)
    fam = zero_family(base)
    ev = PF.Evaluator(fam, settings)
    p_sd = PF.hessian_J(fam, sd, wh, evaluator=ev, check_noise=False)
    p_asd = PF.hessian_J(fam, asd, wh, evaluator=ev, check_noise=False)
    d_sd = PF.degeneracy_check(fam, sd, wh, classes, evaluator=ev)
    d_asd = PF.degeneracy_check(fam, asd, wh, classes, evaluator=ev)
    gram = PF.gram_matrix(fam, [sd, asd], wh, evaluator=ev, project=False)
    null = gram.smallest_eigenvector[0] * sd + gram.smallest_eigenvector[1] * asd
    angle = R.frobenius_angle(null, asd)
    K = PF.log_type_K(fam, asd, PF.exp_length(wh), classes, evaluator=ev)
    dh, h0 = PF.entropy_derivative(fam, asd, wh, evaluator=ev)

    # a validated non-Fuchsian base and a handful of directions there
    W = unit_direction(base, rng)
    other = R.family_eval(R.RepFamily(R.GENERATOR_PERTURBATION, base, W), [offset])
    other_report = R.hitchin_validate(other, settings.depth)
    fam2 = zero_family(other)
    ev2 = PF.Evaluator(fam2, settings)
    dirs = [R.project_out_conjugation(other, v) for v in (sd, asd)]
    dirs += [unit_direction(other, rng) for _ in range(n_generic)]
    rows = []
    for V in dirs:
        V = V / np.linalg.norm(V)
        smp = PF.hessian_J(fam2, V, wh, evaluator=ev2, check_noise=False)
        deg = PF.degeneracy_check(fam2, V, wh, classes, evaluator=ev2)
        rows.append({"value": smp.value, "error_estimate": smp.error_estimate,
                     "degeneracy": deg["max_normalized"]})
    return {
        "P_self_dual": p_sd.value,
        "P_anti_self_dual": p_asd.value,
        "ratio": abs(p_asd.value) / p_sd.value,
        "degeneracy_self_dual": d_sd["max_normalized"],
        "degeneracy_anti_self_dual": d_asd["max_normalized"],
        "gram_eigenvalues": gram.eigenvalues,
        "null_angle_deg": angle,
        "log_type_K_spread": K["spread"],
        "log_type_K_mean": K["mean"],
        "minus_dh_over_h": -dh / h0,
        "noise_floor": max(p_sd.error_estimate, p_asd.error_estimate),
        "non_fuchsian_base_ok": bool(other_report),
        "non_fuchsian": rows,
    }


def sample_classes(count: int, spec: G.GroupSpec | None = None, min_length: int = 2,
                   max_length: int = 6) -> list[str]:
    """Deterministic spread of primitive non-peripheral class words across lengths."""
    spec = spec or G.punctured_torus_spec()
    out = []
    L = min_length
    while len(out) < count:
        codes = G.class_codes(L)
        step = max(1, len(codes) // 5)
        for c in codes[::step]:
            w = G.codes_to_word(c)
            if G.primitive_period(w) == L and not G.is_peripheral(spec, w):
                out.append(w)
            if len(out) == count:
                break
        L = L + 1 if L < max_length else min_length
    return out


def refined_ratio_series(table: Ln.LengthTable, h: float, fraction: float = 1 / 3, step=None):
    """(T, ratio) over the top ``fraction`` of the certified range, grid step
    systole / 2 anchored at certified_T."""
    step = step or 0.5 * table.systole
    hi = table.certified_T
    lo = hi * (1 - fraction)
    k = int(math.floor((hi - lo) / step + 1e-9))
    Ts = hi - step * np.arange(k, -1, -1)
    return [(float(T), Ln.refined_ratio(table, h, float(T))) for T in Ts]


def intersection_pair(rho: R.Representation, eta: R.Representation, phi: Ln.WeightFunctional,
                      max_word_length: int, n: int | None = None, jt_rho=None, jt_eta=None) -> dict:
    """Orbital I and J, plus the tangent-slope I when a finite coding exists."""
    jt_rho = jt_rho or Ln.jordan_table(rho, max_word_length)
    jt_eta = jt_eta or Ln.jordan_table(eta, max_word_length)
    tr, te = Ln._make_table(jt_rho, phi), Ln._make_table(jt_eta, phi)
    T = min(tr.certified_T, te.certified_T)
    out = {"T": T, "I_orbital": Ln.intersection_orbital(tr, te, T)}
    if rho.spec.kind == G.SCHOTTKY and n:
        sh = S.build_shift(rho.spec)
        res = S.pressure_curve(sh, rho, eta, phi, n)
        h_eta = S.entropy_root(sh, eta, phi, n)
        out.update({"I_slope": res.I, "I_gibbs": res.I_gibbs, "h_rho": res.h, "h_eta": h_eta, "eps": res.eps})
    else:
        out["h_rho"] = Ln.entropy_counting(tr).h
        out["h_eta"] = Ln.entropy_counting(te).h
    out["J_orbital"] = PF.J_value(tr, te, out["h_rho"], out["h_eta"], T)
    return out
