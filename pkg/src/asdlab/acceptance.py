"""End-to-end acceptance checks shared by the test suite and the ``all`` command.

Each check returns a ``CheckResult`` whose ``measured`` dict is deterministic;
wall-clock timings live in ``timings`` and are not serialised.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np

from . import fixtures
from .errors import VerificationError
from .forms import exterior_d, hodge_star
from .near_contact import T_VALUES, local_interpolation, verify_near_contact
from .near_symplectic import (
    LINE_SLOPES,
    canonical_orientation,
    cutoff_perturb,
    hyperbola_branch,
    hyperbola_rational_points,
    locate_eps_threshold,
    tube_samples,
    verify_near_symplectic,
)
from .neck import (
    CapOperator,
    ModeVector,
    NeckConfig,
    embed_lowest,
    fit_decay_rate,
    mode_decay,
    second_term_split,
    sweep,
)
from .overtwisted import exact_cycle, overtwisted_family
from .resolution import (
    PeriodFamily,
    ResolutionCap,
    exceptional_integral,
    kahler_area_constant,
    period_jacobian,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    summary: str
    measured: dict = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "summary": self.summary, "measured": self.measured}


def _hyperbola_residual(points: np.ndarray) -> float:
    x1, x2, x3, x4 = points.T
    H = 3 * x1**2 - x1 * x4 - x4**2
    return float(np.max(np.abs(np.stack([x2, x3, H - 1]))))


def _line_residual(points: np.ndarray) -> float:
    x1, x2, x3, x4 = points.T
    dist = np.min([np.abs(x4 - s * x1) / math.hypot(1, s) for s in LINE_SLOPES], axis=0)
    return float(np.max(np.abs(np.stack([x2, x3, dist]))))


def exact_identities() -> CheckResult:
    t0 = time.perf_counter()
    measured = {}
    for eps in (0, 1):
        w = fixtures.two_form("model", eps)
        measured[f"eps{eps}"] = {"closed": exterior_d(w).is_zero(), "self_dual": hodge_star(w) == w}
    seconds = time.perf_counter() - t0
    ok = all(v["closed"] and v["self_dual"] for v in measured.values())
    return CheckResult("exact-identities", ok, "dw = 0 and *w = w with zero residual", measured,
                       {"total": seconds})


def zero_set() -> CheckResult:
    rep1 = verify_near_symplectic(fixtures.two_form("model-eps1"))
    res1 = max(_hyperbola_residual(c.points) for c in rep1.components)
    rep0 = verify_near_symplectic(fixtures.two_form("model-eps0"), puncture=fixtures.punctures("model-eps0"))
    res0 = max(_line_residual(c.points) for c in rep0.components)
    slopes = sorted(c.parametrization["slope"] for c in rep0.symbolic_components)
    expected = sorted(((-1 - math.sqrt(13)) / 2, (-1 + math.sqrt(13)) / 2))
    slope_err = max(abs(a - b) for a, b in zip(slopes, expected)) if len(slopes) == 2 else math.inf
    kinds = sorted(c.kind for c in rep1.symbolic_components)
    ok = (res1 <= 1e-9 and res0 <= 1e-9 and slope_err <= 1e-9
          and kinds == ["hyperbola-branch", "hyperbola-branch"])
    return CheckResult("zero-set", ok, f"hyperbola residual {res1:.1e}, line residual {res0:.1e}, slope error "
                       f"{slope_err:.1e}", {"hyperbola_residual": res1, "line_residual": res0,
                                            "slopes": slopes, "slope_error": slope_err, "eps1_kinds": kinds})


def transversality() -> CheckResult:
    rep = verify_near_symplectic(fixtures.two_form("model-eps1"))
    ranks = [s["rank"] for s in rep.transversality]
    full = sum(r == 3 for r in ranks)
    pd = sum(bool(s["passed"]) for s in rep.morse_bott)
    min_eig = min(min(s["eigenvalues"]) for s in rep.morse_bott)
    ok = len(ranks) == 100 and full == 100 and pd == len(rep.morse_bott) and pd > 0
    return CheckResult("transversality", ok, f"rank 3 at {full}/{len(ranks)}, normal Hessian PD at "
                       f"{pd}/{len(rep.morse_bott)}", {"rank3": full, "samples": len(ranks),
                                                       "hessian_pd": pd, "min_normal_eigenvalue": min_eig})


def orientation_form() -> CheckResult:
    w = fixtures.two_form("model-eps1")
    signs: Dict[int, set] = {}
    symmetric = flips = True
    trace_residual = 0.0
    points = hyperbola_rational_points()
    for p, t in points:
        o = canonical_orientation(w, p, t)
        o_rev = canonical_orientation(w, p, tuple(-v for v in t))
        symmetric &= o.symmetric
        trace_residual = max(trace_residual, abs(float(o.trace)))
        flips &= o_rev.det_sign == -o.det_sign
        signs.setdefault(hyperbola_branch(p), set()).add(o.det_sign)
    constant = all(len(s) == 1 for s in signs.values())
    ok = symmetric and trace_residual <= 1e-12 and constant and flips
    return CheckResult("orientation-form", ok, f"{len(points)} points, trace residual {trace_residual:.1e}",
                       {"points": len(points), "symmetric": symmetric, "trace_residual": trace_residual,
                        "det_signs_by_branch": {str(k): sorted(v) for k, v in sorted(signs.items())},
                        "sign_constant_per_branch": constant, "flips_with_tangent": flips})


def cutoff_perturbation(eps: float = 0.2, lo: float = 0.01, hi: float = 1.0) -> CheckResult:
    cf = fixtures.cutoff()
    tube = tube_samples(exterior_d(cf.lam), 3.0)
    rep = cutoff_perturb(cf.lam, cf.mu, cf.profile, eps, strict=False, pair_samples=1000, test_points=tube)
    thr = locate_eps_threshold(cf.lam, cf.mu, cf.profile, lo, hi, test_points=tube)
    antipodal_ok = rep.antipodal_residual <= 1e-10
    count_ok = thr.threshold is not None
    measured = {"antipodal_residual": rep.antipodal_residual, "antipodal_passed": antipodal_ok,
                "count_passed": count_ok, "component_count": rep.component_count,
                "near_symplectic": rep.near_symplectic, "first_failure": rep.first_failure,
                "min_wedge": rep.min_wedge, "threshold": thr.to_dict()}
    summary = (f"antipodal {'PASS' if antipodal_ok else 'FAIL'} ({rep.antipodal_residual:.1e}); "
               f"component count {'PASS' if count_ok else 'FAIL'} "
               f"({rep.component_count} arcs at eps={eps}, no eps in [{lo}, {hi}] gives 2)")
    return CheckResult("cutoff-perturbation", antipodal_ok and count_ok, summary, measured)


def near_contact_suite(seed: int = 0) -> CheckResult:
    reports = {}
    ok = True
    for name in fixtures.NEAR_CONTACT_SUITE:
        try:
            reports[name] = verify_near_contact(fixtures.one_form(name, seed)).to_dict()
            for z in reports[name]["zeros"]:
                A = z["A_eigenvalues"]
                ok &= (z["dlam_residual"] <= 1e-12 and min(A) < 0 < max(A)
                       and min(z["hessian_eigenvalues"]) > 0)
        except VerificationError as exc:
            ok = False
            reports[name] = {"error": exc.kind, "message": str(exc)}
    interp = local_interpolation(fixtures.index_minus(), fixtures.interpolation_partner())
    ok &= interp.passed and interp.num_points >= 10**4 and len(T_VALUES) == 5
    return CheckResult("near-contact-suite", ok, f"{len(reports)} fixtures; interpolation R={interp.R}, "
                       f"c={interp.c:.4f}, min f_t/r^2={interp.c_prime:.4f} on {interp.num_points} points",
                       {"fixtures": reports, "interpolation": interp.to_dict(), "t_values": list(T_VALUES)})


def _orbit_summary(eps) -> dict:
    fx = fixtures.overtwisted("rotational")
    r = overtwisted_family(fx.mu, fx.C, eps)
    o = r.periodic_orbit
    h, period, mult = exact_cycle(eps)
    return {"eps": float(eps), "zeros": len(r.zeros_on_sphere),
            "divergences": [z.divergence for z in r.zeros_on_sphere],
            "residual": o.residual, "attracting": o.attracting, "time_direction": o.time_direction,
            "height_error": abs(o.height - h), "period_error": abs(o.period - period) / period,
            "forward_multiplier": o.forward_multiplier, "exact_forward_multiplier": mult}


def overtwisted_cycles(eps_values=fixtures.OVERTWISTED_EPS) -> CheckResult:
    rows, timings = [], {}
    ok = True
    for eps in eps_values:
        t0 = time.perf_counter()
        try:
            row = _orbit_summary(eps)
            ok &= (row["zeros"] == 2 and all(d < 0 for d in row["divergences"])
                   and row["residual"] <= 1e-6 and row["attracting"])
        except VerificationError as exc:
            row = {"eps": float(eps), "error": exc.kind, "message": str(exc)}
            ok = False
        timings[str(float(eps))] = time.perf_counter() - t0
        rows.append(row)
    worst = max((r.get("residual", math.inf) for r in rows), default=math.inf)
    return CheckResult("overtwisted-family", ok, f"{len(rows)} eps values, worst return residual {worst:.1e}",
                       {"results": rows}, timings)


def window_decay(seed: int = 0, samples: int = 1000) -> CheckResult:
    basis = fixtures.ladder()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        psi = ModeVector(basis, rng.normal(size=basis.dimension))
        for s in (0.5, 1, 2, 4):
            n0, ns = mode_decay(psi, s)
            worst = max(worst, ns / n0 / math.exp(-2 * s))
    pure = 0.0
    for s in (0.5, 1, 2, 4):
        n0, ns = mode_decay(embed_lowest(rng.normal(size=3), basis), s)
        pure = max(pure, abs(ns / n0 - math.exp(-2 * s)))
    ok = worst <= 1 + 1e-12 and pure <= 1e-12
    return CheckResult("window-decay", ok, f"max ratio/e^(-2s) = {worst:.6f}, pure lowest-mode error {pure:.1e}",
                       {"max_normalised_ratio": worst, "pure_mode_error": pure, "samples": samples})


def neck_iteration(seed: int = 0) -> CheckResult:
    t0 = time.perf_counter()
    cfg = fixtures.neck_config((2, 3, 4), seed)
    psi = fixtures.incoming(cfg.basis, seed)
    results = sweep(cfg, psi, range(4, 13))
    f1 = fit_decay_rate([(r.config.T, r.tail(1)) for r in results])
    f2 = fit_decay_rate([(r.config.T, r.tail(2)) for r in results])
    oracle = max(r.oracle_residual for r in results)
    seconds = time.perf_counter() - t0
    ok = abs(f1.slope + 2) <= 0.05 and abs(f2.slope + 4) <= 0.1 and oracle <= 1e-12
    return CheckResult("neck-iteration", ok, f"slopes {f1.slope:.4f} and {f2.slope:.4f}, oracle {oracle:.1e}",
                       {"tail1_fit": f1.to_dict(), "tail2_fit": f2.to_dict(), "oracle_residual": oracle},
                       {"sweep": seconds})


def second_term(seed: int = 0) -> CheckResult:
    cfg = fixtures.neck_config((2, 3), seed)
    psi = ModeVector(cfg.basis, np.ones(cfg.basis.dimension))
    splits = [second_term_split(cfg.with_T(T), psi) for T in range(4, 13)]
    fit = fit_decay_rate([(s.T, s.higher_norm) for s in splits])
    gap = cfg.basis.next_gap
    ok = abs(fit.slope + gap) <= 0.05
    return CheckResult("second-term-split", ok, f"non-lowest slope {fit.slope:.4f} for gap {gap:g}",
                       {"fit": fit.to_dict(), "gap": gap})


def exceptional_area(seed: int = 0) -> CheckResult:
    area = kahler_area_constant(fixtures.RESOLUTION_MODEL_PARAM)
    cfg = fixtures.neck_config((2, 3, 4), seed)
    rcap = ResolutionCap.random_high(area.A, CapOperator.random(cfg.basis, seed + 2), seed=seed + 3)
    amps = np.random.default_rng(seed + 5).normal(size=cfg.basis.dimension)
    amps[0] = 1.0
    rep = exceptional_integral(cfg, rcap, ModeVector(cfg.basis, amps), range(4, 13))
    amps[0] = 0.0
    rep0 = exceptional_integral(cfg, rcap, ModeVector(cfg.basis, amps), range(4, 13))
    c = cfg.basis.next_gap
    ok = (area.refinement_gap <= 1e-6 and abs(rep.fit.slope + 2) <= 0.05
          and abs(rep.fit.intercept - rep.predicted_intercept) <= 0.05 and rep0.fit.slope <= -(c - 0.05))
    return CheckResult("exceptional-area", ok, f"A={area.A:.7f}, slope {rep.fit.slope:.4f}, intercept "
                       f"{rep.fit.intercept:.4f} vs {rep.predicted_intercept:.4f}, a1=0 slope {rep0.fit.slope:.4f}",
                       {"area": area.to_dict(), "fit": rep.fit.to_dict(),
                        "predicted_intercept": rep.predicted_intercept, "a1_zero_fit": rep0.fit.to_dict()})


def jacobian(seed: int = 0, T: float = 8) -> CheckResult:
    area = kahler_area_constant(fixtures.RESOLUTION_MODEL_PARAM)
    cfg = fixtures.neck_config((2, 3, 4), seed)
    rcap = ResolutionCap.random_high(area.A, CapOperator.random(cfg.basis, seed + 2), seed=seed + 3)
    generic = period_jacobian(PeriodFamily(1, cfg.basis, "generic", seed=seed + 1), cfg, rcap, T=T,
                              raise_on_singular=False)
    zero_cfg = NeckConfig(T, cfg.basis)
    zero_cap = ResolutionCap(area.A, CapOperator.zero(cfg.basis))
    ident = period_jacobian(PeriodFamily(1, cfg.basis, "identity"), zero_cfg, zero_cap, T=T)
    scale = 2 * area.A * math.exp(-2 * T)
    rel = float(np.abs(ident.matrix / scale - np.eye(3)).max())
    threshold = 1e-3 * math.exp(-2 * T) * area.A
    smin = float(generic.singular_values.min())
    ok = smin > threshold and rel <= 1e-8
    return CheckResult("period-jacobian", ok, f"smallest singular value {smin:.3e} > {threshold:.3e}, "
                       f"zero-cap relative error {rel:.1e}",
                       {"generic": generic.to_dict(), "identity_relative_error": rel, "threshold": threshold})


CHECKS: Dict[str, Callable[[], CheckResult]] = {
    "exact-identities": exact_identities,
    "zero-set": zero_set,
    "transversality": transversality,
    "orientation-form": orientation_form,
    "cutoff-perturbation": cutoff_perturbation,
    "near-contact-suite": near_contact_suite,
    "overtwisted-family": overtwisted_cycles,
    "window-decay": window_decay,
    "neck-iteration": neck_iteration,
    "second-term-split": second_term,
    "exceptional-area": exceptional_area,
    "period-jacobian": jacobian,
}


def run_all(names: List[str] | None = None) -> List[CheckResult]:
    return [CHECKS[n]() for n in (names or CHECKS)]
