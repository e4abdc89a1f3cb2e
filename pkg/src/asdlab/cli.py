"""Command-line front end: run verification suites and sweeps, write deterministic reports.

Exit codes: 0 all asserted invariants hold, 1 a verification failed, 2 invalid input.
"""

from __future__ import annotations

import argparse
import configparser
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import acceptance, fixtures
from .errors import InvalidInput, VerificationError
from .near_contact import homotopy_obstructions, local_interpolation, verify_near_contact
from .near_symplectic import GridSpec, verify_near_symplectic
from .neck import ModeVector, fit_decay_rate, iterate_neck, second_term_split
from .overtwisted import exact_cycle, overtwisted_family
from .report import render_csv, render_json
from .resolution import (
    PeriodFamily,
    ResolutionCap,
    exceptional_integral,
    kahler_area_constant,
    period_jacobian,
)

COMMANDS = ("verify-near-symplectic", "verify-near-contact", "overtwisted", "neck-sim",
            "resolution-sweep", "period-jacobian", "all")


# -- value parsers (shared by flags and the config file) --------------------------------

def parse_number(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise InvalidInput(f"not a number: {text!r}") from None


def parse_sweep(text: str) -> Tuple[float, ...]:
    """``"8"``, ``"4,6,8"``, ``"4..12"`` (unit step) or ``"4..12:2"``."""
    text = text.strip()
    if ".." in text:
        span, _, step = text.partition(":")
        lo, _, hi = span.partition("..")
        lo, hi = float(parse_number(lo)), float(parse_number(hi))
        step = float(parse_number(step)) if step else 1.0
        if step <= 0 or hi < lo:
            raise InvalidInput(f"bad range {text!r}")
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return tuple(lo + i * step for i in range(n))
    return tuple(float(parse_number(v)) for v in text.split(","))


def parse_ladder(text: str) -> Tuple[float, ...]:
    values = tuple(float(parse_number(v)) for v in text.split(","))
    if values[0] != 2 or any(b <= a for a, b in zip(values, values[1:])):
        raise InvalidInput(f"ladder must start at 2 and increase: {text!r}")
    return values


def parse_eps(text: str) -> Tuple[Fraction, ...]:
    values = tuple(parse_number(v) for v in text.split(","))
    if any(v < 0 for v in values):
        raise InvalidInput("eps values must be non-negative")
    return values


def parse_grid(text: str) -> Tuple[float, float, int]:
    """``"lo:hi:n"``: n points per axis on [lo, hi]."""
    parts = text.split(":")
    if len(parts) != 3:
        raise InvalidInput(f"grid must be lo:hi:n, got {text!r}")
    lo, hi = float(parse_number(parts[0])), float(parse_number(parts[1]))
    n = parse_number(parts[2])
    if n.denominator != 1 or n < 2 or hi <= lo:
        raise InvalidInput(f"bad grid {text!r}")
    return lo, hi, int(n)


def parse_int(text: str, minimum: int = 0) -> int:
    v = parse_number(text)
    if v.denominator != 1 or v < minimum:
        raise InvalidInput(f"expected an integer >= {minimum}, got {text!r}")
    return int(v)


def parse_choice(choices: Sequence[str]) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in choices:
            raise InvalidInput(f"expected one of {', '.join(choices)}, got {text!r}")
        return text
    return parse


# -- configuration -----------------------------------------------------------------------

@dataclass
class RunConfig:
    command: Optional[str] = None
    fixture: Optional[str] = None
    grid: Optional[Tuple[float, float, int]] = None
    T: Optional[Tuple[float, ...]] = None
    ladder: Optional[Tuple[float, ...]] = None
    eps: Optional[Tuple[Fraction, ...]] = None
    out: Optional[str] = None
    format: str = "json"
    seed: int = 0
    jobs: int = 1
    caps: Optional[str] = None
    family: str = "generic"
    points: int = 1

    def report_view(self) -> dict:
        """The fields that influence results (output path and parallelism do not)."""
        view = asdict(self)
        view.pop("out")
        view.pop("jobs")
        return view


PARSERS: Dict[str, Callable[[str], object]] = {
    "command": parse_choice(COMMANDS),
    "fixture": str,
    "grid": parse_grid,
    "T": parse_sweep,
    "ladder": parse_ladder,
    "eps": parse_eps,
    "out": str,
    "format": parse_choice(("json", "csv")),
    "seed": lambda s: parse_int(s, 0),
    "jobs": lambda s: parse_int(s, 1),
    "caps": parse_choice(("zero", "identity", "random")),
    "family": parse_choice(("identity", "generic", "redundant")),
    "points": lambda s: parse_int(s, 1),
}


def read_config_file(path: str, command: Optional[str]) -> Dict[str, object]:
    """Values from ``[run]`` overlaid with the section named after the command; unknown keys are rejected."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise InvalidInput(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise InvalidInput(f"{path}: {exc}") from None
    for section in parser.sections():
        if section != "run" and section not in COMMANDS:
            raise InvalidInput(f"{path}: unknown section [{section}]")
        for key in parser[section]:
            if key not in PARSERS:
                raise InvalidInput(f"{path}: unknown key {key!r} in [{section}]")
    values: Dict[str, object] = {}
    if parser.has_section("run"):
        values.update({k: PARSERS[k](v) for k, v in parser["run"].items()})
    cmd = command or values.get("command")
    if cmd and parser.has_section(cmd):
        if "command" in parser[cmd]:
            raise InvalidInput(f"{path}: 'command' belongs in [run]")
        values.update({k: PARSERS[k](v) for k, v in parser[cmd].items()})
    return values


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="asdlab", description="Run verification suites and sweeps.")
    p.add_argument("command", nargs="?", help=" | ".join(COMMANDS))
    p.add_argument("--config", help="key-value config file ([run] plus per-command sections)")
    p.add_argument("--fixture", help="built-in fixture name or a form file")
    p.add_argument("--grid", help="lo:hi:n box grid")
    p.add_argument("--T", dest="T", help="neck lengths: 8, 4,6,8, 4..12 or 4..12:2")
    p.add_argument("--ladder", help="mode exponents, e.g. 2,3,4")
    p.add_argument("--eps", help="comma-separated eps values (fractions allowed)")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", help="json or csv")
    p.add_argument("--seed", help="seed for generated fixtures")
    p.add_argument("--jobs", help="parallel worker bound")
    p.add_argument("--caps", help="cap operators: zero, identity or random")
    p.add_argument("--family", help="period family: identity, generic or redundant")
    p.add_argument("--points", help="number of orbifold points for period-jacobian")
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then flags."""
    command = args.command
    if command is not None:
        command = PARSERS["command"](command)
    values = read_config_file(args.config, command) if args.config else {}
    for f in fields(RunConfig):
        raw = getattr(args, f.name, None)
        if raw is not None and f.name != "command":
            values[f.name] = PARSERS[f.name](raw)
    if command is not None:
        values["command"] = command
    if values.get("command") is None:
        raise InvalidInput("no command given")
    return RunConfig(**values)


# -- execution ------------------------------------------------------------------------------

@dataclass
class Outcome:
    results: dict
    failures: List[dict] = field(default_factory=list)
    header: Sequence[str] = ()
    rows: List[Sequence] = field(default_factory=list)


def _failure(check: str, exc: VerificationError) -> dict:
    return {"check": check, "kind": exc.kind, "message": str(exc), "details": exc.details}


def _require(failures: List[dict], check: str, ok: bool, message: str, **details) -> None:
    if not ok:
        failures.append({"check": check, "kind": "InvariantViolated", "message": message, "details": details})


def pmap(fn, items: Sequence, jobs: int) -> list:
    """Order-preserving map with at most ``jobs`` worker processes."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


def run_near_symplectic(cfg: RunConfig) -> Outcome:
    name = cfg.fixture or "model-eps1"
    eps = None
    if name == "model":
        if not cfg.eps or len(cfg.eps) != 1:
            raise InvalidInput("fixture 'model' needs a single --eps value")
        eps = cfg.eps[0]
    w = fixtures.two_form(name, eps)
    grid = GridSpec(cfg.grid[:2], cfg.grid[2], 4) if cfg.grid else GridSpec()
    out = Outcome({"fixture": name}, header=("component", "kind", "x1", "x2", "x3", "x4"))
    try:
        rep = verify_near_symplectic(w, grid=grid, puncture=fixtures.punctures(name, eps))
    except VerificationError as exc:
        out.failures.append(_failure("near-symplectic", exc))
        return out
    out.results["report"] = rep.to_dict()
    _require(out.failures, "transversality", all(s["passed"] for s in rep.transversality),
             "zero set is not transverse at every sample")
    _require(out.failures, "morse-bott", all(s["passed"] for s in rep.morse_bott),
             "normal Hessian is not positive definite at every sample")
    for i, comp in enumerate(rep.components):
        out.rows.extend((i, comp.kind, *p) for p in comp.points)
    return out


def run_near_contact(cfg: RunConfig) -> Outcome:
    name = cfg.fixture or "suite"
    names = fixtures.NEAR_CONTACT_SUITE if name == "suite" else (name,)
    grid = GridSpec(cfg.grid[:2], cfg.grid[2], 3) if cfg.grid else None
    out = Outcome({"fixtures": {}}, header=("fixture", "x1", "x2", "x3", "index"))
    for n in names:
        try:
            rep = verify_near_contact(fixtures.one_form(n, cfg.seed), grid)
        except VerificationError as exc:
            out.failures.append(_failure(n, exc))
            out.results["fixtures"][n] = {"error": exc.kind}
            continue
        out.results["fixtures"][n] = rep.to_dict()
        out.rows.extend((n, *z["point"], z["index"]) for z in rep.to_dict()["zeros"])
    if name == "suite":
        lam, partner = fixtures.index_minus(), fixtures.interpolation_partner()
        try:
            out.results["interpolation"] = local_interpolation(lam, partner).to_dict()
        except VerificationError as exc:
            out.failures.append(_failure("interpolation", exc))
        verdict = homotopy_obstructions(lam, fixtures.index_plus(), [(0, 0, 0)])
        out.results["obstruction_index_minus_vs_plus"] = verdict.to_dict()
        _require(out.failures, "obstruction", verdict.obstructed and verdict.kind == "index",
                 "index obstruction between index-minus and index-plus not detected")
    return out


def _overtwisted_point(job: Tuple[str, int, Fraction]) -> dict:
    name, seed, eps = job
    fx = fixtures.overtwisted(name, seed)
    try:
        res = overtwisted_family(fx.mu, fx.C, eps)
    except VerificationError as exc:
        return {"eps": eps, "failure": _failure(f"eps={eps}", exc)}
    row = {"eps": eps, "result": res.to_dict(include_curve=True)}
    if name == "rotational" and eps > 0:
        h, period, mult = exact_cycle(eps)
        o = res.periodic_orbit
        row["exact"] = {"height": h, "period": period, "forward_multiplier": mult,
                        "height_error": abs(o.height - h), "period_relative_error": abs(o.period - period) / period}
    return row


def run_overtwisted(cfg: RunConfig) -> Outcome:
    name = cfg.fixture or "rotational"
    fixtures.overtwisted(name, cfg.seed)
    eps_values = cfg.eps or fixtures.OVERTWISTED_EPS
    rows = pmap(_overtwisted_point, [(name, cfg.seed, e) for e in eps_values], cfg.jobs)
    out = Outcome({"fixture": name, "runs": []}, header=("eps", "index", "x1", "x2", "x3"))
    for row in rows:
        label = f"eps={row['eps']}"
        if "failure" in row:
            out.failures.append(row["failure"])
            out.results["runs"].append({"eps": row["eps"], "error": row["failure"]["kind"]})
            continue
        out.results["runs"].append(row)
        orbit = row["result"].get("periodic_orbit")
        if row["eps"] == 0:
            continue
        _require(out.failures, label, orbit is not None, "no periodic orbit")
        if orbit is None:
            continue
        _require(out.failures, label, orbit["residual"] <= 1e-6, "return-map residual above 1e-6",
                 residual=orbit["residual"])
        _require(out.failures, label, orbit["attracting"], "periodic orbit is not attracting")
        out.rows.extend((float(row["eps"]), i, *p) for i, p in enumerate(orbit.get("curve", [])))
    return out


def _neck_point(job) -> dict:
    ladder, seed, caps, T = job
    cfg = fixtures.neck_config(ladder, seed, caps, T)
    psi = fixtures.incoming(cfg.basis, seed)
    res = iterate_neck(cfg, psi)
    row = res.to_dict()
    row["piece_norms"] = res.norms
    if cfg.basis.next_gap < math.inf:
        row["second_term"] = second_term_split(cfg, psi).to_dict()
    return row


def _fit(out: Outcome, check: str, samples, target: float, tol: float) -> Optional[dict]:
    try:
        fit = fit_decay_rate(samples)
    except VerificationError as exc:
        out.failures.append(_failure(check, exc))
        return None
    _require(out.failures, check, abs(fit.slope - target) <= tol, f"slope {fit.slope:.4f} not within "
             f"{tol} of {target}", slope=fit.slope)
    return fit.to_dict()


def run_neck(cfg: RunConfig) -> Outcome:
    ladder = cfg.ladder or (2.0, 3.0, 4.0)
    Ts = cfg.T or tuple(float(t) for t in range(4, 13))
    caps = cfg.caps or "random"
    rows = pmap(_neck_point, [(ladder, cfg.seed, caps, T) for T in Ts], cfg.jobs)
    out = Outcome({"ladder": ladder, "caps": caps, "sweep": rows})
    for r in rows:
        label = f"T={r['T']}"
        _require(out.failures, label, r["contraction"] <= r["contraction_bound"],
                 "per-round contraction exceeds C e^(-2T)", contraction=r["contraction"])
        _require(out.failures, label, r["oracle_residual"] <= 1e-12, "iterated limit differs from the direct solve",
                 residual=r["oracle_residual"])
    if caps != "zero" and len(Ts) >= 4:
        out.results["tail1_fit"] = _fit(out, "tail1-slope", [(r["T"], r["tail1"]) for r in rows], -2, 0.05)
        out.results["tail2_fit"] = _fit(out, "tail2-slope", [(r["T"], r["tail2"]) for r in rows], -4, 0.1)
        if "second_term" in rows[0]:
            gap = ladder[1]
            out.results["second_term_fit"] = _fit(
                out, "second-term-slope", [(r["T"], r["second_term"]["higher_norm"]) for r in rows], -gap, 0.05)
    width = max(len(r["piece_norms"]) for r in rows)
    out.header = ("T", "norm", "tail2", "contraction") + tuple(f"iterate_{i}" for i in range(width))
    for r in rows:
        pad = [None] * (width - len(r["piece_norms"]))
        out.rows.append((r["T"], r["tail1"], r["tail2"], r["contraction"], *r["piece_norms"], *pad))
    return out


def _resolution_setup(cfg: RunConfig, T: float = 4.0):
    area = kahler_area_constant(fixtures.RESOLUTION_MODEL_PARAM)
    neck = fixtures.neck_config(cfg.ladder or (2.0, 3.0, 4.0), cfg.seed, cfg.caps or "random", T)
    rcap_cap = fixtures.cap(cfg.caps or "random", neck.basis, cfg.seed + 2)
    rcap = ResolutionCap.random_high(area.A, rcap_cap, seed=cfg.seed + 3)
    return area, neck, rcap


def run_resolution(cfg: RunConfig) -> Outcome:
    area, neck, rcap = _resolution_setup(cfg)
    Ts = cfg.T or tuple(float(t) for t in range(4, 13))
    if neck.basis.next_gap == math.inf:
        raise InvalidInput("resolution sweep needs a ladder rung above 2")
    amps = fixtures.incoming(neck.basis, cfg.seed + 5).amplitudes
    amps[0] = 1.0
    rep = exceptional_integral(neck, rcap, ModeVector(neck.basis, amps), Ts)
    amps0 = amps.copy()
    amps0[0] = 0.0
    rep0 = exceptional_integral(neck, rcap, ModeVector(neck.basis, amps0), Ts)
    out = Outcome({"area": area.to_dict(), "sweep": rep.to_dict(), "a1_zero_sweep": rep0.to_dict()},
                  header=("T", "period", "leading", "period_a1_zero"))
    _require(out.failures, "area-refinement", area.refinement_gap <= 1e-6,
             "quadrature resolutions disagree", gap=area.refinement_gap)
    if len(Ts) < 4:
        raise InvalidInput("need at least four T values to fit")
    _require(out.failures, "slope", rep.fit is not None and abs(rep.fit.slope + 2) <= 0.05,
             "exceptional period does not decay like e^(-2T)")
    _require(out.failures, "intercept",
             rep.fit is not None and abs(rep.fit.intercept - rep.predicted_intercept) <= 0.05,
             "intercept differs from log(2 A a1)")
    c = neck.basis.next_gap
    if rep0.fit is not None:
        _require(out.failures, "a1-zero-slope", rep0.fit.slope <= -(c - 0.05),
                 f"a1 = 0 period decays slower than e^(-{c:g} T)", slope=rep0.fit.slope)
    for (T, v), lead, (_, v0) in zip(rep.values, rep.leading, rep0.values):
        out.rows.append((T, v, lead, v0))
    return out


def run_jacobian(cfg: RunConfig) -> Outcome:
    Ts = cfg.T or (8.0,)
    if len(Ts) != 1:
        raise InvalidInput("period-jacobian takes a single --T value")
    T = Ts[0]
    area, neck, rcap = _resolution_setup(cfg, T)
    caps = cfg.caps or "random"
    if caps == "zero":
        rcap = ResolutionCap(area.A, fixtures.cap("zero", neck.basis))
    family = PeriodFamily(cfg.points, neck.basis, cfg.family, seed=cfg.seed + 1)
    out = Outcome({"area": area.to_dict(), "family": cfg.family, "points": cfg.points, "T": T})
    try:
        rep = period_jacobian(family, neck, rcap, T=T)
    except VerificationError as exc:
        out.failures.append(_failure("period-jacobian", exc))
        return out
    out.results["jacobian"] = rep.to_dict()
    if cfg.family == "identity" and caps == "zero":
        scale = 2 * area.A * math.exp(-2 * T)
        rel = float(np.abs(rep.matrix / scale - np.eye(len(rep.matrix))).max())
        out.results["identity_relative_error"] = rel
        _require(out.failures, "zero-cap-identity", rel <= 1e-8, "Jacobian differs from 2 A e^(-2T) I",
                 relative_error=rel)
    out.header = tuple(f"col_{j}" for j in range(len(rep.matrix)))
    out.rows = [tuple(row) for row in rep.matrix]
    return out


def _acceptance_check(name: str) -> dict:
    return acceptance.CHECKS[name]().to_dict()


def run_all(cfg: RunConfig) -> Outcome:
    checks = pmap(_acceptance_check, list(acceptance.CHECKS), cfg.jobs)
    out = Outcome({"checks": checks}, header=("check", "passed", "summary"))
    for c in checks:
        out.rows.append((c["name"], c["passed"], c["summary"]))
        _require(out.failures, c["name"], c["passed"], c["summary"])
    return out


RUNNERS: Dict[str, Callable[[RunConfig], Outcome]] = {
    "verify-near-symplectic": run_near_symplectic,
    "verify-near-contact": run_near_contact,
    "overtwisted": run_overtwisted,
    "neck-sim": run_neck,
    "resolution-sweep": run_resolution,
    "period-jacobian": run_jacobian,
    "all": run_all,
}


def build_report(cfg: RunConfig, outcome: Outcome) -> dict:
    return {
        "command": cfg.command,
        "fixture_version": fixtures.FIXTURE_VERSION,
        "config": cfg.report_view(),
        "passed": not outcome.failures,
        "first_failure": outcome.failures[0] if outcome.failures else None,
        "failures": outcome.failures,
        "results": outcome.results,
    }


def _write(path: Optional[str], text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def write_outputs(cfg: RunConfig, report: dict, outcome: Outcome) -> None:
    """JSON: the report. CSV: the table, plus the JSON report beside it when writing to a file."""
    if cfg.format == "json":
        _write(cfg.out, render_json(report))
        return
    _write(cfg.out, render_csv(outcome.header, outcome.rows))
    if cfg.out is not None:
        out = Path(cfg.out)
        side = out.with_suffix(".json") if out.suffix != ".json" else out.with_suffix(".report.json")
        side.write_text(render_json(report))


def run(cfg: RunConfig) -> Tuple[int, dict]:
    outcome = RUNNERS[cfg.command](cfg)
    report = build_report(cfg, outcome)
    write_outputs(cfg, report, outcome)
    return (0 if report["passed"] else 1), report


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        code, report = run(cfg)
    except InvalidInput as exc:
        print(f"asdlab: error: {exc}", file=sys.stderr)
        return 2
    if code:
        first = report["first_failure"]
        print(f"asdlab: {cfg.command}: FAILED at {first['check']}: {first['message']}", file=sys.stderr)
    else:
        print(f"asdlab: {cfg.command}: ok", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
