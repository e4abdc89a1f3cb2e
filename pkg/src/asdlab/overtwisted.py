"""Overtwisted near-contact family on the unit sphere and its limit cycle.

lam_eps = da + (phi_eps^* mu) / eps^2 + eps dC, with a = (x1^2 + x2^2 - x3^2)/2
and phi_eps(x) = eps x.  On S^2 with area form w = i_E vol the equation
i_X w = lam|_S gives the tangent field X = lam x x, whose divergence with
respect to w is x . curl(lam).  For small eps both poles are sinks, so
the two basins are separated by a periodic orbit; it repels under the flow
of X and is found as an attracting orbit of the reversed flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import continuation as cont
from .errors import NoCycleFound, PositiveDivergence, WrongZeroCount
from .forms import PolyForm, exterior_d, pullback_linear
from .near_contact import OneFormField, fibonacci_sphere
from .ode import SphereIntegrator
from .poly import PolyScalar, as_number


def potential_form() -> PolyForm:
    x1, x2, x3 = PolyScalar.variables(3)
    a = (x1**2 + x2**2 - x3**2) * Fraction(1, 2)
    return exterior_d(PolyForm.scalar(a))


def check_admissible(mu: PolyForm, C: PolyScalar, samples: int = 200):
    """mu and its first derivatives vanish at 0; C is independent of x3 with dC != 0 off the x3-axis."""
    if mu.num_vars != 3 or mu.degree != 1:
        raise ValueError("mu must be a 1-form on R^3")
    origin = (0, 0, 0)
    for j in range(3):
        c = mu[(j,)]
        if c(origin) != 0 or any(c.diff(i)(origin) != 0 for i in range(3)):
            raise ValueError("mu and its derivative must vanish at the origin")
    if C.diff(2) != PolyScalar.zero(3):
        raise ValueError("C must not depend on x3")
    theta = np.linspace(0, 2 * np.pi, samples, endpoint=False)
    pts = np.stack([np.cos(theta), np.sin(theta), np.zeros_like(theta)], -1)
    grad = np.stack([C.diff(0).to_numpy()(pts), C.diff(1).to_numpy()(pts)], -1)
    # dC is homogeneous in (x1, x2) for the cubics used here, so the unit circle suffices
    if np.linalg.norm(grad, axis=-1).min() <= 0:
        raise ValueError("dC must not vanish off the x3-axis")


def overtwisted_lambda(mu: PolyForm, C: PolyScalar, eps) -> PolyForm:
    """da + phi_eps^* mu / eps^2 + eps dC; eps = 0 gives da."""
    eps = as_number(eps)
    if eps < 0:
        raise ValueError("eps must be non-negative")
    lam = potential_form()
    if eps == 0:
        return lam
    scaled = pullback_linear([[eps, 0, 0], [0, eps, 0], [0, 0, eps]], mu) * (1 / (eps * eps))
    return lam + scaled + exterior_d(PolyForm.scalar(C)) * eps


def _cross(a, b):
    # np.cross carries heavy per-call overhead for single vectors
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


class SphereField:
    """X = lam x x on the unit sphere, with its Jacobian and divergence."""

    def __init__(self, lam: PolyForm):
        self.lam = lam
        self._f = OneFormField(lam)

    def __call__(self, x):
        return _cross(self._f.value(x), x)

    def jacobian(self, x):
        """Ambient Jacobian [i, m] = d X_i / d x_m."""
        lam = self._f.value(x)
        Dl = self._f.jacobian(x)  # [j, m] = d lam_j / d x_m
        J = np.empty((3, 3))
        for m in range(3):
            J[:, m] = _cross(Dl[:, m], x) + _cross(lam, np.eye(3)[m])
        return J

    def curl_divergence(self, x) -> float:
        """Divergence with respect to i_E vol: x . curl(lam)."""
        J = self._f.jacobian(x)
        curl = np.array([J[2, 1] - J[1, 2], J[0, 2] - J[2, 0], J[1, 0] - J[0, 1]])
        return float(x @ curl)

    def tangent_linearization(self, x):
        N = _tangent_frame(x)
        return N.T @ self.jacobian(x) @ N


def _tangent_frame(x):
    u = x / np.linalg.norm(x)
    q, _ = np.linalg.qr(np.column_stack([u, np.eye(3)]))
    N = q[:, 1:3]
    if np.linalg.det(np.column_stack([u, N])) < 0:
        N[:, 1] *= -1
    return N


@dataclass
class SphereZero:
    point: np.ndarray
    eigenvalues: np.ndarray
    divergence: float
    trace: float
    residual: float
    degenerate: bool

    def to_dict(self) -> dict:
        eig = [complex(v) for v in self.eigenvalues]
        return {
            "point": self.point.tolist(),
            "eigenvalues": [[v.real, v.imag] for v in eig],
            "divergence": self.divergence,
            "trace": self.trace,
            "residual": self.residual,
            "degenerate": self.degenerate,
        }


def sphere_zeros(X: SphereField, seeds: int = 400, max_seeds: int = 80, tol: float = 1e-13,
                 degeneracy_tol: float = 1e-8) -> List[SphereZero]:
    """Zeros of X on the unit sphere by Newton from a Fibonacci seed grid."""

    def F(x):
        return np.concatenate([X(x), [x @ x - 1]])

    def J(x):
        return np.vstack([X.jacobian(x), 2 * x])

    found = cont.seed_zeros(F, J, fibonacci_sphere(seeds), tol=tol, max_seeds=max_seeds)
    zeros: List[SphereZero] = []
    for p in found:
        if any(np.linalg.norm(p - z.point) < 1e-6 for z in zeros):
            continue
        L = X.tangent_linearization(p)
        eig = np.linalg.eigvals(L)
        zeros.append(SphereZero(
            point=p,
            eigenvalues=eig,
            divergence=X.curl_divergence(p),
            trace=float(np.trace(L)),
            residual=float(np.linalg.norm(X(p))),
            degenerate=bool(abs(np.linalg.det(L)) < degeneracy_tol),
        ))
    zeros.sort(key=lambda z: -z.point[2])
    return zeros


# -- Poincare section and cycle ----------------------------------------------

def _section_point(h: float) -> np.ndarray:
    """Point of the half-meridian {x2 = 0, x1 > 0} at height x3 = h."""
    return np.array([math.sqrt(max(0.0, 1 - h * h)), 0.0, h])


SECTION = (lambda y: y[1], lambda y: y[0] > 0)


@dataclass
class ReturnMap:
    """First return to the half-meridian {x2 = 0, x1 > 0} under the (possibly reversed) flow."""

    X: SphereField
    direction: int = -1
    t_max: float = 2000.0
    sinks: Sequence = ()
    sink_radius: float = 1e-3
    rtol: float = 1e-12

    def __post_init__(self):
        self.integrator = SphereIntegrator(self.X, rtol=self.rtol, atol=self.rtol, direction=self.direction)
        self.evaluations = 0

    def _stop(self, y):
        return any(np.linalg.norm(y - p) < self.sink_radius for p in self.sinks)

    def run(self, h: float, record: bool = False):
        # crossings in either direction count: the rotation sense may flip across the equator
        self.evaluations += 1
        return self.integrator.run(_section_point(h), self.t_max, SECTION, 0, self._stop, record,
                                   min_time=1e-9)

    def __call__(self, h: float) -> Optional[float]:
        out = self.run(h)
        if out is None or out.crossing is None:
            return None
        return float(out.crossing.point[2])


@dataclass
class PeriodicOrbit:
    height: float
    period: float
    multiplier: float
    forward_multiplier: float
    residual: float
    closure: float
    drift: float
    curve: np.ndarray
    time_direction: int
    long_time_height: Optional[float] = None

    @property
    def attracting(self) -> bool:
        return abs(self.multiplier) < 1

    def to_dict(self, include_curve: bool = False) -> dict:
        out = {
            "height": self.height, "period": self.period, "multiplier": self.multiplier,
            "forward_multiplier": self.forward_multiplier, "residual": self.residual,
            "closure": self.closure, "drift": self.drift, "time_direction": self.time_direction,
            "attracting": self.attracting, "long_time_height": self.long_time_height,
            "curve_points": len(self.curve),
        }
        if include_curve:
            out["curve"] = self.curve.tolist()
        return out


def find_cycle(X: SphereField, seed_heights: Sequence[float] = tuple(np.linspace(-0.9, 0.9, 13)),
               directions=(1, -1), residual_tol: float = 1e-8, t_max: float = 2000.0,
               sinks: Sequence = ()) -> PeriodicOrbit:
    """Locate an attracting periodic orbit through the half-meridian section.

    For each time direction the displacement P(h) - h is sampled at the seed
    heights, with runs stopped near the points in ``sinks``.  Every sign
    change between neighbouring seeds is polished with Brent's method and
    kept if its multiplier is below one.  The forward flow is tried first,
    then the reversed flow.

    Raises:
        NoCycleFound: no attracting fixed point in either direction.
    """
    rejected = []
    for direction in directions:
        P = ReturnMap(X, direction, t_max, [np.asarray(p, dtype=float) for p in sinks])
        disp = []
        for h in seed_heights:
            v = P(h)
            disp.append(None if v is None else v - h)
        for k in range(len(seed_heights) - 1):
            a, b = disp[k], disp[k + 1]
            if a is None or b is None or a * b > 0:
                continue
            try:
                orbit = _polish(P, seed_heights[k], seed_heights[k + 1], residual_tol)
            except NoCycleFound as exc:
                rejected.append(exc.details)
                continue
            if orbit.attracting:
                return orbit
            rejected.append({"height": orbit.height, "direction": direction, "multiplier": orbit.multiplier})
    raise NoCycleFound("no attracting fixed point of the return map", seeds=list(map(float, seed_heights)),
                       t_max=t_max, rejected=rejected)


def _polish(P: ReturnMap, lo: float, hi: float, residual_tol: float) -> PeriodicOrbit:
    def D(s):
        v = P(s)
        if v is None:
            raise NoCycleFound("return map undefined inside the bracket", height=s)
        return v - s

    h_star = brentq(D, lo, hi, xtol=1e-14, rtol=1e-15)
    run = P.run(h_star, record=True)
    residual = abs(float(run.crossing.point[2]) - h_star)
    if residual > residual_tol:
        raise NoCycleFound("fixed-point residual above tolerance", height=h_star, residual=residual)
    delta = 1e-5
    multiplier = (D(h_star + delta) - D(h_star - delta)) / (2 * delta) + 1
    closure = float(np.linalg.norm(run.crossing.point - _section_point(h_star)))
    return PeriodicOrbit(
        height=h_star,
        period=run.crossing.time,
        multiplier=multiplier,
        forward_multiplier=multiplier ** P.direction,
        residual=residual,
        closure=closure,
        drift=run.max_drift,
        curve=run.path,
        time_direction=P.direction,
    )


def long_time_height(X: SphereField, h0: float, direction: int, sinks=(), returns: int = 60) -> Optional[float]:
    """Height reached after many returns from ``h0``; a cross-check on the polished cycle."""
    P = ReturnMap(X, direction, sinks=[np.asarray(p, dtype=float) for p in sinks])
    h = h0
    for _ in range(returns):
        nxt = P(h)
        if nxt is None:
            return None
        if abs(nxt - h) < 1e-13:
            return nxt
        h = nxt
    return h


# -- the family ----------------------------------------------------------------

@dataclass
class SphereFlowResult:
    eps: float
    zeros_on_sphere: List[SphereZero]
    periodic_orbit: Optional[PeriodicOrbit] = None
    degenerate: bool = False
    cycle_error: Optional[str] = None

    def to_dict(self, include_curve: bool = False) -> dict:
        return {
            "eps": self.eps,
            "zeros": [z.to_dict() for z in self.zeros_on_sphere],
            "degenerate": self.degenerate,
            "periodic_orbit": None if self.periodic_orbit is None else self.periodic_orbit.to_dict(include_curve),
            "cycle_error": self.cycle_error,
        }


def overtwisted_family(mu: PolyForm, C: PolyScalar, eps, find_orbit: bool = True,
                       cross_check: bool = True, **cycle_kwargs) -> SphereFlowResult:
    """Build lam_eps, find the zeros of X_eps on S^2, check divergences and search for the cycle.

    eps = 0 returns the degenerate zero set of X_0 (poles plus the equator) flagged, without a cycle search.

    Raises:
        WrongZeroCount: eps > 0 and the number of zeros is not two, or a zero is degenerate.
        PositiveDivergence: a zero has divergence >= 0.
        NoCycleFound: the cycle search ran out of budget (inconclusive).
    """
    check_admissible(mu, C)
    lam = overtwisted_lambda(mu, C, eps)
    X = SphereField(lam)
    zeros = sphere_zeros(X)
    eps_f = float(as_number(eps))
    if eps_f == 0:
        return SphereFlowResult(eps_f, zeros, degenerate=any(z.degenerate for z in zeros))
    if len(zeros) != 2 or any(z.degenerate for z in zeros):
        raise WrongZeroCount("expected exactly two nondegenerate zeros", count=len(zeros),
                             points=[z.point.tolist() for z in zeros])
    for z in zeros:
        if z.divergence >= 0:
            raise PositiveDivergence("zero is not a sink", point=z.point.tolist(), divergence=z.divergence)
    result = SphereFlowResult(eps_f, zeros)
    if find_orbit:
        cycle_kwargs.setdefault("sinks", [z.point for z in zeros])
        orbit = find_cycle(X, **cycle_kwargs)
        if cross_check:
            start = orbit.height + 0.1 * (1 - abs(orbit.height))
            orbit.long_time_height = long_time_height(X, start, orbit.time_direction, cycle_kwargs["sinks"])
        result.periodic_orbit = orbit
    return result


def two_sinks(mu: PolyForm, C: PolyScalar, eps) -> bool:
    try:
        overtwisted_family(mu, C, eps, find_orbit=False)
    except (WrongZeroCount, PositiveDivergence):
        return False
    return True


@dataclass
class EpsMax:
    lower: float
    upper: float
    iterations: int

    def to_dict(self) -> dict:
        return {"eps_max_lower": self.lower, "eps_max_upper": self.upper, "iterations": self.iterations}


def locate_eps_max(mu: PolyForm, C: PolyScalar, lo: float = 1 / 64, hi: float = 4.0, iters: int = 12) -> EpsMax:
    """Bisect on the two-sink condition; assumes it holds at ``lo`` and fails at ``hi``."""
    if not two_sinks(mu, C, lo):
        raise WrongZeroCount("two-sink condition fails at the lower end", eps=lo)
    if two_sinks(mu, C, hi):
        return EpsMax(hi, math.inf, 0)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if two_sinks(mu, C, mid):
            lo = mid
        else:
            hi = mid
    return EpsMax(lo, hi, iters)


def c1_distance(mu: PolyForm, C: PolyScalar, eps, samples: int = 2000) -> float:
    """max over S^2 of |lam_eps - da| and of its first derivatives."""
    diff = overtwisted_lambda(mu, C, eps) - potential_form()
    fld = OneFormField(diff)
    pts = fibonacci_sphere(samples)
    return float(max(np.abs(fld.value(pts)).max(), np.abs(fld.jacobian(pts)).max()))


def c1_rate(mu: PolyForm, C: PolyScalar, exponents=range(3, 9)):
    """Fit log(C^1 distance) against log(eps) over eps = 2^-k; returns (slope, eps values, distances)."""
    eps = [Fraction(1, 2**k) for k in exponents]
    dist = [c1_distance(mu, C, e) for e in eps]
    slope = np.polyfit(np.log([float(e) for e in eps]), np.log(dist), 1)[0]
    return float(slope), [float(e) for e in eps], dist


# -- fixtures ------------------------------------------------------------------

def cubic_potential() -> PolyScalar:
    x1, x2, _ = PolyScalar.variables(3)
    return x1**3 * Fraction(1, 3) - x1 * x2**2


def rotational_mu(kappa=1) -> PolyForm:
    """mu = x3 (x2, -x1, 0) - dC + kappa |x|^2 (-x2, x1, 0) for the cubic C above.

    The -dC term cancels eps dC, leaving a family symmetric under rotation
    about the x3-axis whose cycle is the circle x3 = eps*kappa.
    """
    x1, x2, x3 = PolyScalar.variables(3)
    kappa = as_number(kappa)
    r2 = x1**2 + x2**2 + x3**2
    twist = PolyForm.one_form([x2 * x3, -x1 * x3, PolyScalar.zero(3)])
    swirl = PolyForm.one_form([-x2 * r2 * kappa, x1 * r2 * kappa, PolyScalar.zero(3)])
    return twist - exterior_d(PolyForm.scalar(cubic_potential())) + swirl


def direct_mu() -> PolyForm:
    """mu = x2 x3 dx1 - x1 x3 dx2, used with the cubic C unchanged (gives extra zeros)."""
    x1, x2, x3 = PolyScalar.variables(3)
    return PolyForm.one_form([x2 * x3, -x1 * x3, PolyScalar.zero(3)])


def perturbed_mu(seed: int, size=Fraction(1, 5), kappa=1) -> PolyForm:
    """rotational_mu plus a random rational cubic 1-form of the given size."""
    rng = np.random.default_rng(seed)
    x = PolyScalar.variables(3)
    monos = [x[i] * x[j] * x[k] for i in range(3) for j in range(i, 3) for k in range(j, 3)]
    comps = []
    for _ in range(3):
        p = PolyScalar.zero(3)
        for m in monos:
            p = p + m * (Fraction(int(rng.integers(-4, 5)), 4) * as_number(size))
        comps.append(p)
    return rotational_mu(kappa) + PolyForm.one_form(comps)


def exact_cycle(eps, kappa=1):
    """Height, period and forward return multiplier of the cycle for ``rotational_mu``."""
    h = float(as_number(eps)) * float(as_number(kappa))
    k = float(as_number(kappa))
    period = math.pi / h
    multiplier = math.exp(math.pi * (1 - h * h) / k)
    return h, period, multiplier
