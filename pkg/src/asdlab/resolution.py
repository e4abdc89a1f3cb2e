"""Exceptional-sphere periods of a resolved orbifold end and the period-map Jacobian.

The resolved neighbourhood of C^2/{+-1} carries the Kahler potential
phi(s), s = |z|^2, determined by psi(s) = s phi'(s).  Here

    psi(s) = (1 - chi(s)) sqrt(s^2 + p^4) + chi(s) s,

an Eguchi-Hanson profile inside and the flat potential r^2 (psi = s) outside,
glued by a smoothstep chi on [2 p^2, 6 p^2].  On the exceptional curve the
Kahler form restricts to kappa times the Fubini-Study form (i/2) dd^c log(1 + |zeta|^2)
with kappa = psi(0), so its integral is pi * kappa.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.integrate import simpson

from .errors import InvalidInput, NonPositiveArea, SingularJacobian
from .near_symplectic import smoothstep, smoothstep_d1
from .neck import (
    CapOperator,
    DecayFitReport,
    ModeBasis,
    ModeVector,
    NeckConfig,
    fit_decay_rate,
    iterate_neck,
)


@dataclass(frozen=True)
class ModelPotential:
    """Rotationally symmetric potential through its profile psi(s) = s phi'(s)."""

    p: float
    scale: float = 1.0

    @property
    def glue(self):
        return 2 * self.p**2, 6 * self.p**2

    def _chi(self, s):
        lo, hi = self.glue
        u = np.clip((s - lo) / (hi - lo), 0, 1)
        return smoothstep(u), smoothstep_d1(u) / (hi - lo)

    def psi(self, s):
        s = np.asarray(s, dtype=float)
        chi, _ = self._chi(s)
        return self.scale * ((1 - chi) * np.sqrt(s * s + self.p**4) + chi * s)

    def psi_prime(self, s):
        s = np.asarray(s, dtype=float)
        chi, dchi = self._chi(s)
        root = np.sqrt(s * s + self.p**4)
        return self.scale * ((1 - chi) * s / root + chi + dchi * (s - root))

    def kappa(self) -> float:
        return float(self.psi(0.0))


def fubini_study_density(theta):
    """Density of (i/2) dd^c log(1 + |zeta|^2) in (theta, phi), zeta = tan(theta/2) e^{i phi}."""
    return 0.25 * np.sin(theta)


def curve_integral(potential: ModelPotential, n: int) -> float:
    """Integral of the Kahler form over the exceptional curve, Simpson's rule with n intervals in theta."""
    theta = np.linspace(0.0, math.pi, n + 1)
    inner = simpson(fubini_study_density(theta), x=theta)
    return potential.kappa() * 2 * math.pi * inner


@dataclass
class AreaConstant:
    """A = half the exceptional-curve integral, so that A <w, psi> = 2 A a1 is the leading period."""

    A: float
    curve_integral: float
    coarse: float
    fine: float
    finest: float
    richardson_ratio: float
    psh_margin: float
    kappa: float

    @property
    def refinement_gap(self) -> float:
        return abs(self.fine - self.coarse)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("A", "curve_integral", "coarse", "fine", "finest",
                                              "richardson_ratio", "psh_margin", "kappa")} | {
            "refinement_gap": self.refinement_gap}


def kahler_area_constant(model_param: float, n: int = 64, potential_scale: float = 1.0,
                         psh_samples: int = 4001) -> AreaConstant:
    """Area constant of the model resolution with size ``model_param``.

    Quadrature at n, 2n and 4n intervals; the Richardson ratio of successive
    differences should be close to 16 for Simpson's rule.

    Raises:
        NonPositiveArea: the potential is not strictly plurisubharmonic or the area is <= 0.
    """
    if not model_param > 0:
        raise InvalidInput("model_param must be positive")
    if n < 2 or n % 2:
        raise InvalidInput("n must be a positive even integer")
    pot = ModelPotential(float(model_param), float(potential_scale))
    s = np.linspace(0.0, 2 * pot.glue[1], psh_samples)[1:]
    # phi(s) is strictly psh on C^2 minus 0 iff psi > 0 and psi' > 0 for s > 0
    margin = float(min(pot.psi(s).min(), pot.psi_prime(s).min()))
    if margin <= 0:
        raise NonPositiveArea("model potential is not strictly plurisubharmonic", margin=margin)
    q1, q2, q4 = (curve_integral(pot, m) for m in (n, 2 * n, 4 * n))
    if q4 <= 0:
        raise NonPositiveArea("exceptional curve has non-positive area", area=q4)
    d1, d2 = q1 - q2, q2 - q4
    ratio = d1 / d2 if d2 != 0 else math.inf
    best = q4 + (q4 - q2) / 15
    return AreaConstant(float(best / 2), float(best), float(q1), float(q2), float(q4), float(ratio), margin,
                        pot.kappa())


# -- resolved cap ------------------------------------------------------------------

@dataclass
class ResolutionCap:
    """Exceptional-sphere period as a linear functional of the amplitudes arriving at the resolved end.

    For the complex structure J_alpha the lowest rung contributes
    2 A a_alpha; higher rungs contribute through ``high_functional``
    (one row per alpha).
    """

    A: float
    cap_operator: CapOperator
    high_functional: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.A > 0:
            raise NonPositiveArea("area constant must be positive", A=self.A)
        basis = self.cap_operator.basis
        n_high = basis.dimension - 3
        if self.high_functional is None:
            self.high_functional = np.zeros((3, n_high))
        self.high_functional = np.asarray(self.high_functional, dtype=float).reshape(3, n_high)

    @property
    def basis(self) -> ModeBasis:
        return self.cap_operator.basis

    def functional(self, amplitudes: np.ndarray, alpha: int = 0) -> float:
        low = amplitudes[self.basis.lowest]
        high = np.delete(amplitudes, np.arange(self.basis.dimension)[self.basis.lowest])
        return float(2 * self.A * low[alpha] + self.high_functional[alpha] @ high)

    def periods(self, amplitudes: np.ndarray) -> np.ndarray:
        return np.array([self.functional(amplitudes, alpha) for alpha in range(3)])

    @classmethod
    def random_high(cls, A: float, cap: CapOperator, seed: int, size: float = 1.0) -> "ResolutionCap":
        rng = np.random.default_rng(seed)
        return cls(A, cap, size * rng.normal(size=(3, cap.basis.dimension - 3)))


def exceptional_period(config: NeckConfig, rcap: ResolutionCap, psi_in: ModeVector, alpha: int = 0) -> float:
    cfg = NeckConfig(config.T, config.basis, config.cap_left, rcap.cap_operator, config.cutoff_width,
                     config.truncation, config.k)
    result = iterate_neck(cfg, psi_in)
    return rcap.functional(result.arriving_right, alpha)


@dataclass
class ExceptionalReport:
    values: List[tuple]
    fit: Optional[DecayFitReport]
    leading: List[float]
    remainder_fit: Optional[DecayFitReport]
    a1: float
    A: float

    @property
    def predicted_intercept(self) -> float:
        return math.log(2 * self.A * abs(self.a1)) if self.a1 else -math.inf

    def to_dict(self) -> dict:
        return {
            "values": [list(v) for v in self.values],
            "fit": None if self.fit is None else self.fit.to_dict(),
            "remainder_fit": None if self.remainder_fit is None else self.remainder_fit.to_dict(),
            "a1": self.a1, "A": self.A, "predicted_intercept": self.predicted_intercept,
        }


def exceptional_integral(config: NeckConfig, rcap: ResolutionCap, psi_in: ModeVector,
                         T_sweep: Sequence[float]) -> ExceptionalReport:
    """Sweep T, record the period over C, and fit it together with the remainder after 2 A a1 e^{-2T}."""
    if not config.basis.next_gap < math.inf:
        raise InvalidInput("ladder needs a rung above 2")
    a1 = float(psi_in.amplitudes[config.basis.lowest][0])
    values, leading, remainder = [], [], []
    for T in T_sweep:
        v = exceptional_period(config.with_T(T), rcap, psi_in)
        lead = 2 * rcap.A * a1 * math.exp(-2 * T)
        values.append((float(T), v))
        leading.append(lead)
        remainder.append((float(T), abs(v - lead)))
    fit = fit_decay_rate([(T, abs(v)) for T, v in values]) if all(v != 0 for _, v in values) else None
    rem_fit = fit_decay_rate(remainder) if all(r > 0 for _, r in remainder) else None
    return ExceptionalReport(values, fit, leading, rem_fit, a1, rcap.A)


# -- period map ---------------------------------------------------------------------

@dataclass
class PeriodFamily:
    """Lowest-mode data at n orbifold points as a function of 3n parameters, zero at s = 0.

    kinds:
        identity: a^(i) = s_i (the i-th block of s), no higher modes.
        generic: a = Q (I + 0.2 G) s + 0.1 s * (K s), plus higher modes H s.
        redundant: identity with the second coordinate of each block copied from the first.
    """

    n: int
    basis: ModeBasis
    kind: str = "identity"
    seed: int = 0
    _M: np.ndarray = field(init=False, repr=False)
    _K: np.ndarray = field(init=False, repr=False)
    _H: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("identity", "generic", "redundant"):
            raise InvalidInput(f"unknown family kind {self.kind!r}")
        if self.n < 1:
            raise InvalidInput("need at least one orbifold point")
        d = 3 * self.n
        n_high = self.basis.dimension - 3
        rng = np.random.default_rng(self.seed)
        self._M, self._K = np.eye(d), np.zeros((d, d))
        self._H = np.zeros((self.n, n_high, d))
        if self.kind == "generic":
            Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
            G = rng.normal(size=(d, d))
            self._M = Q @ (np.eye(d) + 0.2 * G / np.linalg.norm(G, 2))
            self._K = rng.normal(size=(d, d))
            self._H = 0.5 * rng.normal(size=(self.n, n_high, d))
        elif self.kind == "redundant":
            for i in range(self.n):
                self._M[3 * i + 1] = self._M[3 * i]

    @property
    def dimension(self) -> int:
        return 3 * self.n

    def __call__(self, s) -> List[ModeVector]:
        s = np.asarray(s, dtype=float)
        if s.shape != (self.dimension,):
            raise InvalidInput("parameter vector has the wrong length")
        low = self._M @ s + 0.1 * s * (self._K @ s)
        out = []
        for i in range(self.n):
            amps = np.zeros(self.basis.dimension)
            amps[self.basis.lowest] = low[3 * i:3 * i + 3]
            amps[3:] = self._H[i] @ s
            out.append(ModeVector(self.basis, amps))
        return out

    def permuted(self, perm: Sequence[int]) -> "PeriodFamily":
        """The same family with the orbifold points relabelled by ``perm``."""
        idx = np.concatenate([np.arange(3 * p, 3 * p + 3) for p in perm])
        out = PeriodFamily(self.n, self.basis, self.kind, self.seed)
        out._M = self._M[idx][:, idx]
        out._K = self._K[idx][:, idx]
        out._H = self._H[list(perm)][:, :, idx]
        return out


def period_map(family: PeriodFamily, config: NeckConfig, rcap: ResolutionCap, s) -> np.ndarray:
    """(int_C u_{i,s}) over alpha = 1..3 and the n points, ordered point-major."""
    cfg = NeckConfig(config.T, config.basis, config.cap_left, rcap.cap_operator, config.cutoff_width,
                     config.truncation, config.k)
    out = []
    for psi in family(s):
        result = iterate_neck(cfg, psi)
        out.extend(rcap.periods(result.arriving_right))
    return np.array(out)


@dataclass
class JacobianReport:
    matrix: np.ndarray
    singular_values: np.ndarray
    threshold: float
    scale: float

    @property
    def nonsingular(self) -> bool:
        return bool(self.singular_values.min() > self.threshold)

    def to_dict(self) -> dict:
        return {
            "matrix": self.matrix.tolist(),
            "singular_values": self.singular_values.tolist(),
            "threshold": self.threshold,
            "leading_scale": self.scale,
            "nonsingular": self.nonsingular,
        }


def period_jacobian(family: PeriodFamily, config: NeckConfig, rcap: ResolutionCap, T: Optional[float] = None,
                    h: float = 1e-4, raise_on_singular: bool = True) -> JacobianReport:
    """Central-difference Jacobian of the period map at s = 0.

    Raises:
        SingularJacobian: smallest singular value <= 1e-3 e^{-2T} A.
    """
    if not h > 0:
        raise InvalidInput("h must be positive")
    cfg = config.with_T(T) if T is not None else config
    d = family.dimension
    J = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        J[:, j] = (period_map(family, cfg, rcap, e) - period_map(family, cfg, rcap, -e)) / (2 * h)
    sv = np.linalg.svd(J, compute_uv=False)
    report = JacobianReport(J, sv, 1e-3 * math.exp(-2 * cfg.T) * rcap.A, 2 * rcap.A * math.exp(-2 * cfg.T))
    if raise_on_singular and not report.nonsingular:
        raise SingularJacobian("period map Jacobian is singular", smallest=float(sv.min()),
                               threshold=report.threshold)
    return report
