"""Mode-ladder model of harmonic self-dual forms on a long neck [0, T] x Y.

A field on the neck is a sum of modes (alpha + *alpha) e^{-lambda t}.  Each
mode carries an amplitude vector a_lambda (one entry per eigenform); the
ends of the neck are abstracted to linear cap operators that turn the
amplitudes arriving at an end into the amplitudes of the correction
emitted back into the neck.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import BoundViolated, InvalidInput, NoConvergence, NonPositiveNorm

LOWEST = 2
LOWEST_LABELS = ("omega1", "omega2", "omega3")


@dataclass(frozen=True)
class ModeBasis:
    """Ladder of decay exponents with multiplicities.

    The lowest exponent is 2 with multiplicity 3, one mode per self-dual
    basis form; the higher rungs are model parameters.
    """

    ladder: Tuple[Tuple[float, int], ...] = ((2, 3), (3, 3), (4, 3))
    synthetic: bool = True

    def __post_init__(self):
        ladder = tuple(sorted((float(lam), int(m)) for lam, m in self.ladder))
        object.__setattr__(self, "ladder", ladder)
        if not ladder or ladder[0][0] != LOWEST or ladder[0][1] != 3:
            raise InvalidInput("ladder must start at exponent 2 with multiplicity 3")
        if any(m < 1 for _, m in ladder) or len({lam for lam, _ in ladder}) != len(ladder):
            raise InvalidInput("multiplicities must be positive and exponents distinct")

    @classmethod
    def from_values(cls, values: Sequence[float], multiplicity: int = 3) -> "ModeBasis":
        return cls(tuple((v, 3 if v == LOWEST else multiplicity) for v in values))

    @property
    def dimension(self) -> int:
        return sum(m for _, m in self.ladder)

    @property
    def exponents(self) -> np.ndarray:
        """Decay exponent of every component, in ladder order."""
        return np.concatenate([np.full(m, lam) for lam, m in self.ladder])

    @property
    def next_gap(self) -> float:
        """Smallest ladder exponent above 2 (inf for a one-rung ladder)."""
        return self.ladder[1][0] if len(self.ladder) > 1 else math.inf

    def block(self, lam: float) -> slice:
        start = 0
        for value, m in self.ladder:
            if value == lam:
                return slice(start, start + m)
            start += m
        raise KeyError(lam)

    @property
    def lowest(self) -> slice:
        return self.block(LOWEST)

    def weights(self, k: int = 2) -> np.ndarray:
        """Sobolev weights (1 + lambda^2)^k per component."""
        return (1 + self.exponents**2) ** k


@dataclass
class ModeVector:
    """Mode amplitudes, decaying toward increasing t (``"increasing"``) or decreasing t."""

    basis: ModeBasis
    amplitudes: np.ndarray
    direction: str = "increasing"

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=float).copy()
        if self.amplitudes.shape != (self.basis.dimension,):
            raise InvalidInput("amplitude vector does not match the basis dimension")
        if not np.all(np.isfinite(self.amplitudes)):
            raise InvalidInput("amplitudes must be finite")
        if self.direction not in ("increasing", "decreasing"):
            raise InvalidInput("direction must be 'increasing' or 'decreasing'")

    @classmethod
    def zeros(cls, basis: ModeBasis, direction: str = "increasing") -> "ModeVector":
        return cls(basis, np.zeros(basis.dimension), direction)

    @classmethod
    def from_dict(cls, basis: ModeBasis, coefficients: Dict[float, Sequence[float]],
                  direction: str = "increasing") -> "ModeVector":
        amps = np.zeros(basis.dimension)
        for lam, vec in coefficients.items():
            amps[basis.block(float(lam))] = vec
        return cls(basis, amps, direction)

    def to_dict(self) -> Dict[float, list]:
        return {lam: self.amplitudes[self.basis.block(lam)].tolist() for lam, _ in self.basis.ladder}


@dataclass
class CapOperator:
    """Linear map from arriving to emitted amplitudes, with a declared weighted operator-norm bound."""

    basis: ModeBasis
    matrix: np.ndarray
    bound: float
    k: int = 2

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        n = self.basis.dimension
        if self.matrix.shape != (n, n):
            raise InvalidInput("cap matrix does not match the basis dimension")
        if self.measured_norm() > self.bound * (1 + 1e-12) + 1e-300:
            raise BoundViolated("cap operator norm exceeds its declared bound",
                                measured=self.measured_norm(), bound=self.bound)

    def _scale(self):
        return np.sqrt(self.basis.weights(self.k))

    def measured_norm(self) -> float:
        """Operator norm on amplitudes with the weighted l2 norm."""
        w = self._scale()
        return float(np.linalg.norm(w[:, None] * self.matrix / w[None, :], 2))

    def block(self, lam_in: float, lam_out: float) -> np.ndarray:
        return self.matrix[self.basis.block(lam_out), self.basis.block(lam_in)]

    def __call__(self, amplitudes: np.ndarray) -> np.ndarray:
        return self.matrix @ amplitudes

    @classmethod
    def zero(cls, basis: ModeBasis) -> "CapOperator":
        return cls(basis, np.zeros((basis.dimension, basis.dimension)), 0.0)

    @classmethod
    def identity(cls, basis: ModeBasis) -> "CapOperator":
        return cls(basis, np.eye(basis.dimension), 1.0)

    @classmethod
    def random(cls, basis: ModeBasis, seed: int, bound: float = 1.0, k: int = 2) -> "CapOperator":
        """Gaussian blocks rescaled to weighted norm exactly ``bound``."""
        rng = np.random.default_rng(seed)
        G = rng.normal(size=(basis.dimension, basis.dimension))
        G *= bound / np.linalg.norm(G, 2)
        w = np.sqrt(basis.weights(k))
        return cls(basis, G / w[:, None] * w[None, :], bound, k)


@dataclass
class NeckConfig:
    T: float
    basis: ModeBasis = field(default_factory=ModeBasis)
    cap_left: Optional[CapOperator] = None
    cap_right: Optional[CapOperator] = None
    cutoff_width: float = 1.0
    truncation: Optional[float] = None
    k: int = 2

    def __post_init__(self):
        if self.T < 2:
            raise InvalidInput("neck length T must be at least 2")
        if self.cap_left is None:
            self.cap_left = CapOperator.zero(self.basis)
        if self.cap_right is None:
            self.cap_right = CapOperator.zero(self.basis)
        if self.truncation is None:
            self.truncation = float(self.basis.ladder[-1][0])
        if self.basis.next_gap < math.inf and self.truncation < self.basis.next_gap:
            raise InvalidInput("truncation must keep the first rung above 2")

    def with_T(self, T: float) -> "NeckConfig":
        return replace(self, T=T)

    @property
    def kept(self) -> np.ndarray:
        return (self.basis.exponents <= self.truncation).astype(float)

    @property
    def transport(self) -> np.ndarray:
        """Diagonal factors e^{-lambda T} carrying amplitudes across the neck."""
        return np.exp(-self.basis.exponents * self.T)

    def contraction_constant(self) -> float:
        """C with per-round ratio <= C e^{-2T}: largest cap bound times the norm-equivalence factor."""
        return max(self.cap_left.bound, self.cap_right.bound) * math.sqrt(1.5)


# -- norms ---------------------------------------------------------------------

def window_norm(psi: ModeVector, start: float, width: float = 1.0) -> float:
    """L^2 norm of a one-sided field over the window [start, start + width]."""
    lam = psi.basis.exponents
    mass = (np.exp(-2 * lam * start) - np.exp(-2 * lam * (start + width))) / lam
    return float(math.sqrt(np.sum(psi.amplitudes**2 * mass)))


def mode_decay(psi: ModeVector, s: float, window: float = 1.0) -> Tuple[float, float]:
    """Window norms at the start of the neck and after a shift by ``s``.

    The ratio never exceeds e^{-2 s}; equality holds exactly for pure lowest modes.
    """
    if s < 0:
        raise InvalidInput("shift must be non-negative")
    if psi.direction != "increasing":
        raise InvalidInput("mode_decay expects a field decaying toward increasing t")
    n0, ns = window_norm(psi, 0.0, window), window_norm(psi, s, window)
    if ns > math.exp(-2 * s) * n0 * (1 + 1e-12):
        raise AssertionError("window norm decayed slower than e^{-2s}")
    return n0, ns


def field_norm(bL: np.ndarray, bR: np.ndarray, config: NeckConfig) -> float:
    """Weighted norm of the field with left-emitted amplitudes bL and right-emitted bR.

    Each emitted amplitude contributes unit mass on its cap plus the exact
    neck integral of |bL e^{-lambda t} + bR e^{-lambda (T - t)}|^2 (times 2
    for alpha + *alpha).
    """
    lam = config.basis.exponents
    T = config.T
    w = config.basis.weights(config.k)
    neck = (bL**2 + bR**2) * (1 - np.exp(-2 * lam * T)) / lam + 4 * bL * bR * T * np.exp(-lam * T)
    return float(math.sqrt(np.sum(w * (bL**2 + bR**2 + neck))))


def cap_norm(b: np.ndarray, config: NeckConfig) -> float:
    """Weighted l2 norm of emitted amplitudes, the part of a field living on a cap."""
    return float(math.sqrt(np.sum(config.basis.weights(config.k) * b**2)))


# -- iteration -----------------------------------------------------------------

@dataclass
class NeckResult:
    config: NeckConfig
    pieces: List[np.ndarray]
    sides: List[str]
    partial_sums: List[Tuple[np.ndarray, np.ndarray]]
    norms: List[float]
    ratios: List[float]
    limit: Tuple[np.ndarray, np.ndarray]
    direct: Tuple[np.ndarray, np.ndarray]

    @property
    def contraction(self) -> float:
        return max(self.ratios, default=0.0)

    @property
    def contraction_bound(self) -> float:
        return self.config.contraction_constant() * math.exp(-2 * self.config.T)

    @property
    def oracle_residual(self) -> float:
        return float(max(np.abs(self.limit[0] - self.direct[0]).max(), np.abs(self.limit[1] - self.direct[1]).max()))

    def fixed_point_residual(self) -> float:
        """Residual of bL = a + R_L D bR, bR = R_R D bL at the iterated limit."""
        bL, bR = self.limit
        D, P = self.config.transport, self.config.kept
        a = self.pieces[0]
        rL = bL - a - P * self.config.cap_left(D * bR)
        rR = bR - P * self.config.cap_right(D * bL)
        return float(max(np.abs(rL).max(), np.abs(rR).max()))

    def tail(self, terms: int) -> float:
        """Field norm of u minus its first ``terms`` pieces.

        Summed from the remaining pieces rather than by subtraction, which
        would lose everything below round-off of the leading amplitudes.
        """
        tL = np.zeros(self.config.basis.dimension)
        tR = np.zeros(self.config.basis.dimension)
        for piece, side in zip(self.pieces[terms:], self.sides[terms:]):
            if side == "left":
                tL = tL + piece
            else:
                tR = tR + piece
        return field_norm(tL, tR, self.config)

    @property
    def arriving_right(self) -> np.ndarray:
        """Total amplitudes reaching the right end."""
        return self.config.transport * self.limit[0]

    def to_dict(self) -> dict:
        return {
            "T": self.config.T,
            "iterations": len(self.pieces),
            "norms": self.norms,
            "contraction": self.contraction,
            "contraction_bound": self.contraction_bound,
            "oracle_residual": self.oracle_residual,
            "tail1": self.tail(1),
            "tail2": self.tail(2),
        }


def direct_solve(config: NeckConfig, a: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Solve bL = a + R_L D bR, bR = R_R D bL as one linear system."""
    n = config.basis.dimension
    D, P = config.transport, config.kept
    RL = P[:, None] * config.cap_left.matrix * D[None, :]
    RR = P[:, None] * config.cap_right.matrix * D[None, :]
    M = np.block([[np.eye(n), -RL], [-RR, np.eye(n)]])
    sol = np.linalg.solve(M, np.concatenate([a, np.zeros(n)]))
    return sol[:n], sol[n:]


def iterate_neck(config: NeckConfig, psi_in: ModeVector, max_iters: int = 60, tol: float = 1e-17) -> NeckResult:
    """Alternate reflections off the two caps until the corrections vanish.

    u^(1) is the input, emitted from the left end.  Each later piece is the
    previous one carried across the neck (factors e^{-lambda T}) and
    reflected by the cap it reaches.

    Raises:
        NoConvergence: the guaranteed or measured contraction per round is >= 1.
        BoundViolated: a measured round exceeds C e^{-2T}.
    """
    if max_iters < 2:
        raise InvalidInput("max_iters must be at least 2")
    if psi_in.direction != "increasing":
        raise InvalidInput("input must decay toward increasing t")
    bound = config.contraction_constant() * math.exp(-2 * config.T)
    if bound >= 1:
        raise NoConvergence("cap norms too large for this neck length", T=config.T, bound=bound)
    D, P = config.transport, config.kept
    a = P * psi_in.amplitudes
    zero = np.zeros_like(a)
    pieces, sides, norms, partial = [a], ["left"], [field_norm(a, zero, config)], []
    sL, sR = a.copy(), zero.copy()
    partial.append((sL.copy(), sR.copy()))
    ratios: List[float] = []
    current = a
    for i in range(1, max_iters):
        side = "right" if i % 2 else "left"
        cap = config.cap_right if side == "right" else config.cap_left
        nxt = P * cap(D * current)
        n_next = field_norm(nxt, zero, config)
        if norms[-1] > 0:
            ratio = n_next / norms[-1]
            ratios.append(ratio)
            if ratio >= 1:
                raise NoConvergence("reflection round did not contract", T=config.T, ratio=ratio)
            if ratio > bound * (1 + 1e-9):
                raise BoundViolated("reflection round exceeded C e^{-2T}", T=config.T, ratio=ratio, bound=bound)
        pieces.append(nxt)
        sides.append(side)
        norms.append(n_next)
        if side == "right":
            sR = sR + nxt
        else:
            sL = sL + nxt
        partial.append((sL.copy(), sR.copy()))
        current = nxt
        if n_next <= tol * norms[0]:
            break
    return NeckResult(config, pieces, sides, partial, norms, ratios, (sL, sR), direct_solve(config, a))


def smallest_contracting_T(results: Sequence[NeckResult]) -> Optional[float]:
    """Smallest sampled T whose guaranteed contraction is below one."""
    ok = [r.config.T for r in results if r.contraction_bound < 1]
    return min(ok) if ok else None


# -- the second term -------------------------------------------------------------

@dataclass
class SecondTermSplit:
    T: float
    lowest_source: np.ndarray
    higher_source: np.ndarray
    lowest_norm: float
    higher_norm: float

    def to_dict(self) -> dict:
        return {"T": self.T, "lowest_norm": self.lowest_norm, "higher_norm": self.higher_norm}


def second_term_split(config: NeckConfig, psi_in: ModeVector) -> SecondTermSplit:
    """Split u^(2) = R_R D a by source rung: the lowest rung versus everything above it."""
    D, P = config.transport, config.kept
    a = P * psi_in.amplitudes
    low = np.zeros_like(a)
    low[config.basis.lowest] = a[config.basis.lowest]
    high = a - low
    u_low = P * config.cap_right(D * low)
    u_high = P * config.cap_right(D * high)
    return SecondTermSplit(config.T, u_low, u_high, cap_norm(u_low, config), cap_norm(u_high, config))


# -- fits -------------------------------------------------------------------------

@dataclass
class DecayFitReport:
    samples: List[Tuple[float, float]]
    slope: float
    intercept: float
    residual: float

    def to_dict(self) -> dict:
        return {"samples": [list(s) for s in self.samples], "slope": self.slope,
                "intercept": self.intercept, "residual": self.residual}


def fit_decay_rate(samples: Sequence[Tuple[float, float]]) -> DecayFitReport:
    """Least-squares line through (T, log norm).

    Raises:
        NonPositiveNorm: a sampled norm is <= 0.
    """
    samples = [(float(t), float(v)) for t, v in samples]
    if len(samples) < 4:
        raise InvalidInput("need at least four samples")
    bad = [s for s in samples if not s[1] > 0]
    if bad:
        raise NonPositiveNorm("norms must be positive to fit a decay rate", sample=list(bad[0]))
    T = np.array([s[0] for s in samples])
    y = np.log([s[1] for s in samples])
    slope, intercept = np.polyfit(T, y, 1)
    resid = y - (slope * T + intercept)
    return DecayFitReport(samples, float(slope), float(intercept), float(np.sqrt(np.mean(resid**2))))


def sweep(config: NeckConfig, psi_in: ModeVector, Ts: Sequence[float], **kwargs) -> List[NeckResult]:
    return [iterate_neck(config.with_T(T), psi_in, **kwargs) for T in Ts]


# -- lowest modes ------------------------------------------------------------------

def lowest_mode_projection(psi: ModeVector) -> Tuple[float, float, float]:
    """Amplitudes (a1, a2, a3) of the lowest rung, one per self-dual basis form."""
    return tuple(float(v) for v in psi.amplitudes[psi.basis.lowest])


def embed_lowest(a: Sequence[float], basis: ModeBasis, direction: str = "increasing") -> ModeVector:
    amps = np.zeros(basis.dimension)
    amps[basis.lowest] = a
    return ModeVector(basis, amps, direction)


def lowest_mode_form(a: Sequence):
    """The constant 2-form a1 w1 + a2 w2 + a3 w3 on R^4 (exact for rational input)."""
    from .forms import self_dual_basis

    w = self_dual_basis()
    out = w[0] * a[0]
    return out + w[1] * a[1] + w[2] * a[2]


def kahler_pairing(a: Sequence) -> object:
    """<a1 w1 + a2 w2 + a3 w3, w1> under the flat pairing; equals 2 a1."""
    from .forms import inner_product, self_dual_basis

    value = inner_product(lowest_mode_form(a), self_dual_basis()[0])
    return value((0, 0, 0, 0))
