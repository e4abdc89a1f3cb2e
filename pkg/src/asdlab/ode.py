"""Adaptive Dormand-Prince 5(4) integration on the unit sphere.

After every accepted step the state is projected back to |x| = 1, which
keeps the radial drift at round-off level over long integrations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
E = B5 - B4


def dopri_step(f: Callable, y: np.ndarray, h: float):
    """One Dormand-Prince step; returns (5th-order value, error estimate)."""
    k = np.empty((7, len(y)))
    k[0] = f(y)
    for i in range(1, 7):
        k[i] = f(y + h * (np.asarray(A[i]) @ k[:i]))
    return y + h * (B5 @ k), h * (E @ k)


@dataclass
class SectionCrossing:
    point: np.ndarray
    time: float


@dataclass
class FlowRun:
    """Outcome of integrating until a section crossing, a stop condition, or the time limit."""

    crossing: Optional[SectionCrossing]
    time: float
    steps: int
    max_drift: float
    stopped: Optional[str] = None
    path: Optional[np.ndarray] = None


class SphereIntegrator:
    """Adaptive integrator for a tangent field on the unit sphere.

    Args:
        field: vector field R^3 -> R^3, tangent along the sphere.
        rtol, atol: per-step error tolerances.
        direction: +1 for the flow of ``field``, -1 for the reversed flow.
    """

    def __init__(self, field: Callable, rtol: float = 1e-12, atol: float = 1e-12, direction: int = 1,
                 h0: float = 1e-2, h_max: float = 0.5):
        self.field = field
        self.rtol, self.atol = rtol, atol
        self.direction = direction
        self.h0, self.h_max = h0, h_max

    def f(self, y):
        return self.direction * self.field(y)

    def _error_norm(self, y, y_new, err):
        scale = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y_new))
        return float(np.sqrt(np.mean((err / scale) ** 2)))

    def run(self, y0, t_max: float, section: Callable | None = None, crossing_sign: int = 0,
            stop: Callable | None = None, record: bool = False, min_time: float = 0.0) -> FlowRun:
        """Integrate from ``y0``.

        ``section`` is a pair (g, accept): a crossing is a sign change of g
        in the direction ``crossing_sign`` (0 = any) at a point where
        ``accept`` holds, after ``min_time``.  ``stop(y)`` ends the run early.
        """
        y = np.asarray(y0, dtype=float)
        y = y / np.linalg.norm(y)
        t, h, steps, drift = 0.0, self.h0, 0, 0.0
        path = [y.copy()] if record else None
        while t < t_max:
            h = min(h, t_max - t)
            y_new, err = dopri_step(self.f, y, h)
            en = self._error_norm(y, y_new, err)
            if en > 1.0:
                h *= max(0.2, 0.9 * en ** -0.2)
                if h < 1e-14:
                    return FlowRun(None, t, steps, drift, "step_underflow", _stack(path))
                continue
            drift = max(drift, abs(np.linalg.norm(y_new) - 1.0))
            y_new = y_new / np.linalg.norm(y_new)
            if section is not None and t + h > min_time:
                g, accept = section
                g0, g1 = g(y), g(y_new)
                sign_ok = crossing_sign == 0 or np.sign(g1 - g0) == crossing_sign
                if g0 * g1 < 0 and sign_ok:
                    tau = brentq(lambda s: g(self._sub_step(y, s)), 0.0, h, xtol=1e-15, rtol=1e-15)
                    p = self._sub_step(y, tau)
                    if accept(p):
                        if record:
                            path.append(p)
                        return FlowRun(SectionCrossing(p, t + tau), t + tau, steps + 1, drift, None,
                                       _stack(path))
            y, t = y_new, t + h
            steps += 1
            if record:
                path.append(y.copy())
            if stop is not None and stop(y):
                return FlowRun(None, t, steps, drift, "stopped", _stack(path))
            h = min(self.h_max, h * min(5.0, 0.9 * max(en, 1e-10) ** -0.2))
        return FlowRun(None, t, steps, drift, "time_limit", _stack(path))

    def _sub_step(self, y, s):
        if s == 0:
            return y
        p, _ = dopri_step(self.f, y, s)
        return p / np.linalg.norm(p)


def _stack(path):
    return None if path is None else np.array(path)
