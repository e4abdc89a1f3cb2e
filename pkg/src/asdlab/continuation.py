"""Predictor-corrector tracing of one-dimensional zero sets.

The zero sets handled here are curves in R^n cut out by an overdetermined
map F: R^n -> R^m whose Jacobian has rank n - 1 along the curve (for a
near-symplectic 2-form on R^4: six components, rank three).  Corrections
use least-squares Gauss-Newton steps so no local trivialisation has to be
chosen by hand.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

Array = np.ndarray
Field = Callable[[Array], Array]


def gauss_newton(F: Field, J: Field, x0, tol: float = 1e-13, max_iter: int = 60):
    """Least-squares Newton iteration from ``x0``.

    Returns:
        (x, residual_norm, converged)
    """
    x = np.array(x0, dtype=float)
    res = np.linalg.norm(F(x))
    for _ in range(max_iter):
        if res < tol:
            return x, res, True
        step = np.linalg.lstsq(J(x), -F(x), rcond=None)[0]
        # damp steps that do not reduce the residual
        for _ in range(30):
            trial = x + step
            tres = np.linalg.norm(F(trial))
            if tres < res or np.linalg.norm(step) < 1e-15:
                break
            step = step / 2
        if np.linalg.norm(trial - x) < 1e-16 * max(1.0, np.linalg.norm(x)) and tres >= res:
            break
        x, res = trial, tres
    return x, res, res < tol


def null_direction(jac: Array) -> Tuple[Array, Array]:
    """Unit vector spanning the (numerical) kernel, plus the singular values."""
    _, s, vt = np.linalg.svd(jac)
    return vt[-1], s


@dataclass
class Arc:
    """A traced piece of zero set, with the reason each end stopped."""

    points: Array
    end_reasons: Tuple[str, str]
    closed: bool = False

    @property
    def ends(self) -> Tuple[Array, Array]:
        return self.points[0], self.points[-1]


@dataclass
class Component:
    arcs: List[Arc] = field(default_factory=list)

    @property
    def points(self) -> Array:
        return np.vstack([a.points for a in self.arcs])

    @property
    def compact(self) -> bool:
        return all(a.closed for a in self.arcs)


@dataclass
class Tracer:
    """Trace the zero curve of ``F`` inside the ball of ``radius``.

    Args:
        F: residual map R^n -> R^m.
        J: its Jacobian, shape (m, n).
        radius: working ball; leaving it ends an arc with reason ``"exit"``.
        step: initial arclength step.
        exclude: centres of small balls (radius ``exclude_radius``) to stop at,
            used to puncture known degenerate points.
        tol: corrector residual tolerance.
    """

    F: Field
    J: Field
    radius: float = 3.0
    step: float = 0.05
    max_step: float = 0.2
    min_step: float = 1e-6
    exclude: Sequence[Sequence[float]] = ()
    exclude_radius: float = 1e-2
    tol: float = 1e-12
    max_steps: int = 5000

    def correct(self, x0: Array, tangent: Array):
        """Newton on F = 0 constrained to the hyperplane through x0 normal to ``tangent``."""
        x = x0.copy()
        for it in range(12):
            r = self.F(x)
            c = tangent @ (x - x0)
            if np.linalg.norm(r) < self.tol and abs(c) < self.tol:
                return x, it, True
            A = np.vstack([self.J(x), tangent])
            b = -np.concatenate([r, [c]])
            x = x + np.linalg.lstsq(A, b, rcond=None)[0]
        ok = np.linalg.norm(self.F(x)) < self.tol
        return x, 12, ok

    def _stop_reason(self, x: Array):
        if np.linalg.norm(x) > self.radius:
            return "exit"
        for c in self.exclude:
            if np.linalg.norm(x - np.asarray(c, dtype=float)) < self.exclude_radius:
                return "excluded"
        return None

    def march(self, x0: Array, direction: Array) -> Tuple[List[Array], str, bool]:
        pts = [x0]
        t_prev = direction / np.linalg.norm(direction)
        h = self.step
        x = x0
        length = 0.0
        for _ in range(self.max_steps):
            t, _ = null_direction(self.J(x))
            if t @ t_prev < 0:
                t = -t
            gap = min((np.linalg.norm(x - np.asarray(c, dtype=float)) for c in self.exclude), default=np.inf)
            h = min(h, max(gap / 2, self.min_step))
            x_new, iters, ok = self.correct(x + h * t, t)
            if not ok or np.linalg.norm(x_new - x) > 2 * h:
                h /= 2
                if h < self.min_step:
                    return pts, "stalled", False
                continue
            length += np.linalg.norm(x_new - x)
            x, t_prev = x_new, t
            pts.append(x)
            if length > 4 * self.step and np.linalg.norm(x - x0) < 0.75 * h:
                return pts, "closed", True
            reason = self._stop_reason(x)
            if reason:
                return pts, reason, False
            if iters <= 3:
                h = min(h * 1.5, self.max_step)
        return pts, "max_steps", False

    def trace(self, x0: Array) -> Arc:
        t, _ = null_direction(self.J(x0))
        fwd, r_fwd, closed = self.march(x0, t)
        if closed:
            return Arc(np.array(fwd), ("closed", "closed"), closed=True)
        bwd, r_bwd, _ = self.march(x0, -t)
        pts = np.array(bwd[::-1] + fwd[1:])
        return Arc(pts, (r_bwd, r_fwd))


def seed_zeros(F: Field, J: Field, candidates: Array, tol: float = 1e-12, max_seeds: int = 400):
    """Newton-correct the candidates with smallest residual; keep converged ones."""
    res = np.array([np.linalg.norm(F(c)) for c in candidates])
    order = np.argsort(res, kind="stable")[:max_seeds]
    seeds = []
    for i in order:
        x, r, ok = gauss_newton(F, J, candidates[i], tol=tol)
        if ok:
            seeds.append(x)
    return seeds


def trace_zero_set(tracer: Tracer, seeds: Sequence[Array], merge_tol: float = 1e-6) -> List[Component]:
    """Trace from every seed not already covered, then merge arcs that share endpoints."""
    arcs: List[Arc] = []
    tree = None
    covered = np.empty((0, len(seeds[0]) if len(seeds) else 1))
    for s in seeds:
        if np.linalg.norm(s) > tracer.radius or tracer._stop_reason(s) == "excluded":
            continue
        if tree is not None and tree.query(s)[0] < 2 * tracer.max_step:
            continue
        arc = tracer.trace(s)
        arcs.append(arc)
        covered = np.vstack([covered, arc.points])
        tree = cKDTree(covered)
    return merge_arcs(arcs, merge_tol)


def merge_arcs(arcs: Sequence[Arc], merge_tol: float = 1e-6) -> List[Component]:
    parent = list(range(len(arcs)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(arcs)):
        for j in range(i + 1, len(arcs)):
            if any(np.linalg.norm(p - q) < merge_tol for p in arcs[i].ends for q in arcs[j].ends):
                parent[find(i)] = find(j)
    groups = {}
    for i, arc in enumerate(arcs):
        groups.setdefault(find(i), []).append(arc)
    return [Component(g) for _, g in sorted(groups.items())]
