"""Near-symplectic model forms on R^4 and their verification.

The model is the self-dual form

    w = f1*w1 + f2*w2 + f3*w3,   f1 = 2 x1 x3 - 2 x2 x4 - x3 x4,
                                 f2 = -x1 (4 x2 + x3),
                                 f3 = x2^2 + x3^2 - H,  H = 3 x1^2 - x1 x4 - x4^2,

optionally shifted by eps*w3.  Exact identities (closedness, self-duality,
Liouville relations) are decided with rational arithmetic; zero sets are
found both in closed form and by numerical continuation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from . import continuation as cont
from .errors import (
    ComponentCountMismatch,
    DegenerateZero,
    IndefiniteWedge,
    NearSymplecticFailure,
    NotClosed,
    NotHomogeneous,
    NotLiouville,
    NotOnZeroSet,
    NotTransverse,
    TangentNotInKernel,
)
from .forms import (
    FlatFrame,
    PolyForm,
    VectorFieldPoly,
    basis_indices,
    covariant_derivative,
    exterior_d,
    hodge_star,
    interior_product,
    lie_derivative,
    self_dual_basis,
    top_coefficient,
    wedge,
)
from .poly import PolyScalar, as_number

PAIRS = basis_indices(4, 2)
# quadratic form of H in the (x1, x4) plane
H_MATRIX = np.array([[3.0, -0.5], [-0.5, -1.0]])
LINE_SLOPES = ((-1 - math.sqrt(13)) / 2, (-1 + math.sqrt(13)) / 2)


def model_polynomials():
    """Return (f1, f2, f3, H) as exact polynomials on R^4."""
    x1, x2, x3, x4 = PolyScalar.variables(4)
    H = 3 * x1**2 - x1 * x4 - x4**2
    f1 = 2 * x1 * x3 - 2 * x2 * x4 - x3 * x4
    f2 = -x1 * (4 * x2 + x3)
    f3 = x2**2 + x3**2 - H
    return f1, f2, f3, H


def build_model_form(eps=0) -> PolyForm:
    """The model form plus ``eps`` times w3 (eps >= 0, exact when rational)."""
    eps = as_number(eps)
    if eps < 0:
        raise ValueError("eps must be non-negative")
    w1, w2, w3 = self_dual_basis()
    f1, f2, f3, _ = model_polynomials()
    return w1 * f1 + w2 * f2 + w3 * (f3 + eps)


def model_eps(w: PolyForm) -> Optional[object]:
    """If ``w`` is a member of the model family, return its eps, else None."""
    if w.num_vars != 4 or w.degree != 2:
        return None
    diff = w - build_model_form(0)
    w3 = self_dual_basis()[2]
    if diff.is_zero():
        return Fraction(0)
    c = diff[(0, 3)]
    if c.degree() != 0 or diff != w3 * c:
        return None
    eps = c(tuple([0] * 4))
    return eps if eps >= 0 else None


def wedge_density(w: PolyForm) -> PolyScalar:
    """The function f with w ^ w = f dx1^dx2^dx3^dx4."""
    return top_coefficient(wedge(w, w))


def to_matrix(values: Sequence) -> np.ndarray:
    """Antisymmetric 4x4 matrix from the six lexicographic components."""
    m = np.zeros((4, 4), dtype=object if isinstance(values[0], Fraction) else float)
    for (i, j), v in zip(PAIRS, values):
        m[i, j] = v
        m[j, i] = -v
    return m


def wedge_density_values(values: np.ndarray) -> np.ndarray:
    """f from sampled components (..., 6): w^w = 2 Pf(w) vol."""
    w12, w13, w14, w23, w24, w34 = np.moveaxis(values, -1, 0)
    return 2 * (w12 * w34 - w13 * w24 + w14 * w23)


# -- grids and reports -------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """A uniform box grid: ``resolution`` points per axis on [lo, hi]."""

    bounds: Tuple[float, float] = (-2.0, 2.0)
    resolution: int = 9
    dimension: int = 4

    def points(self) -> np.ndarray:
        axis = np.linspace(self.bounds[0], self.bounds[1], self.resolution)
        mesh = np.meshgrid(*([axis] * self.dimension), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @property
    def radius(self) -> float:
        return max(abs(self.bounds[0]), abs(self.bounds[1]))


@dataclass
class ZeroComponent:
    kind: str
    parametrization: dict
    points: np.ndarray
    compact: bool = False
    end_reasons: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "parametrization": self.parametrization,
            "compact": self.compact,
            "end_reasons": list(self.end_reasons),
            "num_points": int(len(self.points)),
        }


@dataclass
class ZeroSetReport:
    closed: bool
    selfdual: bool
    min_wedge: float
    components: List[ZeroComponent] = field(default_factory=list)
    symbolic_components: List[ZeroComponent] = field(default_factory=list)
    transversality: List[dict] = field(default_factory=list)
    morse_bott: List[dict] = field(default_factory=list)
    orientations: List[dict] = field(default_factory=list)
    degenerate_points: List[Tuple[float, ...]] = field(default_factory=list)
    model_residual: Optional[float] = None

    @property
    def passed(self) -> bool:
        return (
            self.closed
            and all(s["passed"] for s in self.transversality)
            and all(s["passed"] for s in self.morse_bott)
        )

    def to_dict(self) -> dict:
        return {
            "closed": self.closed,
            "selfdual": self.selfdual,
            "min_wedge": self.min_wedge,
            "zero_components": [c.to_dict() for c in self.components],
            "symbolic_components": [c.to_dict() for c in self.symbolic_components],
            "transversality": self.transversality,
            "morse_bott": self.morse_bott,
            "orientation": self.orientations,
            "degenerate_points": [list(p) for p in self.degenerate_points],
            "model_residual": self.model_residual,
            "passed": self.passed,
        }


class PolyTwoFormField:
    """Vectorised evaluation of a polynomial 2-form on R^4 and its Jacobian."""

    def __init__(self, w: PolyForm):
        self.form = w
        self._value = w.to_numpy()
        self._jac = w.jacobian_numpy()
        f = wedge_density(w)
        self._f = f.to_numpy()
        self._hess = [[f.diff(i).diff(j).to_numpy() for j in range(4)] for i in range(4)]

    def value(self, x):
        return self._value(x)

    def jacobian(self, x):
        return self._jac(x)

    def wedge(self, x):
        return self._f(x)

    def wedge_hessian(self, x):
        x = np.asarray(x, dtype=float)
        return np.array([[h(x) for h in row] for row in self._hess])


def _symbolic_components(eps, samples: int = 41, radius: float = 2.0) -> List[ZeroComponent]:
    """Closed-form zero set of the model family: two lines or two hyperbola branches."""
    eps = float(eps)
    out = []
    if eps == 0:
        for t in LINE_SLOPES:
            s = np.linspace(-radius, radius, samples) / math.sqrt(1 + t * t)
            pts = np.stack([s, 0 * s, 0 * s, t * s], axis=-1)
            out.append(ZeroComponent("line", {"direction": [1.0, 0.0, 0.0, t], "slope": t}, pts))
        return out
    evals, evecs = np.linalg.eigh(H_MATRIX)
    neg, pos = evals  # ascending
    vneg, vpos = evecs[:, 0], evecs[:, 1]
    a, b = math.sqrt(eps / pos), math.sqrt(eps / -neg)
    smax = math.acosh(max(1.0, radius / a))
    s = np.linspace(-smax, smax, samples)
    for sign in (1.0, -1.0):
        plane = sign * a * np.cosh(s)[:, None] * vpos + b * np.sinh(s)[:, None] * vneg
        pts = np.stack([plane[:, 0], 0 * s, 0 * s, plane[:, 1]], axis=-1)
        out.append(ZeroComponent(
            "hyperbola-branch",
            {"branch": int(sign), "semi_axis": a, "conjugate_axis": b,
             "axis": vpos.tolist(), "conjugate_direction": vneg.tolist(), "level": eps},
            pts,
        ))
    return out


def transversality_sample(jac: np.ndarray, rel_tol: float = 1e-8) -> dict:
    s = np.linalg.svd(jac, compute_uv=False)
    rank = int(np.sum(s > rel_tol * max(1.0, s[0])))
    return {"rank": rank, "singular_values": s.tolist(), "passed": rank == 3}


def normal_hessian(hess: np.ndarray, tangent: np.ndarray) -> np.ndarray:
    """Eigenvalues of the Hessian restricted to the orthogonal complement of ``tangent``."""
    t = tangent / np.linalg.norm(tangent)
    q, _ = np.linalg.qr(np.column_stack([t, np.eye(4)]))
    normal = q[:, 1:4]
    return np.linalg.eigvalsh(normal.T @ hess @ normal)


def verify_near_symplectic(
    w: PolyForm,
    frame: FlatFrame | None = None,
    grid: GridSpec | None = None,
    puncture: Sequence[Sequence[float]] = (),
    samples: int = 100,
    step: float = 0.05,
) -> ZeroSetReport:
    """Check that ``w`` is near-symplectic on the grid box minus ``puncture``.

    Raises:
        NotClosed: dw is not identically zero.
        IndefiniteWedge: w^w is negative somewhere on the grid.
        DegenerateZero: a zero with rank < 3 outside the punctured points.
    """
    frame = frame or FlatFrame(4)
    grid = grid or GridSpec()
    dw = exterior_d(w)
    if not dw.is_zero():
        raise NotClosed("dw is not zero", dw=dw.to_text())
    selfdual = hodge_star(w, frame) == w

    fld = PolyTwoFormField(w)
    pts = grid.points()
    fvals = fld.wedge(pts)
    scale = max(1.0, float(np.max(np.abs(fvals))))
    bad = np.flatnonzero(fvals < -1e-12 * scale)
    if bad.size:
        raise IndefiniteWedge("w^w < 0 off the zero set", point=pts[bad[0]].tolist(), value=float(fvals[bad[0]]))

    F = lambda x: fld.value(x)
    J = lambda x: fld.jacobian(x)
    seeds = cont.seed_zeros(F, J, pts)

    degenerate = []
    good_seeds = []
    for s in seeds:
        if transversality_sample(J(s))["passed"]:
            good_seeds.append(s)
        elif not any(np.linalg.norm(s - d) < 1e-4 for d in degenerate):
            degenerate.append(s)
    punct = [np.asarray(p, dtype=float) for p in puncture]
    for d in degenerate:
        if not any(np.linalg.norm(d - p) < 1e-4 for p in punct):
            raise DegenerateZero("rank of the derivative drops below 3 at a zero", point=d.tolist())
    report = ZeroSetReport(closed=True, selfdual=selfdual, min_wedge=float(fvals.min()))
    report.degenerate_points = [tuple(float(v) for v in np.round(d, 9)) for d in degenerate]

    tracer = cont.Tracer(F, J, radius=grid.radius, step=step, max_step=step, exclude=punct + degenerate)
    for comp in cont.trace_zero_set(tracer, good_seeds):
        for arc in comp.arcs:
            kind = "sampled-arc"
            params = {"start": arc.points[0].tolist(), "end": arc.points[-1].tolist()}
            report.components.append(
                ZeroComponent(kind, params, arc.points, compact=arc.closed, end_reasons=arc.end_reasons)
            )

    eps = model_eps(w)
    if eps is not None:
        report.symbolic_components = _symbolic_components(eps, radius=grid.radius)
        _, _, _, H = model_polynomials()
        Hn = H.to_numpy()
        allpts = np.vstack([c.points for c in report.components]) if report.components else np.zeros((0, 4))
        if len(allpts):
            res = np.max(np.abs(np.column_stack([allpts[:, 1], allpts[:, 2], Hn(allpts) - float(eps)])))
            report.model_residual = float(res)
        if eps == 0:
            for c in report.components:
                p = c.points[np.argmax(np.abs(c.points[:, 0]))]
                c.parametrization["slope"] = float(p[3] / p[0])

    zero_pts = np.vstack([c.points for c in report.components]) if report.components else np.zeros((0, 4))
    if len(zero_pts):
        idx = np.linspace(0, len(zero_pts) - 1, min(samples, len(zero_pts))).round().astype(int)
        for p in zero_pts[idx]:
            jac = J(p)
            sample = transversality_sample(jac)
            sample["point"] = p.tolist()
            report.transversality.append(sample)
            tangent, _ = cont.null_direction(jac)
            ev = normal_hessian(fld.wedge_hessian(p), tangent)
            report.morse_bott.append({"point": p.tolist(), "eigenvalues": ev.tolist(), "passed": bool(ev.min() > 0)})
        for k, c in enumerate(report.components):
            signs = []
            for p, q in zip(c.points[1:-1:4], c.points[2::4]):
                t, _ = cont.null_direction(J(p))
                t = t if t @ (q - p) > 0 else -t
                o = canonical_orientation(w, p, t, tol=1e-7)
                signs.append(o.det_sign)
            report.orientations.append({"component": k, "det_signs": sorted(set(signs)),
                                        "constant": len(set(signs)) <= 1})
    return report


# -- orientation form --------------------------------------------------------

@dataclass
class OrientationForm:
    base_point: tuple
    tangent: tuple
    matrix: np.ndarray
    exact_matrix: Optional[tuple]
    symmetric: bool
    symmetry_residual: float
    trace: object
    det_sign: int
    canonical_tangent: tuple

    def to_dict(self) -> dict:
        return {
            "base_point": [float(v) for v in self.base_point],
            "tangent": [float(v) for v in self.tangent],
            "matrix": self.matrix.tolist(),
            "symmetric": self.symmetric,
            "trace": float(self.trace),
            "det_sign": self.det_sign,
        }


def _det(m):
    """Determinant by cofactor expansion (exact for Fractions)."""
    n = len(m)
    if n == 1:
        return m[0][0]
    total = 0
    for j in range(n):
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        total = total + (-1) ** j * m[0][j] * _det(minor)
    return total


def orientation_bilinear(w: PolyForm, point, tangent):
    """B[a][b] = (grad_{e_a} w)(tangent, e_b) at ``point``, plus the derivative tensors."""
    n = w.num_vars
    grads = []
    for a in range(n):
        e = VectorFieldPoly.constant([1 if i == a else 0 for i in range(n)])
        grads.append(to_matrix(covariant_derivative(w, e).evaluate(point)))
    B = [[sum(tangent[i] * grads[a][i][b] for i in range(n)) for b in range(n)] for a in range(n)]
    return B, grads


def canonical_orientation(w: PolyForm, z_point, z_tangent, tol: float = 1e-9) -> OrientationForm:
    """Orientation form A on the normal space of the zero set at ``z_point``.

    Exact when ``w``, ``z_point`` and ``z_tangent`` are rational.

    Raises:
        NotOnZeroSet: w does not vanish at the point.
        TangentNotInKernel: the derivative of w along the tangent is nonzero.
    """
    exact = w.is_exact() and all(isinstance(as_number(v), Fraction) for v in list(z_point) + list(z_tangent))
    conv = as_number if exact else float
    p = tuple(conv(v) for v in z_point)
    T = tuple(conv(v) for v in z_tangent)
    val = w.evaluate(p)
    scale = max(1.0, max(abs(float(v)) for v in p) ** 2)
    if exact and any(v != 0 for v in val) or not exact and max(abs(float(v)) for v in val) > tol * scale:
        raise NotOnZeroSet("w does not vanish at the point", point=[float(v) for v in p])
    B, grads = orientation_bilinear(w, p, T)
    along = [[sum(T[a] * grads[a][i][j] for a in range(4)) for j in range(4)] for i in range(4)]
    tnorm = math.sqrt(sum(float(t) ** 2 for t in T))
    if exact and any(v != 0 for row in along for v in row) or not exact and max(
        abs(float(v)) for row in along for v in row) > tol * tnorm * scale:
        raise TangentNotInKernel("tangent is not in the kernel of the derivative", tangent=[float(t) for t in T])

    n2 = sum(t * t for t in T)
    P = [[(1 if i == j else 0) - T[i] * T[j] / n2 for j in range(4)] for i in range(4)]
    drop = max(range(4), key=lambda i: abs(float(T[i])))
    cols = [[P[r][c] for r in range(4)] for c in range(4) if c != drop]
    A_rat = [[sum(u[a] * B[a][b] * v[b] for a in range(4) for b in range(4)) for v in cols] for u in cols]
    det = _det(A_rat)
    trace = sum(B[i][i] for i in range(4))
    asym = [A_rat[i][j] - A_rat[j][i] for i in range(3) for j in range(3)]
    if exact:
        symmetric = all(v == 0 for v in asym)
        sym_res = 0.0 if symmetric else max(abs(float(v)) for v in asym)
    else:
        sym_res = max(abs(float(v)) for v in asym)
        symmetric = sym_res <= tol * scale

    Bf = np.array([[float(v) for v in row] for row in B])
    Tf = np.array([float(t) for t in T])
    q, _ = np.linalg.qr(np.column_stack([Tf / np.linalg.norm(Tf), np.eye(4)]))
    N = q[:, 1:4]
    A = N.T @ Bf @ N
    if abs(float(det)) <= (0 if exact else 1e-14 * max(1.0, np.abs(A).max() ** 3)):
        sign = 0
    else:
        sign = 1 if det > 0 else -1
    canonical = tuple(T) if sign > 0 else tuple(-t for t in T)
    return OrientationForm(
        base_point=p, tangent=T, matrix=A,
        exact_matrix=tuple(tuple(r) for r in A_rat) if exact else None,
        symmetric=symmetric, symmetry_residual=sym_res, trace=trace,
        det_sign=sign, canonical_tangent=canonical,
    )


def hyperbola_rational_points(level_point=(1, 1), slopes=range(-4, 5)):
    """Rational points of {H = 1} obtained by intersecting lines through a rational point.

    Returns pairs (point, tangent) in R^4 with x2 = x3 = 0; the tangent is the
    gradient of H rotated by a quarter turn, a continuous orientation of the
    whole curve.
    """
    _, _, _, H = model_polynomials()
    x0 = (Fraction(level_point[0]), Fraction(level_point[1]))
    out = []
    for p in slopes:
        for q in (1, 2, 3):
            d = (Fraction(p), Fraction(q))
            hq = 3 * d[0] ** 2 - d[0] * d[1] - d[1] ** 2
            if hq == 0:
                continue
            g = (6 * x0[0] - x0[1], -x0[0] - 2 * x0[1])
            s = -(g[0] * d[0] + g[1] * d[1]) / hq
            pt = (x0[0] + s * d[0], 0, 0, x0[1] + s * d[1])
            out.append(pt)
    uniq = sorted(set(out))
    res = []
    for pt in uniq:
        assert H(pt) == 1
        g1, g4 = 6 * pt[0] - pt[3], -pt[0] - 2 * pt[3]
        res.append((pt, (-g4, 0, 0, g1)))
    return res


def hyperbola_branch(point) -> int:
    """Which branch of {H = eps} a point of the (x1, x4) plane lies on."""
    _, evecs = np.linalg.eigh(H_MATRIX)
    v = np.array([float(point[0]), float(point[3])])
    return 1 if v @ evecs[:, 1] > 0 else -1


# -- linear forms vanishing on a line ------------------------------------------

def linear_form_from_matrix(L) -> PolyForm:
    """Linear self-dual form sum_i (sum_j L[i][j] x_{j+2}) w_i, vanishing on the x1-axis."""
    x = PolyScalar.variables(4)
    ws = self_dual_basis()
    out = PolyForm.zero(4, 2)
    for i in range(3):
        c = sum((x[j + 1] * as_number(L[i][j]) for j in range(3)), PolyScalar.zero(4))
        out = out + ws[i] * c
    return out


def matrix_from_linear_form(w: PolyForm):
    """Orientation form at e1 with tangent e1, as an exact 3x3 matrix on span(e2, e3, e4)."""
    B, _ = orientation_bilinear(w, (0, 0, 0, 0), (1, 0, 0, 0))
    return tuple(tuple(B[a][b] for b in range(1, 4)) for a in range(1, 4))


def orientation_path(A0, A1, steps: int = 64):
    """Path of symmetric traceless matrices from A0 to A1 by eigenvalue interpolation.

    Eigenvalues are sorted and interpolated linearly, eigenframes are joined
    by a rotation geodesic.  When det A0 and det A1 have the same sign every
    point of the path is nondegenerate.

    Returns:
        list of 3x3 arrays (including both endpoints).
    """
    A0 = np.asarray(A0, dtype=float)
    A1 = np.asarray(A1, dtype=float)
    l0, q0 = np.linalg.eigh(A0)
    l1, q1 = np.linalg.eigh(A1)
    if np.linalg.det(q0) < 0:
        q0[:, 0] = -q0[:, 0]
    if np.linalg.det(q1) < 0:
        q1[:, 0] = -q1[:, 0]
    slerp = Slerp([0.0, 1.0], Rotation.from_matrix(np.stack([q0, q1])))
    path = []
    for t in np.linspace(0.0, 1.0, steps + 1):
        q = slerp([t]).as_matrix()[0]
        lam = (1 - t) * l0 + t * l1
        path.append(q @ np.diag(lam) @ q.T)
    return path


# -- Liouville primitives ----------------------------------------------------

def liouville_primitive(w: PolyForm, graded: bool = False) -> PolyForm:
    """A primitive of the closed form ``w`` from the Euler field.

    For coefficients homogeneous of degree d on a k-form, L_E w = (d + k) w, so
    d(i_E w)/(d + k) = w.  With ``graded`` each homogeneous part gets its own
    factor; otherwise mixed degrees are rejected.

    Raises:
        NotHomogeneous: mixed degrees and ``graded`` is False.
        NotClosed: w is not closed, so no primitive exists.
    """
    if w.degree == 0:
        raise ValueError("0-forms have no primitive")
    if w.is_zero():
        return PolyForm.zero(w.num_vars, w.degree - 1)
    degrees = sorted(w.coefficient_degrees())
    if len(degrees) > 1 and not graded:
        raise NotHomogeneous("coefficients are not homogeneous", degrees=degrees)
    E = VectorFieldPoly.euler(w.num_vars)
    lam = PolyForm.zero(w.num_vars, w.degree - 1)
    for d in degrees:
        lam = lam + interior_product(E, w.homogeneous_part(d)) * Fraction(1, d + w.degree)
    if exterior_d(lam) != w:
        raise NotClosed("form is not closed; the Euler primitive fails")
    return lam


# -- cutoff perturbation -----------------------------------------------------

def smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10 - 15 * s + 6 * s**2)


def smoothstep_d1(s):
    inside = (s > 0) & (s < 1)
    return np.where(inside, 30 * s**2 * (1 - s) ** 2, 0.0)


def smoothstep_d2(s):
    inside = (s > 0) & (s < 1)
    return np.where(inside, 60 * s * (1 - s) * (1 - 2 * s), 0.0)


@dataclass(frozen=True)
class LogRadialProfile:
    """Radial cutoff: 1 for r <= inner, 0 for r >= outer, quintic smoothstep in log r between."""

    inner: float
    outer: float

    def __post_init__(self):
        if not 0 < self.inner < self.outer:
            raise ValueError("need 0 < inner < outer")

    @property
    def log_width(self) -> float:
        return math.log(self.outer / self.inner)

    def _s(self, r):
        r = np.maximum(np.asarray(r, dtype=float), 1e-300)
        return np.log(r / self.inner) / self.log_width

    def value(self, r):
        return 1.0 - smoothstep(self._s(r))

    def derivative(self, r):
        # derivatives vanish off the transition band, so clamping r is harmless
        r = np.clip(np.asarray(r, dtype=float), self.inner, self.outer)
        return -smoothstep_d1(self._s(r)) / (r * self.log_width)

    def second_derivative(self, r):
        r = np.clip(np.asarray(r, dtype=float), self.inner, self.outer)
        L = self.log_width
        s = self._s(r)
        return (-smoothstep_d2(s) / L + smoothstep_d1(s)) / (r * r * L)

    def max_log_slope(self) -> float:
        """sup of r |rho'(r)|; the quintic smoothstep has peak slope 15/8."""
        return 1.875 / self.log_width

    def derivative_residual(self, n: int = 2001, h: float = 1e-6) -> float:
        """Max gap between the analytic derivative and a central difference."""
        r = np.exp(np.linspace(math.log(self.inner) - 0.2, math.log(self.outer) + 0.2, n))
        fd = (self.value(r + h) - self.value(r - h)) / (2 * h)
        return float(np.max(np.abs(fd - self.derivative(r))))


def radial_gradient(profile: LogRadialProfile, X):
    X = np.asarray(X, dtype=float)
    r = np.linalg.norm(X, axis=-1)
    safe = np.maximum(r, 1e-300)
    return (profile.derivative(r) / safe)[..., None] * X


def radial_hessian(profile: LogRadialProfile, X):
    X = np.asarray(X, dtype=float)
    r = np.linalg.norm(X, axis=-1)
    safe = np.maximum(r, 1e-300)
    u = X / safe[..., None]
    d1 = profile.derivative(r) / safe
    d2 = profile.second_derivative(r)
    outer = u[..., :, None] * u[..., None, :]
    eye = np.eye(X.shape[-1])
    return d2[..., None, None] * outer + d1[..., None, None] * (eye - outer)


class CutoffForm:
    """The 2-form d(lam + eps * rho * mu) sampled pointwise.

    Equals dlam + eps*(rho*dmu + drho ^ mu).  Everything except rho is an exact
    polynomial; rho and its first two derivatives are analytic.
    """

    def __init__(self, lam: PolyForm, mu: PolyForm, profile: LogRadialProfile, eps: float):
        if lam.degree != 1 or mu.degree != 1:
            raise ValueError("lam and mu must be 1-forms")
        self.lam, self.mu, self.profile, self.eps = lam, mu, profile, float(eps)
        self._dlam = exterior_d(lam).to_numpy()
        self._dlam_j = exterior_d(lam).jacobian_numpy()
        self._dmu = exterior_d(mu).to_numpy()
        self._dmu_j = exterior_d(mu).jacobian_numpy()
        self._mu = mu.to_numpy()
        self._mu_j = mu.jacobian_numpy()
        self._lam = lam.to_numpy()

    def primitive(self, X):
        X = np.asarray(X, dtype=float)
        rho = self.profile.value(np.linalg.norm(X, axis=-1))
        return self._lam(X) + self.eps * rho[..., None] * self._mu(X)

    def value(self, X):
        X = np.asarray(X, dtype=float)
        rho = self.profile.value(np.linalg.norm(X, axis=-1))
        g = radial_gradient(self.profile, X)
        mu = self._mu(X)
        wedge_part = np.stack([g[..., i] * mu[..., j] - g[..., j] * mu[..., i] for i, j in PAIRS], axis=-1)
        return self._dlam(X) + self.eps * (rho[..., None] * self._dmu(X) + wedge_part)

    def jacobian(self, X):
        X = np.asarray(X, dtype=float)
        rho = self.profile.value(np.linalg.norm(X, axis=-1))
        g = radial_gradient(self.profile, X)
        Hs = radial_hessian(self.profile, X)
        mu, muj = self._mu(X), self._mu_j(X)
        dmu = self._dmu(X)
        jac = self._dlam_j(X) + self.eps * (rho[..., None, None] * self._dmu_j(X) + dmu[..., :, None] * g[..., None, :])
        rows = []
        for i, j in PAIRS:
            rows.append(Hs[..., i, :] * mu[..., j, None] + g[..., i, None] * muj[..., j, :]
                        - Hs[..., j, :] * mu[..., i, None] - g[..., j, None] * muj[..., i, :])
        return jac + self.eps * np.stack(rows, axis=-2)

    def wedge(self, X):
        return wedge_density_values(self.value(X))

    def closedness_residual(self, X, h: float = 1e-4) -> float:
        """Max |dw| from central differences of the sampled components."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        comp = {p: k for k, p in enumerate(PAIRS)}
        worst = 0.0
        for x in X:
            D = np.zeros((4, 6))
            for a in range(4):
                e = np.zeros(4)
                e[a] = h
                D[a] = (self.value(x + e) - self.value(x - e)) / (2 * h)
            for i, j, k in basis_indices(4, 3):
                d = D[i, comp[(j, k)]] - D[j, comp[(i, k)]] + D[k, comp[(i, j)]]
                worst = max(worst, abs(d))
        return worst


@dataclass
class CutoffReport:
    eps: float
    antipodal_residual: float
    closedness_residual: float
    profile_derivative_residual: float
    inner_residual: float
    outer_residual: float
    min_wedge: float
    first_failure: Optional[list]
    components: List[ZeroComponent]
    transverse: bool

    @property
    def component_count(self) -> int:
        return len(self.components)

    @property
    def near_symplectic(self) -> bool:
        return self.first_failure is None and self.transverse

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "antipodal_residual": self.antipodal_residual,
            "closedness_residual": self.closedness_residual,
            "profile_derivative_residual": self.profile_derivative_residual,
            "inner_residual": self.inner_residual,
            "outer_residual": self.outer_residual,
            "min_wedge": self.min_wedge,
            "first_failure": self.first_failure,
            "near_symplectic": self.near_symplectic,
            "component_count": self.component_count,
            "components": [c.to_dict() for c in self.components],
            "transverse": self.transverse,
        }


def tube_samples(w: PolyForm, radius: float, offsets=(1e-3, 1e-2, 3e-2, 1e-1), directions: int = 6,
                 seed: int = 0) -> np.ndarray:
    """Points near the zero set of ``w``: traced zeros displaced along random normals.

    Sign changes of w^w caused by a perturbation concentrate near the zero set,
    where a box grid is too coarse to see them.
    """
    fld = PolyTwoFormField(w)
    pts = GridSpec((-radius, radius), 9).points()
    seeds = cont.seed_zeros(fld.value, fld.jacobian, pts)
    degenerate = [z for z in seeds if not transversality_sample(fld.jacobian(z))["passed"]]
    good = [z for z in seeds if transversality_sample(fld.jacobian(z))["passed"]]
    exclude = degenerate[:1]
    tracer = cont.Tracer(fld.value, fld.jacobian, radius=radius, step=0.02, max_step=0.02, exclude=exclude)
    zeros = [c.points for c in cont.trace_zero_set(tracer, good)]
    if not zeros:
        return np.zeros((0, w.num_vars))
    Z = np.vstack(zeros)
    rng = np.random.default_rng(seed)
    out = [Z]
    for z in Z:
        t, _ = cont.null_direction(fld.jacobian(z))
        for _ in range(directions):
            v = rng.normal(size=w.num_vars)
            v -= (v @ t) * t
            v /= np.linalg.norm(v)
            out.extend(z + o * v for o in offsets)
            out.extend(z - o * v for o in offsets)
    return np.vstack(out)


def cutoff_perturb(
    lam: PolyForm,
    mu: PolyForm,
    profile: LogRadialProfile,
    eps: float,
    radius: float = 3.0,
    grid_resolution: int = 9,
    pair_samples: int = 1000,
    seed: int = 0,
    expected_components: Optional[int] = 2,
    strict: bool = True,
    test_points: Optional[np.ndarray] = None,
    max_seeds: int = 120,
) -> CutoffReport:
    """Build and check w_eps = d(lam + eps * rho * mu).

    The near-symplectic test set is a box grid together with a tube around
    the zero set of d(lam) (pass ``test_points`` to reuse a precomputed tube).

    Raises (only when ``strict``):
        NearSymplecticFailure: w^w < 0 at a test point, or a traced zero is not transverse.
        ComponentCountMismatch: continuation finds a number of components other
            than ``expected_components`` (skip with None).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    form = CutoffForm(lam, mu, profile, eps)
    rng = np.random.default_rng(seed)
    samples = rng.uniform(-radius, radius, size=(pair_samples, 4))
    anti = float(np.max(np.abs(form.value(-samples) - form.value(samples))))
    closed_res = form.closedness_residual(samples[:50])

    # exact regimes: rho = 1 inside, rho = 0 outside
    base = exterior_d(lam).to_numpy()
    dmu = exterior_d(mu).to_numpy()
    dirs = samples / np.linalg.norm(samples, axis=-1, keepdims=True)
    inner_pts = dirs * rng.uniform(0, profile.inner, size=(pair_samples, 1))
    outer_pts = dirs * rng.uniform(profile.outer, radius, size=(pair_samples, 1))
    inner_res = float(np.max(np.abs(form.value(inner_pts) - base(inner_pts) - eps * dmu(inner_pts))))
    outer_res = float(np.max(np.abs(form.value(outer_pts) - base(outer_pts))))

    grid = GridSpec((-radius, radius), grid_resolution).points()
    if test_points is None:
        test_points = tube_samples(exterior_d(lam), radius, seed=seed)
    pts = np.vstack([grid, test_points])
    fvals = form.wedge(pts)
    scale = max(1.0, float(np.max(np.abs(fvals))))
    bad = np.flatnonzero(fvals < -1e-12 * scale)
    first_failure = pts[bad[0]].tolist() if bad.size else None

    # a second grid sized to the inner ball catches the small arcs there
    inner_grid = GridSpec((-profile.inner, profile.inner), grid_resolution).points()
    seeds = cont.seed_zeros(form.value, form.jacobian, grid, max_seeds=max_seeds) + cont.seed_zeros(
        form.value, form.jacobian, inner_grid, max_seeds=max_seeds // 2)
    tracer = cont.Tracer(form.value, form.jacobian, radius=radius, step=0.05)
    comps = cont.trace_zero_set(tracer, seeds)
    zero_comps = []
    transverse = True
    for comp in comps:
        P = comp.points
        ranks = [transversality_sample(form.jacobian(p))["rank"] for p in P[:: max(1, len(P) // 50)]]
        transverse &= all(r == 3 for r in ranks)
        reasons = tuple(r for a in comp.arcs for r in a.end_reasons)
        zero_comps.append(ZeroComponent("sampled-arc", {"num_arcs": len(comp.arcs)}, P,
                                        compact=comp.compact, end_reasons=reasons))
    report = CutoffReport(eps, anti, closed_res, profile.derivative_residual(), inner_res, outer_res,
                          float(fvals.min()), first_failure, zero_comps, transverse)
    if strict:
        if first_failure is not None:
            raise NearSymplecticFailure("w^w < 0 at a test point", point=first_failure, eps=eps,
                                        value=float(fvals[bad[0]]), count=report.component_count)
        if not transverse:
            raise NearSymplecticFailure("zero set is not transverse", eps=eps)
        if expected_components is not None and report.component_count != expected_components:
            raise ComponentCountMismatch(
                f"found {report.component_count} zero components", eps=eps, count=report.component_count)
    return report


@dataclass
class ThresholdResult:
    threshold: Optional[float]
    hi_passed: bool
    evaluations: List[dict]

    def to_dict(self) -> dict:
        return {"threshold": self.threshold, "hi_passed": self.hi_passed, "evaluations": self.evaluations}


def locate_eps_threshold(lam, mu, profile, lo: float, hi: float, iters: int = 10, **kwargs) -> ThresholdResult:
    """Bisect (geometrically) for the largest eps with two non-compact components.

    A value counts as passing when the perturbed form is near-symplectic on the
    test set and continuation finds exactly two non-compact components.  If
    even ``lo`` fails the threshold is None.
    """
    kwargs.setdefault("test_points", tube_samples(exterior_d(lam), kwargs.get("radius", 3.0)))
    evaluations = []

    def ok(eps):
        rep = cutoff_perturb(lam, mu, profile, eps, strict=False, **kwargs)
        good = rep.near_symplectic and rep.component_count == 2 and all(not c.compact for c in rep.components)
        evaluations.append({"eps": eps, "count": rep.component_count,
                            "near_symplectic": rep.near_symplectic, "passed": good})
        return good

    if not ok(lo):
        return ThresholdResult(None, False, evaluations)
    if ok(hi):
        return ThresholdResult(hi, True, evaluations)
    for _ in range(iters):
        mid = math.sqrt(lo * hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return ThresholdResult(lo, False, evaluations)


# -- convexity ---------------------------------------------------------------

@dataclass
class ConvexityReport:
    liouville: bool
    min_transversality: float
    primitive: PolyForm
    sphere: object = None

    def to_dict(self) -> dict:
        out = {"liouville": self.liouville, "min_transversality": self.min_transversality,
               "primitive": self.primitive.to_text()}
        if self.sphere is not None:
            out["sphere_near_contact"] = self.sphere.to_dict()
        return out


def convexity_check(w: PolyForm, V: VectorFieldPoly, sphere_radius=1, samples: int = 2000,
                    seed: int = 0, near_contact: bool = True) -> ConvexityReport:
    """Check that V is Liouville for w and transverse to the sphere of the given radius.

    The induced form i_V w is handed to the near-contact verification on the sphere.

    Raises:
        NotLiouville: L_V w != w.
        NotTransverse: <V, x> <= 0 somewhere on the sampled sphere.
    """
    if lie_derivative(V, w) != w:
        raise NotLiouville("L_V w differs from w")
    R = float(as_number(sphere_radius))
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(samples, w.num_vars))
    pts *= R / np.linalg.norm(pts, axis=-1, keepdims=True)
    comps = [c.to_numpy() for c in V.components]
    radial = sum(comps[i](pts) * pts[:, i] for i in range(w.num_vars)) / R
    if radial.min() <= 0:
        k = int(np.argmin(radial))
        raise NotTransverse("V is not outward along the sphere", point=pts[k].tolist())
    lam = interior_product(V, w)
    report = ConvexityReport(True, float(radial.min()), lam)
    if near_contact:
        from .near_contact import verify_near_contact_on_sphere

        report.sphere = verify_near_contact_on_sphere(lam, sphere_radius)
    return report
