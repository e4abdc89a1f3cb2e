"""Near-contact 1-forms on R^3 and on round 3-spheres in R^4.

A near-contact form has transverse zeros, lam ^ dlam = f vol with f > 0 off
the zeros, and f has a nondegenerate minimum at each zero.  At a zero the
bilinear form A(xi, eta) = (grad_xi lam)(eta) is symmetric (dlam vanishes)
and indefinite; its determinant sign is the index of the zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np

from . import continuation as cont
from .errors import (
    BoundViolated,
    Degenerate,
    DegenerateZero,
    DefiniteA,
    IndexMismatch,
    NegativeF,
    NotAZero,
    OrientationMismatch,
    ZeroSetMismatch,
)
from .forms import PolyForm, exterior_d, top_coefficient, wedge
from .near_symplectic import GridSpec, LogRadialProfile, liouville_primitive, radial_gradient
from .poly import MonomialEvaluator, PolyScalar, as_number


def contact_density(lam: PolyForm) -> PolyScalar:
    """The function f with lam ^ dlam = f dx1^dx2^dx3."""
    if lam.num_vars != 3 or lam.degree != 1:
        raise ValueError("expected a 1-form on R^3")
    return top_coefficient(wedge(lam, exterior_d(lam)))


def gradient_matrix(lam: PolyForm):
    """Polynomial matrix D[i][j] = d lam_j / d x_i."""
    n = lam.num_vars
    comps = [lam[(j,)] for j in range(n)]
    return [[comps[j].diff(i) for j in range(n)] for i in range(n)]


def _eval_matrix(M, p):
    return [[entry(p) for entry in row] for row in M]


def _det3(m):
    return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))


def _is_rational(p) -> bool:
    return all(isinstance(as_number(v), Fraction) for v in p)


class OneFormField:
    """Vectorised values and Jacobian of a polynomial 1-form."""

    def __init__(self, lam: PolyForm):
        n = lam.num_vars
        comps = [lam[(j,)] for j in range(n)]
        self.n = n
        self._val = MonomialEvaluator(comps)
        self._jac = MonomialEvaluator([comps[j].diff(i) for j in range(n) for i in range(n)])

    def value(self, X):
        return self._val(X)

    def jacobian(self, X):
        """Array (..., n, n) with [j, i] = d lam_j / d x_i."""
        out = self._jac(X)
        return out.reshape(out.shape[:-1] + (self.n, self.n))


# -- zeros and index ---------------------------------------------------------

def snap_rational(p, max_denominator: int = 10**6):
    return tuple(Fraction(float(v)).limit_denominator(max_denominator) for v in p)


def find_zeros(lam: PolyForm, grid: GridSpec, tol: float = 1e-12, max_seeds: int = 200) -> List[tuple]:
    """Zeros of a polynomial 1-form inside the grid box.

    Newton from the grid points with smallest |lam|; converged points are
    snapped to nearby rationals and kept in exact form when lam vanishes
    there exactly.
    """
    fld = OneFormField(lam)
    pts = grid.points()
    seeds = cont.seed_zeros(fld.value, fld.jacobian, pts, tol=tol, max_seeds=max_seeds)
    lo, hi = grid.bounds
    zeros: List[tuple] = []
    for s in seeds:
        if np.any(s < lo - 1e-9) or np.any(s > hi + 1e-9):
            continue
        if any(np.linalg.norm(s - np.array([float(v) for v in z])) < 1e-7 for z in zeros):
            continue
        q = snap_rational(s)
        if all(lam[(j,)](q) == 0 for j in range(lam.num_vars)):
            zeros.append(q)
        else:
            zeros.append(tuple(float(v) for v in s))
    zeros.sort(key=lambda z: tuple(float(v) for v in z))
    return zeros


def zero_index(lam: PolyForm, p, tol: float = 1e-10) -> int:
    """Sign of det(grad lam) at the zero ``p``; exact for rational input.

    Raises:
        NotAZero: lam(p) != 0.
        Degenerate: the derivative is singular at p.
    """
    n = lam.num_vars
    exact = lam.is_exact() and _is_rational(p)
    pt = tuple(as_number(v) for v in p) if exact else tuple(float(v) for v in p)
    vals = [lam[(j,)](pt) for j in range(n)]
    if exact and any(v != 0 for v in vals) or not exact and max(abs(float(v)) for v in vals) > tol:
        raise NotAZero("lam does not vanish at the point", point=[float(v) for v in pt])
    D = _eval_matrix(gradient_matrix(lam), pt)
    det = _det3(D) if n == 3 else float(np.linalg.det(np.array(D, dtype=float)))
    if exact and det == 0 or not exact and abs(float(det)) < tol:
        raise Degenerate("derivative is singular at the zero", point=[float(v) for v in pt])
    return 1 if det > 0 else -1


# -- verification on R^3 -----------------------------------------------------

@dataclass
class NearContactReport:
    zeros: List[dict] = field(default_factory=list)
    positivity: float = 0.0
    orientation: int = 1

    @property
    def indices(self) -> List[int]:
        return [z["index"] for z in self.zeros]

    def to_dict(self) -> dict:
        return {"zeros": self.zeros, "positivity": self.positivity, "orientation": self.orientation}


def _zero_checks(point, D, dlam_res, hess, orientation: int) -> dict:
    """Shared per-zero checks on the derivative matrix and the Hessian of f."""
    D = np.asarray(D, dtype=float)
    sv = np.linalg.svd(D, compute_uv=False)
    if sv[-1] <= 1e-10 * max(1.0, sv[0]):
        raise DegenerateZero("zero is not transverse", point=point)
    A_eigs = np.linalg.eigvalsh((D + D.T) / 2)
    if A_eigs.min() > 0 or A_eigs.max() < 0:
        raise DefiniteA("A is definite at a zero", point=point, eigenvalues=A_eigs.tolist())
    h_eigs = np.linalg.eigvalsh(orientation * np.asarray(hess, dtype=float))
    if h_eigs.min() <= 0:
        raise DegenerateZero("f does not have a nondegenerate minimum", point=point,
                             eigenvalues=h_eigs.tolist())
    return {
        "point": point,
        "index": 1 if np.linalg.det(D) > 0 else -1,
        "dlam_residual": dlam_res,
        "hessian_eigenvalues": h_eigs.tolist(),
        "A_eigenvalues": A_eigs.tolist(),
    }


def verify_near_contact(lam: PolyForm, grid: GridSpec | None = None, orientation: int = 1) -> NearContactReport:
    """Verify the near-contact conditions for a polynomial 1-form on R^3.

    ``orientation`` = -1 verifies against the reversed volume form.

    Raises:
        NegativeF: f <= 0 at a grid point that is not a zero.
        DegenerateZero: a zero is not transverse or f is degenerate there.
        DefiniteA: A is definite at a zero.
    """
    grid = grid or GridSpec((-1.0, 1.0), 11, dimension=3)
    f = contact_density(lam) * orientation
    zeros = find_zeros(lam, grid)
    pts = grid.points()
    fv = f.to_numpy()(pts)
    if zeros:
        Z = np.array([[float(v) for v in z] for z in zeros])
        dist = np.min(np.linalg.norm(pts[:, None, :] - Z[None], axis=-1), axis=1)
        keep = dist > 1e-9
    else:
        keep = np.ones(len(pts), dtype=bool)
    positivity = float(fv[keep].min()) if keep.any() else math.inf
    if positivity <= 0:
        k = np.flatnonzero(keep)[np.argmin(fv[keep])]
        raise NegativeF("f is not positive off the zeros", point=pts[k].tolist(), value=float(fv[k]))

    report = NearContactReport(positivity=positivity, orientation=orientation)
    dlam = exterior_d(lam)
    Dpoly = gradient_matrix(lam)
    hess = [[f.diff(i).diff(j) for j in range(3)] for i in range(3)]
    for z in zeros:
        residual = max(abs(float(v)) for v in dlam.evaluate(z))
        D = _eval_matrix(Dpoly, z)
        H = _eval_matrix(hess, z)
        entry = _zero_checks([float(v) for v in z], D, residual, H, 1)
        entry["exact"] = _is_rational(z) and lam.is_exact()
        report.zeros.append(entry)
    return report


# -- verification on a 3-sphere ------------------------------------------------

def _sphere_points(n: int, dim: int, radius: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, dim))
    return radius * pts / np.linalg.norm(pts, axis=-1, keepdims=True)


def _tangent_basis(p: np.ndarray) -> np.ndarray:
    """Tangent frame N at p with (outward normal, N) positively oriented."""
    u = p / np.linalg.norm(p)
    q, _ = np.linalg.qr(np.column_stack([u, np.eye(len(p))]))
    N = q[:, 1:len(p)]
    if np.linalg.det(np.column_stack([u, N])) < 0:
        N[:, -1] *= -1
    return N


def verify_near_contact_on_sphere(lam: PolyForm, radius=1, samples: int = 4000, seed: int = 0,
                                  exclusion: float = 0.05) -> NearContactReport:
    """Verify that the restriction of a 1-form on R^4 to the sphere of given radius is near-contact.

    On the sphere lam ^ dlam = f vol_S with f = [x^ ^ lam ^ dlam] / R, where
    x^ = sum x_i dx_i; the same polynomial extends f to R^4.  Second
    derivatives along the sphere use the tangential Hessian
    P (Hess F - (grad F . x / R^2) I) P.
    """
    R = float(as_number(radius))
    n = lam.num_vars
    x = PolyScalar.variables(n)
    radial = PolyForm.one_form(list(x))
    F = top_coefficient(wedge(wedge(radial, lam), exterior_d(lam))) * (1 / as_number(radius))
    fld = OneFormField(lam)

    def tangential(X):
        X = np.asarray(X, dtype=float)
        v = fld.value(X)
        return np.concatenate([v - (v @ X) * X / R**2, [X @ X - R**2]])

    def tangential_jac(X):
        v, D = fld.value(X), fld.jacobian(X)
        vx = v @ X
        rows = D - (np.outer(X, D.T @ X + v) + vx * np.eye(n)) / R**2
        return np.vstack([rows, 2 * X])

    cands = _sphere_points(samples, n, R, seed)
    seeds = cont.seed_zeros(tangential, tangential_jac, cands, max_seeds=200)
    zeros: List[np.ndarray] = []
    for s in seeds:
        if not any(np.linalg.norm(s - z) < 1e-7 for z in zeros):
            zeros.append(s)
    zeros.sort(key=lambda z: tuple(z))

    Fn = F.to_numpy()
    fv = Fn(cands)
    keep = np.ones(len(cands), dtype=bool)
    for z in zeros:
        keep &= np.linalg.norm(cands - z, axis=-1) > exclusion * R
    positivity = float(fv[keep].min())
    if positivity <= 0:
        k = np.flatnonzero(keep)[np.argmin(fv[keep])]
        raise NegativeF("f is not positive off the zeros", point=cands[k].tolist(), value=float(fv[k]))

    grad = [F.diff(i).to_numpy() for i in range(n)]
    hess = [[F.diff(i).diff(j).to_numpy() for j in range(n)] for i in range(n)]
    dlam = exterior_d(lam).to_numpy()
    report = NearContactReport(positivity=positivity)
    for z in zeros:
        N = _tangent_basis(z)
        D = fld.jacobian(z).T  # [i, j] = d_i lam_j
        A = N.T @ D @ N
        g = np.array([gi(z) for gi in grad])
        Hm = np.array([[h(z) for h in row] for row in hess]) - (g @ z / R**2) * np.eye(n)
        antisym = N.T @ (D - D.T) @ N
        residual = float(np.abs(antisym).max())
        entry = _zero_checks(z.tolist(), A, residual, N.T @ Hm @ N, 1)
        entry["ambient_dlam"] = float(np.abs(dlam(z)).max())
        report.zeros.append(entry)
    return report


# -- generated instances -----------------------------------------------------

def quadratic_near_contact(signs: Sequence[int], S) -> PolyForm:
    """lam = da + mu with a = 1/2 sum s_i x_i^2 and dmu = i_B vol, B = diag(signs) S x.

    With S symmetric positive-definite and tr(diag(signs) S) = 0 (so B is
    divergence-free) one gets mu ^ dmu = 0 and f = x^T S x, so the origin is
    the only zero, with index equal to the sign of prod(signs).
    """
    S = [[as_number(v) for v in row] for row in S]
    if any(S[i][j] != S[j][i] for i in range(3) for j in range(3)):
        raise ValueError("S must be symmetric")
    M = [[signs[i] * S[i][j] for j in range(3)] for i in range(3)]
    if sum(M[i][i] for i in range(3)) != 0:
        raise ValueError("need tr(diag(signs) S) = 0 for a divergence-free field")
    x = PolyScalar.variables(3)
    a = sum((x[i] ** 2 * Fraction(signs[i], 2) for i in range(3)), PolyScalar.zero(3))
    B = [sum((x[j] * M[i][j] for j in range(3)), PolyScalar.zero(3)) for i in range(3)]
    beta = PolyForm(3, 2, {(1, 2): B[0], (0, 2): -B[1], (0, 1): B[2]})
    mu = liouville_primitive(beta)
    return exterior_d(PolyForm.scalar(a)) + mu


def random_quadratic_near_contact(seed: int, signs: Sequence[int] = (1, 1, -1), max_denominator: int = 8):
    """A generated instance of ``quadratic_near_contact`` with rational random S."""
    rng = np.random.default_rng(seed)
    neg = [i for i in range(3) if signs[i] < 0]
    pos = [i for i in range(3) if signs[i] > 0]
    while True:
        off = [Fraction(int(rng.integers(-4, 5)), max_denominator) for _ in range(3)]
        S = [[Fraction(0)] * 3 for _ in range(3)]
        S[0][1] = S[1][0] = off[0]
        S[0][2] = S[2][0] = off[1]
        S[1][2] = S[2][1] = off[2]
        # diagonal: the larger-count sign group is random, the other balances the trace
        big, small = (pos, neg) if len(pos) >= len(neg) else (neg, pos)
        for i in big:
            S[i][i] = Fraction(int(rng.integers(4, 13)), 4)
        total = sum(S[i][i] for i in big)
        for i in small:
            S[i][i] = total / len(small)
        if np.linalg.eigvalsh(np.array(S, dtype=float)).min() > 0.05:
            return quadratic_near_contact(signs, S), S


# -- local interpolation -----------------------------------------------------

def fibonacci_sphere(n: int) -> np.ndarray:
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    phi = np.pi * (1 + 5**0.5) * k
    r = np.sqrt(1 - z * z)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def _curl(J):
    """curl from a Jacobian array (..., 3, 3) with [j, i] = d_i lam_j."""
    return np.stack([J[..., 2, 1] - J[..., 1, 2], J[..., 0, 2] - J[..., 2, 0], J[..., 1, 0] - J[..., 0, 1]], -1)


def orientation_sign(lam: PolyForm, center=(0, 0, 0), radius: float = 1e-2, samples: int = 200) -> int:
    """Sign of f on a small punctured sphere around ``center``; 0 if it changes."""
    pts = np.asarray(center, dtype=float) + radius * fibonacci_sphere(samples)
    fv = contact_density(lam).to_numpy()(pts)
    if np.all(fv > 0):
        return 1
    if np.all(fv < 0):
        return -1
    return 0


@dataclass
class InterpolationReport:
    R: float
    delta: float
    c: float
    c_prime: float
    passed: bool
    worst_t: float
    worst_point: list
    num_points: int
    halvings: int
    profile: LogRadialProfile

    def to_dict(self) -> dict:
        return {
            "R": self.R, "delta": self.delta, "c": self.c, "c_prime": self.c_prime,
            "passed": self.passed, "worst_t": self.worst_t, "worst_point": self.worst_point,
            "num_points": self.num_points, "halvings": self.halvings,
            "inner_radius": self.profile.inner, "max_log_slope": self.profile.max_log_slope(),
        }


T_VALUES = (0.0, 0.25, 0.5, 0.75, 1.0)


def interpolation_bound(lam: PolyForm, lam_prime: PolyForm, R: float, delta: float,
                        t_values=T_VALUES, radii: int = 25, directions: int = 400, depth: float = 1e-3):
    """Evaluate c = min min(f, f')/r^2 and c' = min_t f_t/r^2 on a radial grid in B_R.

    lam_t = lam + t rho (lam' - lam), with rho the log-radial cutoff equal to 1
    on r <= R exp(-15/(8 delta)) and 0 on r >= R, so that r |rho'| <= delta.
    """
    profile = LogRadialProfile(R * math.exp(-1.875 / delta), R)
    r = R * np.geomspace(depth, 1.0, radii)
    X = (r[:, None, None] * fibonacci_sphere(directions)[None]).reshape(-1, 3)
    rr = np.linalg.norm(X, axis=-1)
    A, B = OneFormField(lam), OneFormField(lam_prime)
    la, lb = A.value(X), B.value(X)
    ca, cb = _curl(A.jacobian(X)), _curl(B.jacobian(X))
    f, fp = np.sum(la * ca, -1), np.sum(lb * cb, -1)
    c = float(np.min(np.minimum(f, fp) / rr**2))
    nu, cnu = lb - la, cb - ca
    rho = profile.value(rr)[:, None]
    grho = radial_gradient(profile, X)
    worst = (math.inf, 0.0, None)
    for t in t_values:
        lt = la + t * rho * nu
        clt = ca + t * (np.cross(grho, nu) + rho * cnu)
        q = np.sum(lt * clt, -1) / rr**2
        k = int(np.argmin(q))
        if q[k] < worst[0]:
            worst = (float(q[k]), t, X[k].tolist())
    return c, worst, profile, len(X)


def local_interpolation(lam: PolyForm, lam_prime: PolyForm, R: float = 1.0, delta: float = 0.25,
                        max_halvings: int = 30, **grid_kwargs) -> InterpolationReport:
    """Interpolate between two near-contact germs at the origin and check f_t >= (c/3) r^2.

    R is halved until the bound holds on the whole grid.

    Raises:
        NotAZero: either form does not vanish at 0.
        IndexMismatch, OrientationMismatch: preconditions fail.
        BoundViolated: no tried radius satisfies the bound (reports worst t and point).
    """
    origin = (0, 0, 0)
    i0, i1 = zero_index(lam, origin), zero_index(lam_prime, origin)
    if i0 != i1:
        raise IndexMismatch("indices differ at the origin", index=i0, index_prime=i1)
    o0, o1 = orientation_sign(lam), orientation_sign(lam_prime)
    if o0 == 0 or o0 != o1:
        raise OrientationMismatch("lam ^ dlam orientations differ near 0", sign=o0, sign_prime=o1)
    D0 = _eval_matrix(gradient_matrix(lam), origin)
    D1 = _eval_matrix(gradient_matrix(lam_prime), origin)
    if D0 != D1:
        raise ValueError("derivatives at 0 differ; normalise by a linear change first")
    worst = None
    for k in range(max_halvings + 1):
        c, worst, profile, npts = interpolation_bound(lam, lam_prime, R, delta, **grid_kwargs)
        if c > 0 and worst[0] >= c / 3:
            return InterpolationReport(R, delta, c, worst[0], True, worst[1], worst[2], npts, k, profile)
        R /= 2
    raise BoundViolated("f_t >= (c/3) r^2 fails for every tried R", c=c, c_prime=worst[0],
                        t=worst[1], point=worst[2])


# -- homotopy obstructions ---------------------------------------------------

@dataclass
class ObstructionVerdict:
    obstructed: bool
    kind: Optional[str] = None
    point: Optional[list] = None
    data: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"obstructed": self.obstructed, "kind": self.kind, "point": self.point, "data": self.data}


def homotopy_obstructions(lam: PolyForm, lam_prime: PolyForm, zero_list, probe_radius: float = 1e-2,
                          tol: float = 1e-10) -> ObstructionVerdict:
    """Compare indices and orientations of two forms at their common zeros.

    This checks only the necessary conditions for a near-contact homotopy;
    it does not construct one.

    Raises:
        ZeroSetMismatch: one of the forms does not vanish at a listed point.
    """
    for p in zero_list:
        for name, form in (("lam", lam), ("lam_prime", lam_prime)):
            try:
                zero_index(form, p, tol=tol)
            except NotAZero as exc:
                raise ZeroSetMismatch(f"{name} does not vanish at a listed zero", point=exc.details["point"])
            except Degenerate:
                pass
    for p in zero_list:
        i0, i1 = zero_index(lam, p, tol=tol), zero_index(lam_prime, p, tol=tol)
        if i0 != i1:
            return ObstructionVerdict(True, "index", [float(v) for v in p], {"index": i0, "index_prime": i1})
    for p in zero_list:
        o0 = orientation_sign(lam, p, probe_radius)
        o1 = orientation_sign(lam_prime, p, probe_radius)
        if o0 != o1:
            return ObstructionVerdict(True, "orientation", [float(v) for v in p],
                                      {"sign": o0, "sign_prime": o1})
    return ObstructionVerdict(False)
