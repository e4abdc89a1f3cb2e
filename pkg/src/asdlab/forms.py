"""Exterior calculus on flat R^n with polynomial coefficients.

Forms are stored on strictly increasing index tuples, so equality of two
forms is a syntactic comparison of their component dictionaries.  All
operations are exact when the coefficients are rational.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, Mapping, Sequence, Tuple

import numpy as np

from .poly import MonomialEvaluator, PolyScalar, as_number

Index = Tuple[int, ...]


def permutation_sign(seq: Sequence[int]) -> int:
    """Sign of the permutation sorting ``seq``; 0 if an entry repeats."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def basis_indices(n: int, k: int) -> Tuple[Index, ...]:
    """Increasing k-tuples of range(n) in lexicographic order."""
    return tuple(itertools.combinations(range(n), k))


class PolyForm:
    """A differential k-form on R^n with polynomial coefficients."""

    __slots__ = ("num_vars", "degree", "_comps")

    def __init__(self, num_vars: int, degree: int, components: Mapping[Iterable[int], object] | None = None):
        if num_vars not in range(1, 9):
            raise ValueError("num_vars out of range")
        if not 0 <= degree <= num_vars:
            raise ValueError(f"degree {degree} invalid on R^{num_vars}")
        self.num_vars = num_vars
        self.degree = degree
        comps: Dict[Index, PolyScalar] = {}
        for idx, coef in (components or {}).items():
            idx = tuple(int(i) for i in idx)
            if len(idx) != degree:
                raise ValueError(f"index {idx} does not have degree {degree}")
            if any(not 0 <= i < num_vars for i in idx):
                raise ValueError(f"index {idx} out of range")
            sign = permutation_sign(idx)
            if sign == 0:
                continue
            key = tuple(sorted(idx))
            if not isinstance(coef, PolyScalar):
                coef = PolyScalar.constant(num_vars, coef)
            elif coef.num_vars != num_vars:
                raise ValueError("coefficient variable count mismatch")
            total = comps.get(key, PolyScalar.zero(num_vars)) + coef * sign
            if total.is_zero():
                comps.pop(key, None)
            else:
                comps[key] = total
        self._comps = comps

    # -- constructors -------------------------------------------------------
    @classmethod
    def zero(cls, n: int, k: int) -> "PolyForm":
        return cls(n, k)

    @classmethod
    def scalar(cls, p) -> "PolyForm":
        return cls(p.num_vars, 0, {(): p})

    @classmethod
    def dx(cls, n: int, *idx: int) -> "PolyForm":
        """Basis form dx_{i1} ^ ... ^ dx_{ik} (0-based indices)."""
        return cls(n, len(idx), {idx: 1})

    @classmethod
    def one_form(cls, coefficients: Sequence) -> "PolyForm":
        n = len(coefficients)
        return cls(n, 1, {(i,): c for i, c in enumerate(coefficients) if not _is_zero(c)})

    # -- protocol -----------------------------------------------------------
    @property
    def components(self) -> Dict[Index, PolyScalar]:
        return dict(self._comps)

    def __getitem__(self, idx) -> PolyScalar:
        idx = tuple(idx)
        sign = permutation_sign(idx)
        if sign == 0:
            return PolyScalar.zero(self.num_vars)
        return self._comps.get(tuple(sorted(idx)), PolyScalar.zero(self.num_vars)) * sign

    def is_zero(self) -> bool:
        return not self._comps

    def is_exact(self) -> bool:
        return all(c.is_exact() for c in self._comps.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolyForm):
            return NotImplemented
        if self.num_vars != other.num_vars:
            return False
        if self.is_zero() and other.is_zero():
            return True
        return self.degree == other.degree and self._comps == other._comps

    def __hash__(self) -> int:
        return hash((self.num_vars, self.degree, frozenset(self._comps.items())))

    def _check(self, other: "PolyForm") -> None:
        if not isinstance(other, PolyForm):
            raise TypeError("expected a PolyForm")
        if other.num_vars != self.num_vars:
            raise ValueError("dimension mismatch")

    def __add__(self, other: "PolyForm") -> "PolyForm":
        self._check(other)
        if other.is_zero():
            return self
        if self.is_zero():
            return other
        if other.degree != self.degree:
            raise ValueError("cannot add forms of different degree")
        comps = dict(self._comps)
        for k, v in other._comps.items():
            comps[k] = comps.get(k, PolyScalar.zero(self.num_vars)) + v
        return PolyForm(self.num_vars, self.degree, comps)

    def __neg__(self) -> "PolyForm":
        return PolyForm(self.num_vars, self.degree, {k: -v for k, v in self._comps.items()})

    def __sub__(self, other: "PolyForm") -> "PolyForm":
        return self + (-other)

    def __mul__(self, scalar) -> "PolyForm":
        """Multiply by a number or a polynomial function."""
        if isinstance(scalar, PolyForm):
            raise TypeError("use wedge() for the exterior product")
        return PolyForm(self.num_vars, self.degree, {k: v * scalar for k, v in self._comps.items()})

    __rmul__ = __mul__

    def __xor__(self, other: "PolyForm") -> "PolyForm":
        return wedge(self, other)

    def map_coefficients(self, fn) -> "PolyForm":
        return PolyForm(self.num_vars, self.degree, {k: fn(v) for k, v in self._comps.items()})

    def coefficient_degrees(self) -> set:
        out = set()
        for c in self._comps.values():
            out |= c.homogeneous_degrees()
        return out

    def homogeneous_part(self, d: int) -> "PolyForm":
        return self.map_coefficients(lambda c: c.homogeneous_part(d))

    # -- evaluation ---------------------------------------------------------
    def evaluate(self, point: Sequence) -> Tuple:
        """Coefficients at ``point`` in lexicographic index order (exact for rational input)."""
        if len(point) != self.num_vars:
            raise ValueError("point dimension mismatch")
        zero = PolyScalar.zero(self.num_vars)
        return tuple(self._comps.get(idx, zero)(point) for idx in basis_indices(self.num_vars, self.degree))

    def to_numpy(self):
        """Vectorised evaluator returning an array (..., n_choose_k) in lexicographic order."""
        zero = PolyScalar.zero(self.num_vars)
        ev = MonomialEvaluator([self._comps.get(idx, zero) for idx in basis_indices(self.num_vars, self.degree)])
        return ev

    def jacobian_numpy(self):
        """Evaluator for d(components)/dx, shape (..., n_choose_k, n)."""
        zero = PolyScalar.zero(self.num_vars)
        idxs = basis_indices(self.num_vars, self.degree)
        n = self.num_vars
        ev = MonomialEvaluator([self._comps.get(idx, zero).diff(i) for idx in idxs for i in range(n)])

        def J(X):
            out = ev(X)
            return out.reshape(out.shape[:-1] + (len(idxs), n))

        return J

    # -- text ---------------------------------------------------------------
    def to_text(self) -> str:
        """Canonical text: a header line, then ``i,j : polynomial`` per nonzero component (1-based)."""
        lines = [f"form n={self.num_vars} k={self.degree}"]
        for idx in sorted(self._comps):
            label = ",".join(str(i + 1) for i in idx) if idx else "-"
            lines.append(f"{label} : {self._comps[idx]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PolyForm":
        lines = [(no, ln.strip()) for no, ln in enumerate(text.splitlines(), start=1)
                 if ln.strip() and not ln.strip().startswith("#")]
        if not lines or not lines[0][1].startswith("form"):
            no = lines[0][0] if lines else 1
            raise ValueError(f"line {no}: missing 'form n=.. k=..' header")
        head_no, head = lines[0]
        try:
            header = dict(tok.split("=") for tok in head.split()[1:])
            n, k = int(header["n"]), int(header["k"])
        except (KeyError, ValueError) as exc:
            raise ValueError(f"line {head_no}: malformed header {head!r}") from exc
        comps = {}
        for lineno, line in lines[1:]:
            if ":" not in line:
                raise ValueError(f"line {lineno}: expected 'indices : polynomial'")
            label, poly = (s.strip() for s in line.split(":", 1))
            try:
                idx = () if label == "-" else tuple(int(i) - 1 for i in label.split(","))
                comps[idx] = comps.get(idx, PolyScalar.zero(n)) + PolyScalar.parse(poly, n)
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from exc
        return cls(n, k, comps)

    def __str__(self) -> str:
        if not self._comps:
            return "0"
        parts = []
        for idx in sorted(self._comps):
            basis = "^".join(f"dx{i + 1}" for i in idx) or "1"
            parts.append(f"({self._comps[idx]})*{basis}")
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"PolyForm(n={self.num_vars}, k={self.degree}, {self})"


def _is_zero(c) -> bool:
    if isinstance(c, PolyScalar):
        return c.is_zero()
    return c == 0


@dataclass(frozen=True)
class FlatFrame:
    """A constant metric and orientation on R^n."""

    dimension: int
    metric: Tuple[Tuple[object, ...], ...] | None = None
    orientation: int = 1
    _gram: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dimension not in (3, 4):
            raise ValueError("frames are defined for R^3 and R^4")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        n = self.dimension
        if self.metric is None:
            g = tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n))
        else:
            g = tuple(tuple(as_number(v) for v in row) for row in self.metric)
        if len(g) != n or any(len(r) != n for r in g):
            raise ValueError("metric shape mismatch")
        if any(g[i][j] != g[j][i] for i in range(n) for j in range(n)):
            raise ValueError("metric must be symmetric")
        arr = np.array([[float(v) for v in r] for r in g])
        if np.linalg.eigvalsh(arr).min() <= 0:
            raise ValueError("metric must be positive-definite")
        object.__setattr__(self, "metric", g)
        object.__setattr__(self, "_gram", arr)

    @classmethod
    def standard(cls, n: int = 4) -> "FlatFrame":
        return cls(n)

    def is_identity(self) -> bool:
        n = self.dimension
        return all(self.metric[i][j] == (1 if i == j else 0) for i in range(n) for j in range(n))


@dataclass(frozen=True)
class VectorFieldPoly:
    """A vector field sum_i X^i d/dx_i with polynomial components."""

    components: Tuple[PolyScalar, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("empty vector field")
        n = next((c.num_vars for c in comps if isinstance(c, PolyScalar)), len(comps))
        comps = tuple(c if isinstance(c, PolyScalar) else PolyScalar.constant(n, c) for c in comps)
        if any(c.num_vars != len(comps) for c in comps):
            raise ValueError("component count must equal the dimension")
        object.__setattr__(self, "components", comps)

    @property
    def dimension(self) -> int:
        return len(self.components)

    @classmethod
    def euler(cls, n: int) -> "VectorFieldPoly":
        return cls(PolyScalar.variables(n))

    @classmethod
    def constant(cls, vector: Sequence) -> "VectorFieldPoly":
        n = len(vector)
        return cls(tuple(PolyScalar.constant(n, v) for v in vector))

    def __mul__(self, k) -> "VectorFieldPoly":
        return VectorFieldPoly(tuple(c * k for c in self.components))

    __rmul__ = __mul__

    def __neg__(self) -> "VectorFieldPoly":
        return self * -1

    def apply(self, p: PolyScalar) -> PolyScalar:
        """Directional derivative X(p)."""
        out = PolyScalar.zero(p.num_vars)
        for i, c in enumerate(self.components):
            if not c.is_zero():
                out = out + c * p.diff(i)
        return out


# -- operations ---------------------------------------------------------------

def wedge(a: PolyForm, b: PolyForm) -> PolyForm:
    if a.num_vars != b.num_vars:
        raise ValueError("dimension mismatch")
    n = a.num_vars
    k = a.degree + b.degree
    if k > n:
        raise ValueError(f"degree {k} exceeds dimension {n}")
    comps: Dict[Index, PolyScalar] = {}
    for ia, ca in a.components.items():
        for ib, cb in b.components.items():
            idx = ia + ib
            sign = permutation_sign(idx)
            if sign == 0:
                continue
            key = tuple(sorted(idx))
            comps[key] = comps.get(key, PolyScalar.zero(n)) + ca * cb * sign
    return PolyForm(n, k, comps)


def exterior_d(a: PolyForm) -> PolyForm:
    n = a.num_vars
    if a.degree >= n:
        return PolyForm.zero(n, n)
    comps: Dict[Index, PolyScalar] = {}
    for idx, c in a.components.items():
        for i in range(n):
            if i in idx:
                continue
            dc = c.diff(i)
            if dc.is_zero():
                continue
            full = (i,) + idx
            key = tuple(sorted(full))
            comps[key] = comps.get(key, PolyScalar.zero(n)) + dc * permutation_sign(full)
    return PolyForm(n, a.degree + 1, comps)


def _minor_det(m, rows: Index, cols: Index):
    """Exact determinant of the submatrix m[rows, cols]."""
    k = len(rows)
    if k == 0:
        return Fraction(1)
    total = 0
    for perm in itertools.permutations(range(k)):
        term = permutation_sign(perm)
        for r, p in zip(rows, perm):
            term = term * m[r][cols[p]]
        total = total + term
    return total


def _inverse(m):
    """Inverse of a small square matrix by Gauss-Jordan (exact for Fractions)."""
    n = len(m)
    a = [list(row) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(m)]
    for col in range(n):
        piv = next(r for r in range(col, n) if a[r][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        p = a[col][col]
        a[col] = [v / p for v in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [row[n:] for row in a]


def _sqrt_exact(q):
    """Square root of a non-negative number, exact when q is a rational square."""
    if isinstance(q, Fraction):
        num, den = q.numerator, q.denominator
        rn, rd = _isqrt(num), _isqrt(den)
        if rn * rn == num and rd * rd == den:
            return Fraction(rn, rd)
    return float(q) ** 0.5


def _isqrt(v: int) -> int:
    import math
    return math.isqrt(v)


def hodge_star(a: PolyForm, frame: FlatFrame | None = None) -> PolyForm:
    """Hodge star for a constant metric.

    Indices are raised with the inverse metric (minors of g^{-1}), then
    contracted against sqrt(det g) times the Levi-Civita symbol.  The result is
    exact whenever det g is a rational square, in particular for the identity.
    """
    n = a.num_vars
    frame = frame or FlatFrame(n)
    if frame.dimension != n:
        raise ValueError("frame dimension mismatch")
    k = a.degree
    g = frame.metric
    ginv = _inverse([list(r) for r in g])
    vol = _sqrt_exact(_minor_det(g, tuple(range(n)), tuple(range(n)))) * frame.orientation
    identity = frame.is_identity()
    comps: Dict[Index, PolyScalar] = {}
    for I, c in a.components.items():
        targets = [I] if identity else basis_indices(n, k)
        for J in targets:
            raise_factor = Fraction(1) if identity else _minor_det(ginv, I, J)
            if raise_factor == 0:
                continue
            comp = tuple(i for i in range(n) if i not in J)
            sign = permutation_sign(J + comp)
            comps[comp] = comps.get(comp, PolyScalar.zero(n)) + c * (raise_factor * sign * vol)
    return PolyForm(n, n - k, comps)


def interior_product(X: VectorFieldPoly, a: PolyForm) -> PolyForm:
    n = a.num_vars
    if X.dimension != n:
        raise ValueError("dimension mismatch")
    if a.degree == 0:
        raise ValueError("cannot contract a 0-form")
    comps: Dict[Index, PolyScalar] = {}
    for idx, c in a.components.items():
        for p, i in enumerate(idx):
            xi = X.components[i]
            if xi.is_zero():
                continue
            rest = idx[:p] + idx[p + 1:]
            term = xi * c * (-1 if p % 2 else 1)
            comps[rest] = comps.get(rest, PolyScalar.zero(n)) + term
    return PolyForm(n, a.degree - 1, comps)


def covariant_derivative(a: PolyForm, direction: VectorFieldPoly) -> PolyForm:
    """Flat-connection derivative: differentiate each coefficient along ``direction``."""
    if direction.dimension != a.num_vars:
        raise ValueError("dimension mismatch")
    return a.map_coefficients(direction.apply)


def lie_derivative(X: VectorFieldPoly, a: PolyForm) -> PolyForm:
    """L_X a via Cartan's formula."""
    out = PolyForm.zero(a.num_vars, a.degree)
    if a.degree < a.num_vars:
        out = out + interior_product(X, exterior_d(a))
    if a.degree > 0:
        out = out + exterior_d(interior_product(X, a))
    return out


def pullback_linear(M, a: PolyForm) -> PolyForm:
    """Pullback along the linear map x -> M x."""
    n = a.num_vars
    rows = [[as_number(v) for v in row] for row in M]
    if len(rows) != n or any(len(r) != n for r in rows):
        raise ValueError("matrix must be square of the form's dimension")
    comps: Dict[Index, PolyScalar] = {}
    for I, c in a.components.items():
        c_new = c.compose_linear(rows)
        for J in basis_indices(n, a.degree):
            det = _minor_det(rows, I, J)
            if det == 0:
                continue
            comps[J] = comps.get(J, PolyScalar.zero(n)) + c_new * det
    return PolyForm(n, a.degree, comps)


def inner_product(a: PolyForm, b: PolyForm) -> PolyScalar:
    """Pointwise flat inner product sum_I a_I b_I over increasing I."""
    if a.num_vars != b.num_vars:
        raise ValueError("dimension mismatch")
    out = PolyScalar.zero(a.num_vars)
    if a.degree != b.degree and not (a.is_zero() or b.is_zero()):
        raise ValueError("degree mismatch")
    bc = b.components
    for I, c in a.components.items():
        if I in bc:
            out = out + c * bc[I]
    return out


def top_coefficient(a: PolyForm) -> PolyScalar:
    """The function f with a = f dx_1 ^ ... ^ dx_n (a must be top degree or zero)."""
    n = a.num_vars
    if a.is_zero():
        return PolyScalar.zero(n)
    if a.degree != n:
        raise ValueError("not a top-degree form")
    return a[tuple(range(n))]


def self_dual_basis() -> Tuple[PolyForm, PolyForm, PolyForm]:
    """The standard basis (omega_1, omega_2, omega_3) of self-dual 2-forms on R^4."""
    n = 4
    w1 = PolyForm(n, 2, {(0, 1): 1, (2, 3): 1})
    w2 = PolyForm(n, 2, {(0, 2): 1, (1, 3): -1})
    w3 = PolyForm(n, 2, {(0, 3): 1, (1, 2): 1})
    return w1, w2, w3


def self_dual_part(a: PolyForm, frame: FlatFrame | None = None) -> PolyForm:
    return (a + hodge_star(a, frame)) * Fraction(1, 2)


def anti_self_dual_part(a: PolyForm, frame: FlatFrame | None = None) -> PolyForm:
    return (a - hodge_star(a, frame)) * Fraction(1, 2)
