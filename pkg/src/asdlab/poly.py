"""Exact multivariate polynomials with rational coefficients."""

from __future__ import annotations

import re
from fractions import Fraction
from numbers import Rational, Real
from typing import Dict, Iterable, Mapping, Sequence, Tuple

import numpy as np

Exponent = Tuple[int, ...]


def as_number(value):
    """Coerce ints and rationals to Fraction; floats pass through unchanged."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (bool, np.bool_)):
        raise TypeError("boolean is not a coefficient")
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, Rational):
        return Fraction(value.numerator, value.denominator)
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, (Real, np.floating)):
        return float(value)
    raise TypeError(f"unsupported coefficient type {type(value).__name__}")


class PolyScalar:
    """A polynomial in ``num_vars`` variables, stored as exponent tuple -> coefficient.

    Zero coefficients are never stored, so two polynomials are equal exactly
    when their term dictionaries are equal.
    """

    __slots__ = ("num_vars", "_terms", "_hash")

    def __init__(self, num_vars: int, terms: Mapping[Exponent, object] | None = None):
        if num_vars < 1:
            raise ValueError("num_vars must be positive")
        self.num_vars = num_vars
        clean: Dict[Exponent, object] = {}
        for exp, coef in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != num_vars or any(e < 0 for e in exp):
                raise ValueError(f"bad exponent {exp} for {num_vars} variables")
            c = as_number(coef)
            if c != 0:
                c = clean.get(exp, 0) + c
                if c == 0:
                    clean.pop(exp, None)
                else:
                    clean[exp] = c
        self._terms = clean
        self._hash = None

    # -- constructors -------------------------------------------------------
    @classmethod
    def constant(cls, num_vars: int, value) -> "PolyScalar":
        return cls(num_vars, {(0,) * num_vars: value})

    @classmethod
    def zero(cls, num_vars: int) -> "PolyScalar":
        return cls(num_vars)

    @classmethod
    def variable(cls, num_vars: int, index: int) -> "PolyScalar":
        exp = [0] * num_vars
        exp[index] = 1
        return cls(num_vars, {tuple(exp): 1})

    @classmethod
    def variables(cls, num_vars: int) -> Tuple["PolyScalar", ...]:
        return tuple(cls.variable(num_vars, i) for i in range(num_vars))

    # -- basic protocol -----------------------------------------------------
    @property
    def terms(self) -> Dict[Exponent, object]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self) -> bool:
        return bool(self._terms)

    def is_exact(self) -> bool:
        return all(isinstance(c, Fraction) for c in self._terms.values())

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(e) for e in self._terms), default=-1)

    def homogeneous_degrees(self) -> set:
        return {sum(e) for e in self._terms}

    def homogeneous_part(self, d: int) -> "PolyScalar":
        return PolyScalar(self.num_vars, {e: c for e, c in self._terms.items() if sum(e) == d})

    def __eq__(self, other) -> bool:
        if isinstance(other, PolyScalar):
            return self.num_vars == other.num_vars and self._terms == other._terms
        if isinstance(other, (int, float, Fraction)):
            return self == PolyScalar.constant(self.num_vars, other)
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.num_vars, frozenset(self._terms.items())))
        return self._hash

    def _coerce(self, other) -> "PolyScalar":
        if isinstance(other, PolyScalar):
            if other.num_vars != self.num_vars:
                raise ValueError("variable count mismatch")
            return other
        return PolyScalar.constant(self.num_vars, other)

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other) -> "PolyScalar":
        other = self._coerce(other)
        out = dict(self._terms)
        for e, c in other._terms.items():
            out[e] = out.get(e, 0) + c
        return PolyScalar(self.num_vars, out)

    __radd__ = __add__

    def __neg__(self) -> "PolyScalar":
        return PolyScalar(self.num_vars, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other) -> "PolyScalar":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "PolyScalar":
        return self._coerce(other) - self

    def __mul__(self, other) -> "PolyScalar":
        if not isinstance(other, PolyScalar):
            k = as_number(other)
            return PolyScalar(self.num_vars, {e: c * k for e, c in self._terms.items()})
        other = self._coerce(other)
        out: Dict[Exponent, object] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return PolyScalar(self.num_vars, out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "PolyScalar":
        if n < 0:
            raise ValueError("negative power")
        result = PolyScalar.constant(self.num_vars, 1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def diff(self, index: int) -> "PolyScalar":
        out = {}
        for e, c in self._terms.items():
            if e[index]:
                ne = list(e)
                ne[index] -= 1
                out[tuple(ne)] = c * e[index]
        return PolyScalar(self.num_vars, out)

    def gradient(self) -> Tuple["PolyScalar", ...]:
        return tuple(self.diff(i) for i in range(self.num_vars))

    def substitute(self, images: Sequence["PolyScalar"]) -> "PolyScalar":
        """Compose with x_i -> images[i] (images share a common variable count)."""
        if len(images) != self.num_vars:
            raise ValueError("need one image per variable")
        target = images[0].num_vars
        powers = [dict() for _ in images]

        def power(i, k):
            cache = powers[i]
            if k not in cache:
                cache[k] = images[i] ** k
            return cache[k]

        result = PolyScalar.zero(target)
        for e, c in self._terms.items():
            term = PolyScalar.constant(target, c)
            for i, k in enumerate(e):
                if k:
                    term = term * power(i, k)
            result = result + term
        return result

    def compose_linear(self, matrix) -> "PolyScalar":
        """Return p(M x) for a square matrix M."""
        rows = [[as_number(v) for v in row] for row in matrix]
        n = self.num_vars
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ValueError("matrix shape does not match variable count")
        images = [
            PolyScalar(n, {tuple(1 if k == j else 0 for k in range(n)): rows[i][j] for j in range(n)})
            for i in range(n)
        ]
        return self.substitute(images)

    # -- evaluation ---------------------------------------------------------
    def __call__(self, point: Sequence) -> object:
        if len(point) != self.num_vars:
            raise ValueError("point dimension mismatch")
        vals = [as_number(p) for p in point]
        total = Fraction(0)
        for e, c in self._terms.items():
            term = c
            for v, k in zip(vals, e):
                if k:
                    term = term * v**k
            total = total + term
        return total

    def to_numpy(self):
        """Compile into a vectorised evaluator ``f(X)`` for X of shape (..., num_vars)."""
        ev = MonomialEvaluator([self])
        return lambda X: ev(X)[..., 0]

    # -- text ---------------------------------------------------------------
    def sorted_terms(self):
        """Terms ordered by descending total degree, then descending lex exponent."""
        return sorted(self._terms.items(), key=lambda ec: (-sum(ec[0]), tuple(-k for k in ec[0])))

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        pieces = []
        for e, c in self.sorted_terms():
            mono = "*".join(
                f"x{i + 1}" if k == 1 else f"x{i + 1}^{k}" for i, k in enumerate(e) if k
            )
            neg = c < 0
            mag = -c if neg else c
            coef = _format_coef(mag)
            if mono and mag == 1:
                body = mono
            elif mono:
                body = f"{coef}*{mono}"
            else:
                body = coef
            pieces.append(("- " if neg else "+ ") + body)
        text = " ".join(pieces)
        return text[2:] if text.startswith("+ ") else "-" + text[2:]

    def __repr__(self) -> str:
        return f"PolyScalar({self.num_vars}, '{self}')"

    @classmethod
    def parse(cls, text: str, num_vars: int) -> "PolyScalar":
        """Parse the format produced by ``str``: signed sums of ``coef*x1^2*x3`` terms."""
        s = text.replace(" ", "")
        if s in ("", "0"):
            return cls.zero(num_vars)
        if s[0] not in "+-":
            s = "+" + s
        terms: Dict[Exponent, object] = {}
        pos = 0
        while pos < len(s):
            m = _TERM.match(s, pos)
            if not m:
                raise ValueError(f"cannot parse polynomial {text!r} at offset {pos}")
            pos = m.end()
            coef = Fraction(1)
            exp = [0] * num_vars
            for factor in m.group(2).split("*"):
                v = re.fullmatch(r"x(\d+)(?:\^(\d+))?", factor)
                if v:
                    idx = int(v.group(1)) - 1
                    if not 0 <= idx < num_vars:
                        raise ValueError(f"variable {factor} out of range")
                    exp[idx] += int(v.group(2) or 1)
                else:
                    coef = coef * as_number(_parse_coef(factor))
            if m.group(1) == "-":
                coef = -coef
            key = tuple(exp)
            terms[key] = terms.get(key, 0) + coef
        return cls(num_vars, terms)


_NUM = r"\d+(?:\.\d*)?(?:[eE][+-]?\d+)?(?:/\d+)?"
_FACTOR = rf"(?:{_NUM}|x\d+(?:\^\d+)?)"
_TERM = re.compile(rf"([+-])({_FACTOR}(?:\*{_FACTOR})*)")


def _format_coef(c) -> str:
    if isinstance(c, Fraction):
        return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
    return repr(float(c))


def _parse_coef(token: str):
    if re.fullmatch(r"\d+(/\d+)?", token):
        return Fraction(token)
    return float(token)


class MonomialEvaluator:
    """Evaluate several polynomials at once as (monomial values) @ (coefficient matrix)."""

    def __init__(self, polys: Sequence[PolyScalar]):
        if not polys:
            raise ValueError("need at least one polynomial")
        self.num_vars = polys[0].num_vars
        monos = sorted({e for p in polys for e in p._terms})
        index = {e: k for k, e in enumerate(monos)}
        self.exps = np.array(monos, dtype=float).reshape(len(monos), self.num_vars)
        self.coefs = np.zeros((len(monos), len(polys)))
        for j, p in enumerate(polys):
            for e, c in p._terms.items():
                self.coefs[index[e], j] = float(c)

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        if not len(self.exps):
            return np.zeros(X.shape[:-1] + (self.coefs.shape[1],))
        powers = X[..., None, :] ** self.exps
        mono = powers[..., 0]
        for k in range(1, self.num_vars):
            mono = mono * powers[..., k]
        return mono @ self.coefs


def poly_from_callable(num_vars: int, build) -> PolyScalar:
    """Build a polynomial by calling ``build(*variables)``."""
    return build(*PolyScalar.variables(num_vars))


def lift(values: Iterable, num_vars: int) -> Tuple[PolyScalar, ...]:
    return tuple(v if isinstance(v, PolyScalar) else PolyScalar.constant(num_vars, v) for v in values)
