from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given

from asdlab.poly import PolyScalar, as_number
from conftest import polys, rational_point


def test_zero_coefficients_are_dropped():
    x, y = PolyScalar.variables(2)
    assert (x + y - x).terms == {(0, 1): 1}
    assert (x - x).is_zero()


def test_coercion_keeps_rationals_exact_and_floats_inexact():
    assert isinstance(as_number(3), Fraction)
    assert as_number("2/6") == Fraction(1, 3)
    assert isinstance(as_number(0.5), float)
    assert not PolyScalar(1, {(1,): 0.5}).is_exact()
    with pytest.raises(TypeError):
        as_number(True)


def test_diff_and_degree():
    x, y, z = PolyScalar.variables(3)
    p = x**2 * y - 3 * z
    assert p.diff(0) == 2 * x * y
    assert p.diff(2) == PolyScalar.constant(3, -3)
    assert p.degree() == 3


def test_compose_linear_swaps_variables():
    x, y = PolyScalar.variables(2)
    assert (x**2 + 3 * y).compose_linear([[0, 1], [1, 0]]) == y**2 + 3 * x


def test_parse_rejects_garbage():
    with pytest.raises(ValueError):
        PolyScalar.parse("x1 +* 2", 2)
    with pytest.raises(ValueError):
        PolyScalar.parse("x5", 2)


@given(polys())
def test_text_round_trip(p):
    assert PolyScalar.parse(str(p), 4) == p


@given(polys(), polys())
def test_product_rule(p, q):
    for i in range(4):
        assert (p * q).diff(i) == p.diff(i) * q + p * q.diff(i)


@given(polys(), rational_point(4))
def test_numpy_evaluation_matches_exact(p, point):
    exact = float(p(point))
    fast = p.to_numpy()(np.array([float(v) for v in point]))
    assert fast == pytest.approx(exact, rel=1e-12, abs=1e-12)
