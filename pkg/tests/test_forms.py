import itertools
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from asdlab.forms import (
    FlatFrame,
    PolyForm,
    VectorFieldPoly,
    covariant_derivative,
    exterior_d,
    hodge_star,
    inner_product,
    interior_product,
    lie_derivative,
    pullback_linear,
    self_dual_basis,
    wedge,
)
from asdlab.near_symplectic import build_model_form, model_polynomials
from asdlab.poly import PolyScalar
from conftest import forms, vector_fields

x1, x2, x3, x4 = PolyScalar.variables(4)


def transported_lie_derivative(X: VectorFieldPoly, a: PolyForm) -> PolyForm:
    """L_X a from coefficient transport: X(a_I) dx^I plus a_I times dx^I with one dx^i replaced by dX^i."""
    n = a.num_vars
    out = a.map_coefficients(X.apply)
    for I, c in a.components.items():
        for p, i in enumerate(I):
            for j in range(n):
                dXi = X.components[i].diff(j)
                if dXi.is_zero():
                    continue
                factors = [PolyForm.dx(n, k) for k in I]
                factors[p] = PolyForm.dx(n, j)
                term = PolyForm.scalar(c * dXi)
                for f in factors:
                    term = wedge(term, f)
                out = out + term
    return out


# -- examples ---------------------------------------------------------------------

def test_d_of_monomial_one_form():
    a = PolyForm(4, 1, {(1,): x1})
    assert exterior_d(a) == PolyForm.dx(4, 0, 1)


def test_model_form_is_closed_and_self_dual():
    for eps in (0, Fraction(1, 3), 1):
        w = build_model_form(eps)
        assert exterior_d(w).is_zero()
        assert hodge_star(w) == w


def test_star_of_dx12():
    assert hodge_star(PolyForm.dx(4, 0, 1)) == PolyForm.dx(4, 2, 3)


def test_self_dual_basis_is_fixed_and_orthogonal():
    ws = self_dual_basis()
    for i, j in itertools.product(range(3), repeat=2):
        assert inner_product(ws[i], ws[j]) == PolyScalar.constant(4, 2 if i == j else 0)
    for w in ws:
        assert hodge_star(w) == w


def test_interior_euler_on_dx12():
    E = VectorFieldPoly.euler(4)
    assert interior_product(E, PolyForm.dx(4, 0, 1)) == PolyForm.one_form([-x2, x1, 0 * x1, 0 * x1])


def test_euler_primitive_of_model_form():
    w = build_model_form(0)
    assert exterior_d(interior_product(VectorFieldPoly.euler(4), w) * Fraction(1, 4)) == w


def test_covariant_derivative_examples():
    a = PolyForm(4, 1, {(1,): x1})
    d1 = VectorFieldPoly.constant([1, 0, 0, 0])
    assert covariant_derivative(a, d1) == PolyForm.dx(4, 1)
    grad = covariant_derivative(build_model_form(0), d1)
    assert all(v == 0 for v in grad.evaluate((0, 0, 0, 0)))


def test_evaluate_examples():
    w = build_model_form(0)
    f3 = model_polynomials()[2]
    assert f3((1, 0, 0, 0)) == -3
    assert all(v == 0 for v in w.evaluate((0, 0, 0, 0)))
    assert self_dual_basis()[0].evaluate((3, -1, 2, 7)) == (1, 0, 0, 0, 0, 1)


def test_dilation_scales_exact_differential():
    y1, y2, y3 = PolyScalar.variables(3)
    da = exterior_d(PolyForm.scalar((y1**2 + y2**2 - y3**2) * Fraction(1, 2)))
    eps = Fraction(1, 5)
    M = [[eps if i == j else 0 for j in range(3)] for i in range(3)]
    assert pullback_linear(M, da) == da * eps**2


def test_antipodal_and_identity_pullbacks():
    w = build_model_form(1)
    minus = [[-1 if i == j else 0 for j in range(4)] for i in range(4)]
    ident = [[int(i == j) for j in range(4)] for i in range(4)]
    assert pullback_linear(minus, w) == w
    assert pullback_linear(ident, w) == w


def test_top_degree_d_is_zero():
    assert exterior_d(PolyForm(4, 4, {(0, 1, 2, 3): x1**3})).is_zero()


def test_text_round_trip_and_error_line():
    w = build_model_form(1)
    assert PolyForm.from_text(w.to_text()) == w
    with pytest.raises(ValueError, match="line 4"):
        PolyForm.from_text("form n=4 k=2\n# comment\n\n1,2 : x1 +* x2\n")


def test_non_positive_metric_rejected():
    with pytest.raises(ValueError):
        FlatFrame(4, ((1, 0, 0, 0), (0, -1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)))


# -- properties ---------------------------------------------------------------------

@given(forms())
def test_d_squared_is_zero(a):
    if a.degree < 3:
        assert exterior_d(exterior_d(a)).is_zero()


@given(forms(k=2))
def test_star_star_is_identity_on_two_forms(a):
    assert hodge_star(hodge_star(a)) == a


@given(forms(k=2), st.sampled_from([((2, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 2)),
                                    ((1, 0, 0, 0), (0, 4, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1))]))
def test_star_star_identity_for_diagonal_metric(a, metric):
    frame = FlatFrame(4, metric)
    assert hodge_star(hodge_star(a, frame), frame) == a


@given(forms(k=1), forms(k=2))
def test_leibniz(a, b):
    assert exterior_d(wedge(a, b)) == wedge(exterior_d(a), b) - wedge(a, exterior_d(b))


@given(forms(k=2, max_degree=1), forms(k=1, max_degree=1))
def test_leibniz_even_degree(a, b):
    assert exterior_d(wedge(a, b)) == wedge(exterior_d(a), b) + wedge(a, exterior_d(b))


@given(vector_fields(), forms(k=2))
def test_cartan_formula_matches_coefficient_transport(X, a):
    assert lie_derivative(X, a) == transported_lie_derivative(X, a)


@given(vector_fields(), forms(k=1), forms(k=2, max_degree=1))
def test_interior_product_is_graded_derivation(X, a, b):
    lhs = interior_product(X, wedge(a, b))
    rhs = wedge(interior_product(X, a), b) - wedge(a, interior_product(X, b))
    assert lhs == rhs


@given(vector_fields(), forms(k=2))
def test_interior_twice_vanishes(X, a):
    assert interior_product(X, interior_product(X, a)).is_zero()


@given(forms(k=1), st.sampled_from([[[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]],
                                    [[2, 1, 0, 0], [0, 1, 0, 0], [0, 0, 1, 3], [0, 0, 0, 1]]]))
def test_pullback_commutes_with_d(a, M):
    assert pullback_linear(M, exterior_d(a)) == exterior_d(pullback_linear(M, a))
