import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asdlab.errors import (
    DegenerateZero,
    IndefiniteWedge,
    NotClosed,
    NotHomogeneous,
    NotLiouville,
    NotOnZeroSet,
    TangentNotInKernel,
)
from asdlab.forms import PolyForm, VectorFieldPoly, exterior_d, interior_product, self_dual_basis
from asdlab.near_symplectic import (
    CutoffForm,
    LogRadialProfile,
    build_model_form,
    canonical_orientation,
    convexity_check,
    hyperbola_rational_points,
    linear_form_from_matrix,
    liouville_primitive,
    matrix_from_linear_form,
    model_eps,
    orientation_path,
    verify_near_symplectic,
)
from asdlab.poly import PolyScalar

x1, x2, x3, x4 = PolyScalar.variables(4)
w1, w2, w3 = self_dual_basis()


def test_negative_eps_rejected():
    with pytest.raises(ValueError):
        build_model_form(-1)


def test_model_eps_recognises_family_members():
    assert model_eps(build_model_form(Fraction(2, 3))) == Fraction(2, 3)
    assert model_eps(w1) is None


def test_eps1_zero_set_is_two_hyperbola_branches():
    rep = verify_near_symplectic(build_model_form(1))
    assert rep.passed
    assert [c.kind for c in rep.symbolic_components] == ["hyperbola-branch"] * 2
    assert rep.degenerate_points == []
    for comp in rep.components:
        p = comp.points
        H = 3 * p[:, 0] ** 2 - p[:, 0] * p[:, 3] - p[:, 3] ** 2
        assert np.abs(p[:, 1:3]).max() < 1e-9
        assert np.abs(H - 1).max() < 1e-9


def test_eps0_zero_set_is_two_lines_crossing_at_origin():
    rep = verify_near_symplectic(build_model_form(0), puncture=[(0, 0, 0, 0)])
    slopes = sorted(c.parametrization["slope"] for c in rep.symbolic_components)
    assert slopes == pytest.approx(sorted([(-1 - math.sqrt(13)) / 2, (-1 + math.sqrt(13)) / 2]), abs=1e-12)
    assert rep.passed


def test_eps0_flags_origin_without_puncture():
    with pytest.raises(DegenerateZero) as info:
        verify_near_symplectic(build_model_form(0))
    assert np.allclose(info.value.details["point"], 0, atol=1e-6)


def test_constant_symplectic_form_has_empty_zero_set():
    rep = verify_near_symplectic(w1)
    assert rep.passed and rep.components == []


def test_non_closed_form_rejected():
    with pytest.raises(NotClosed):
        verify_near_symplectic(w1 * x3)


def test_anti_self_dual_form_fails_wedge_positivity():
    asd = PolyForm(4, 2, {(0, 1): 1, (2, 3): -1})
    with pytest.raises(IndefiniteWedge):
        verify_near_symplectic(asd + w1 * Fraction(1, 2))


def test_orientation_examples():
    w = build_model_form(1)
    p, t = hyperbola_rational_points()[0]
    o = canonical_orientation(w, p, t)
    o_rev = canonical_orientation(w, p, tuple(-v for v in t))
    assert o.symmetric and o.trace == 0
    assert o.det_sign == -o_rev.det_sign != 0
    assert abs(np.trace(o.matrix)) < 1e-12


def test_orientation_errors():
    w = build_model_form(1)
    with pytest.raises(NotOnZeroSet):
        canonical_orientation(w, (0, 0, 0, 0), (1, 0, 0, 0))
    p, _ = hyperbola_rational_points()[0]
    with pytest.raises(TangentNotInKernel):
        canonical_orientation(w, p, (0, 1, 0, 0))


def test_liouville_primitive_examples():
    E = VectorFieldPoly.euler(4)
    assert liouville_primitive(w3) == interior_product(E, w3) * Fraction(1, 2)
    w = build_model_form(0)
    lam = liouville_primitive(w)
    assert lam == interior_product(E, w) * Fraction(1, 4)
    assert exterior_d(lam) == w
    assert liouville_primitive(PolyForm.zero(4, 2)).is_zero()


def test_liouville_primitive_mixed_degree():
    with pytest.raises(NotHomogeneous):
        liouville_primitive(build_model_form(1))
    assert exterior_d(liouville_primitive(build_model_form(1), graded=True)) == build_model_form(1)


def test_cutoff_form_inner_and_outer_regions():
    w0 = build_model_form(0)
    form = CutoffForm(liouville_primitive(w0), liouville_primitive(w3), LogRadialProfile(0.5, 1.5), 0.2)
    rng = np.random.default_rng(3)
    X = rng.normal(size=(200, 4))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    inner, outer = 0.4 * X, 2.0 * X
    target_inner = build_model_form(Fraction(1, 5)).to_numpy()(inner)
    assert np.abs(form.value(inner) - target_inner).max() < 1e-14
    assert np.abs(form.value(outer) - w0.to_numpy()(outer)).max() < 1e-12
    band = 1.0 * X
    assert np.abs(form.value(band) - form.value(-band)).max() < 1e-12
    assert form.closedness_residual(band[:20]) < 1e-6


def test_profile_derivative_matches_finite_differences():
    assert LogRadialProfile(0.5, 1.5).derivative_residual() < 1e-6


def test_convexity_examples():
    E = VectorFieldPoly.euler(4)
    rep = convexity_check(build_model_form(0), E * Fraction(1, 4))
    assert rep.liouville and rep.min_transversality > 0
    assert sorted(z["index"] for z in rep.sphere.to_dict()["zeros"]) == [-1, -1, 1, 1]
    rep1 = convexity_check(w1, E * Fraction(1, 2))
    assert rep1.sphere.to_dict()["zeros"] == []
    rotation = VectorFieldPoly((-x2, x1, 0 * x1, 0 * x1))
    with pytest.raises(NotLiouville):
        convexity_check(w1, rotation)


symmetric_traceless = st.tuples(*[st.integers(-4, 4)] * 5).map(
    lambda v: ((v[0], v[2], v[3]), (v[2], v[1], v[4]), (v[3], v[4], -v[0] - v[1])))


@given(symmetric_traceless)
def test_linear_forms_correspond_to_orientation_matrices(L):
    w = linear_form_from_matrix(L)
    assert exterior_d(w).is_zero()
    assert matrix_from_linear_form(w) == tuple(tuple(Fraction(v) for v in row) for row in L)


@given(symmetric_traceless, symmetric_traceless)
def test_same_determinant_sign_connects_through_nondegenerate_forms(L0, L1):
    d0, d1 = np.linalg.det(np.array(L0, float)), np.linalg.det(np.array(L1, float))
    if abs(d0) < 1e-9 or abs(d1) < 1e-9 or d0 * d1 < 0:
        return
    path = orientation_path(L0, L1, steps=32)
    dets = [np.linalg.det(A) for A in path]
    assert all(np.sign(d) == np.sign(d0) for d in dets)
    assert all(abs(np.trace(A)) < 1e-9 and np.allclose(A, A.T) for A in path)
