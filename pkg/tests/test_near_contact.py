from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asdlab import fixtures
from asdlab.errors import (
    Degenerate,
    IndexMismatch,
    NegativeF,
    NotAZero,
    OrientationMismatch,
    ZeroSetMismatch,
)
from asdlab.forms import PolyForm, exterior_d, pullback_linear
from asdlab.near_contact import (
    contact_density,
    homotopy_obstructions,
    local_interpolation,
    orientation_sign,
    random_quadratic_near_contact,
    verify_near_contact,
    verify_near_contact_on_sphere,
    zero_index,
)
from asdlab.near_symplectic import build_model_form, liouville_primitive
from asdlab.poly import PolyScalar

x1, x2, x3 = PolyScalar.variables(3)
ORIGIN = (0, 0, 0)
REFLECTION = [[-1, 0, 0], [0, 1, 0], [0, 0, 1]]


def test_standard_contact_form_has_no_zeros():
    lam = fixtures.standard_contact()
    assert contact_density(lam) == PolyScalar.constant(3, 1)
    rep = verify_near_contact(lam)
    assert rep.zeros == [] and rep.positivity == 1.0


def test_closed_potential_is_not_near_contact():
    assert contact_density(fixtures.closed_potential()).is_zero()
    with pytest.raises(NegativeF):
        verify_near_contact(fixtures.closed_potential())


def test_quadratic_instance_has_single_index_minus_zero():
    rep = verify_near_contact(fixtures.index_minus())
    assert rep.indices == [-1]
    z = rep.to_dict()["zeros"][0]
    assert z["point"] == [0.0, 0.0, 0.0] and z["exact"]
    assert min(z["A_eigenvalues"]) < 0 < max(z["A_eigenvalues"])
    assert min(z["hessian_eigenvalues"]) > 0
    # f = x^T S x with S = diag(1, 1, 2): Hessian eigenvalues 2, 2, 4
    assert z["hessian_eigenvalues"] == pytest.approx([2, 2, 4], abs=1e-12)


def test_zero_index_examples():
    assert zero_index(fixtures.closed_potential(), ORIGIN) == -1
    radial = exterior_d(PolyForm.scalar((x1**2 + x2**2 + x3**2) * Fraction(1, 2)))
    assert zero_index(radial, ORIGIN) == 1
    with pytest.raises(NotAZero):
        zero_index(fixtures.standard_contact(), ORIGIN)
    with pytest.raises(Degenerate):
        zero_index(exterior_d(PolyForm.scalar(x1**3)), ORIGIN)


@given(st.sampled_from([[[0, -1, 0], [1, 0, 0], [0, 0, 1]], [[2, 1, 0], [0, 1, 0], [0, 0, 3]],
                        [[1, 0, 0], [0, 0, -1], [0, 1, 0]]]),
       st.sampled_from(["index-minus", "index-plus", "closed-potential"]))
def test_index_invariant_under_orientation_preserving_maps(M, name):
    lam = fixtures.one_form(name)
    assert zero_index(pullback_linear(M, lam), ORIGIN) == zero_index(lam, ORIGIN)


@given(st.integers(0, 10_000))
def test_generated_quadratic_instances_verify(seed):
    lam, S = random_quadratic_near_contact(seed)
    rep = verify_near_contact(lam)
    assert rep.indices == [-1]
    assert np.linalg.eigvalsh(np.array(S, dtype=float)).min() > 0


def test_generated_instances_are_reproducible():
    assert random_quadratic_near_contact(7)[0] == random_quadratic_near_contact(7)[0]


def test_local_interpolation_examples():
    lam = fixtures.index_minus()
    same = local_interpolation(lam, lam)
    assert same.passed and same.halvings == 0
    rep = local_interpolation(lam, fixtures.interpolation_partner())
    assert rep.passed and rep.num_points >= 10**4 and rep.c_prime >= rep.c / 3
    with pytest.raises(IndexMismatch):
        local_interpolation(lam, fixtures.index_plus())
    with pytest.raises(OrientationMismatch):
        local_interpolation(lam, pullback_linear(REFLECTION, lam))


def test_homotopy_obstruction_examples():
    lam = fixtures.index_minus()
    assert not homotopy_obstructions(lam, lam, [ORIGIN]).obstructed
    flipped = homotopy_obstructions(lam, pullback_linear(REFLECTION, lam), [ORIGIN])
    assert flipped.obstructed and flipped.kind == "orientation"
    index = homotopy_obstructions(lam, fixtures.index_plus(), [ORIGIN])
    assert index.obstructed and index.kind == "index"
    with pytest.raises(ZeroSetMismatch):
        homotopy_obstructions(lam, fixtures.standard_contact(), [ORIGIN])


def test_orientation_sign_of_reflection():
    lam = fixtures.index_minus()
    assert orientation_sign(lam) == 1
    assert orientation_sign(pullback_linear(REFLECTION, lam)) == -1


def test_sphere_indices_sum_to_zero():
    # the induced form on the unit 3-sphere has zeros whose indices add up to its Euler characteristic
    rep = verify_near_contact_on_sphere(liouville_primitive(build_model_form(0)), 1)
    indices = rep.indices
    assert len(indices) == 4 and sum(indices) == 0
    assert all(z["dlam_residual"] < 1e-10 for z in rep.to_dict()["zeros"])


def test_report_lists_concatenate_over_disjoint_domains():
    from asdlab.near_symplectic import GridSpec

    lam = fixtures.index_minus()
    whole = verify_near_contact(lam, GridSpec((-1, 1), 11, 3))
    left = verify_near_contact(lam, GridSpec((-1, -0.5), 5, 3))
    assert left.zeros == []
    assert [z["point"] for z in left.to_dict()["zeros"] + whole.to_dict()["zeros"]] == [[0.0, 0.0, 0.0]]
