import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asdlab import fixtures
from asdlab.errors import WrongZeroCount
from asdlab.forms import PolyForm
from asdlab.ode import SphereIntegrator, dopri_step
from asdlab.overtwisted import (
    SphereField,
    c1_rate,
    check_admissible,
    exact_cycle,
    locate_eps_max,
    long_time_height,
    overtwisted_family,
    overtwisted_lambda,
    potential_form,
)
from asdlab.poly import PolyScalar

x1, x2, x3 = PolyScalar.variables(3)
ROT = fixtures.overtwisted("rotational")


def rotation(y):
    return np.array([-y[1], y[0], 0.0])


def test_dopri_step_is_fifth_order_on_exponential():
    y1, _ = dopri_step(lambda y: y, np.array([1.0]), 0.1)
    assert abs(y1[0] - math.exp(0.1)) < 1e-9


def test_rotation_period_is_two_pi_with_small_drift():
    integ = SphereIntegrator(rotation)
    run = integ.run([1, 0, 0], 20.0, (lambda y: y[1], lambda y: y[0] > 0), 0, min_time=1e-9)
    assert run.crossing is not None
    assert run.crossing.time == pytest.approx(2 * math.pi, abs=1e-10)
    assert run.max_drift <= 1e-12


def test_reversed_direction_runs_backwards():
    run = SphereIntegrator(rotation, direction=-1).run([1, 0, 0], 1.0, record=True)
    assert run.stopped == "time_limit"
    assert np.allclose(run.path[-1], [math.cos(1.0), -math.sin(1.0), 0], atol=1e-10)


def test_eps_zero_is_degenerate_and_skips_cycle_search():
    r = overtwisted_family(ROT.mu, ROT.C, 0)
    assert r.degenerate and r.periodic_orbit is None
    assert overtwisted_lambda(ROT.mu, ROT.C, 0) == potential_form()


def test_naive_recipe_has_extra_zeros():
    fx = fixtures.overtwisted("direct")
    with pytest.raises(WrongZeroCount) as info:
        overtwisted_family(fx.mu, fx.C, Fraction(1, 8))
    assert info.value.details["count"] != 2


def test_negative_eps_rejected():
    with pytest.raises(ValueError):
        overtwisted_lambda(ROT.mu, ROT.C, -1)


def test_admissibility_rejections():
    with pytest.raises(ValueError):
        check_admissible(PolyForm.one_form([x1, 0 * x1, 0 * x1]), ROT.C)
    with pytest.raises(ValueError):
        check_admissible(ROT.mu, ROT.C + x3**3)
    with pytest.raises(ValueError):
        check_admissible(ROT.mu, PolyScalar.zero(3))
    check_admissible(ROT.mu, ROT.C)


@given(st.integers(0, 2**32 - 1))
def test_divergence_two_routes_agree(seed):
    X = SphereField(overtwisted_lambda(ROT.mu, ROT.C, Fraction(1, 4)))
    x = np.random.default_rng(seed).normal(size=3)
    x /= np.linalg.norm(x)
    assert X.curl_divergence(x) == pytest.approx(np.trace(X.tangent_linearization(x)), abs=1e-8)


@pytest.fixture(scope="module")
def quarter():
    return overtwisted_family(ROT.mu, ROT.C, Fraction(1, 4))


def test_two_sinks_at_quarter(quarter):
    zs = quarter.zeros_on_sphere
    assert len(zs) == 2
    assert all(z.residual < 1e-10 and z.divergence < 0 for z in zs)
    assert sorted(round(z.point[2]) for z in zs) == [-1, 1]


def test_cycle_matches_rotational_oracle(quarter):
    o = quarter.periodic_orbit
    h, period, mult = exact_cycle(Fraction(1, 4))
    assert o.residual <= 1e-6 and o.attracting and o.time_direction == -1
    assert o.height == pytest.approx(h, abs=1e-9)
    assert o.period == pytest.approx(period, rel=1e-8)
    assert o.forward_multiplier == pytest.approx(mult, rel=1e-4)
    assert o.drift <= 1e-12
    assert o.long_time_height == pytest.approx(h, abs=1e-6)


def test_long_time_height_converges_from_below(quarter):
    h, _, _ = exact_cycle(Fraction(1, 4))
    sinks = [z.point for z in quarter.zeros_on_sphere]
    X = SphereField(overtwisted_lambda(ROT.mu, ROT.C, Fraction(1, 4)))
    assert long_time_height(X, h - 0.05, -1, sinks) == pytest.approx(h, abs=1e-6)


def test_c1_distance_shrinks_linearly():
    slope, eps, dist = c1_rate(ROT.mu, ROT.C)
    assert slope == pytest.approx(1.0, abs=0.1)
    assert all(a > b for a, b in zip(dist, dist[1:]))


def test_eps_max_is_bracketed_near_one():
    bracket = locate_eps_max(ROT.mu, ROT.C, iters=6)
    assert bracket.lower < bracket.upper
    assert 0.5 < bracket.lower <= 1.0 <= bracket.upper < 2.0
