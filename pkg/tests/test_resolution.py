import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asdlab import fixtures
from asdlab.errors import InvalidInput, NonPositiveArea, SingularJacobian
from asdlab.neck import CapOperator, NeckConfig, embed_lowest
from asdlab.resolution import (
    ModelPotential,
    PeriodFamily,
    ResolutionCap,
    curve_integral,
    exceptional_integral,
    exceptional_period,
    kahler_area_constant,
    period_jacobian,
    period_map,
)

# frozen analytic value: kappa = p^2 and the curve integral is pi kappa, halved
AREA_AT_ONE = math.pi / 2


def test_area_constant_at_unit_size():
    rep = kahler_area_constant(1.0)
    assert rep.A == pytest.approx(AREA_AT_ONE, abs=1e-10)
    assert rep.kappa == pytest.approx(1.0, abs=1e-15)
    assert rep.psh_margin > 0
    assert rep.refinement_gap < 1e-6


def test_simpson_richardson_ratio_is_sixteen():
    assert kahler_area_constant(1.0, n=8).richardson_ratio == pytest.approx(16, rel=0.05)


def test_area_is_linear_in_potential_scale():
    base = kahler_area_constant(1.0).A
    assert kahler_area_constant(1.0, potential_scale=3.0).A == pytest.approx(3 * base, rel=1e-12)


@given(st.floats(0.1, 5.0))
def test_area_scales_with_square_of_size(p):
    assert kahler_area_constant(p).A == pytest.approx(AREA_AT_ONE * p * p, rel=1e-9)


def test_potential_is_flat_outside_gluing_region():
    pot = ModelPotential(1.0)
    s = np.linspace(7.0, 20.0, 50)
    assert np.allclose(pot.psi(s), s, atol=0) and np.allclose(pot.psi_prime(s), 1.0, atol=0)
    assert curve_integral(pot, 512) == pytest.approx(math.pi, rel=1e-10)


def test_area_input_errors():
    with pytest.raises(InvalidInput):
        kahler_area_constant(0.0)
    with pytest.raises(InvalidInput):
        kahler_area_constant(1.0, n=7)
    with pytest.raises(NonPositiveArea):
        kahler_area_constant(1.0, potential_scale=-1.0)
    with pytest.raises(NonPositiveArea):
        ResolutionCap(0.0, CapOperator.zero(fixtures.ladder()))


def test_zero_caps_give_exact_leading_term():
    basis = fixtures.ladder()
    A = kahler_area_constant(1.0).A
    rcap = ResolutionCap(A, CapOperator.zero(basis))
    psi = embed_lowest([0.7, 0.2, -0.1], basis)
    for T in (3.0, 6.0, 9.0):
        v = exceptional_period(NeckConfig(T, basis), rcap, psi)
        assert v == pytest.approx(2 * A * 0.7 * math.exp(-2 * T), rel=1e-14)


def test_exceptional_integral_slopes():
    cfg = fixtures.neck_config((2, 3, 4), seed=0)
    A = kahler_area_constant(1.0).A
    rcap = ResolutionCap.random_high(A, CapOperator.random(cfg.basis, 9), seed=5)
    amps = fixtures.incoming(cfg.basis, 5).amplitudes
    amps[0] = 1.0
    psi = embed_lowest(amps[:3], cfg.basis)
    psi.amplitudes[3:] = amps[3:]
    rep = exceptional_integral(cfg, rcap, psi, range(4, 13))
    assert rep.fit.slope == pytest.approx(-2, abs=0.05)
    assert rep.fit.intercept == pytest.approx(rep.predicted_intercept, abs=0.05)
    assert rep.remainder_fit.slope < -2.5


def test_vanishing_lowest_amplitude_decays_faster():
    cfg = fixtures.neck_config((2, 3, 4), seed=0)
    rcap = ResolutionCap.random_high(AREA_AT_ONE, CapOperator.random(cfg.basis, 9), seed=5)
    psi = fixtures.incoming(cfg.basis, 5)
    psi.amplitudes[0] = 0.0
    rep = exceptional_integral(cfg, rcap, psi, range(4, 13))
    assert rep.fit.slope == pytest.approx(-3, abs=0.05)
    assert rep.predicted_intercept == -math.inf


def test_single_rung_ladder_rejected_for_sweep():
    cfg = fixtures.neck_config((2,))
    rcap = ResolutionCap(AREA_AT_ONE, CapOperator.zero(cfg.basis))
    with pytest.raises(InvalidInput):
        exceptional_integral(cfg, rcap, fixtures.incoming(cfg.basis), range(4, 8))


def _zero_cap_setup(n=2, kind="identity", seed=0, T=6.0):
    basis = fixtures.ladder()
    return PeriodFamily(n, basis, kind, seed), NeckConfig(T, basis), ResolutionCap(AREA_AT_ONE, CapOperator.zero(basis))


def test_identity_family_jacobian_is_scaled_identity():
    fam, cfg, rcap = _zero_cap_setup()
    rep = period_jacobian(fam, cfg, rcap)
    assert np.allclose(rep.matrix, rep.scale * np.eye(6), atol=1e-8 * rep.scale)
    assert rep.nonsingular


def test_redundant_family_is_singular():
    fam, cfg, rcap = _zero_cap_setup(kind="redundant")
    with pytest.raises(SingularJacobian):
        period_jacobian(fam, cfg, rcap)
    assert not period_jacobian(fam, cfg, rcap, raise_on_singular=False).nonsingular


def test_generic_family_singular_values_near_leading_scale():
    cfg = fixtures.neck_config((2, 3, 4), seed=1, T=8.0)
    fam = PeriodFamily(2, cfg.basis, "generic", seed=1)
    rcap = ResolutionCap.random_high(AREA_AT_ONE, cfg.cap_right, seed=1)
    rep = period_jacobian(fam, cfg, rcap)
    assert rep.nonsingular
    assert rep.scale / 2 < rep.singular_values.min() <= rep.singular_values.max() < 2 * rep.scale


def test_period_map_vanishes_at_origin():
    fam, cfg, rcap = _zero_cap_setup(kind="generic")
    assert not period_map(fam, cfg, rcap, np.zeros(6)).any()


@given(st.permutations([0, 1, 2]), st.integers(0, 1000))
def test_period_map_is_equivariant_under_relabelling(perm, seed):
    cfg = fixtures.neck_config((2, 3), seed=seed, T=5.0)
    fam = PeriodFamily(3, cfg.basis, "generic", seed)
    rcap = ResolutionCap.random_high(AREA_AT_ONE, cfg.cap_right, seed)
    s = 1e-2 * np.random.default_rng(seed).normal(size=9)
    idx = np.concatenate([np.arange(3 * p, 3 * p + 3) for p in perm])
    lhs = period_map(fam.permuted(perm), cfg, rcap, s[idx])
    rhs = period_map(fam, cfg, rcap, s)[idx]
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-18)


def test_family_input_errors():
    basis = fixtures.ladder()
    with pytest.raises(InvalidInput):
        PeriodFamily(1, basis, "bogus")
    with pytest.raises(InvalidInput):
        PeriodFamily(0, basis)
    with pytest.raises(InvalidInput):
        PeriodFamily(1, basis)(np.zeros(4))
