import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asdlab import fixtures
from asdlab.errors import BoundViolated, InvalidInput, NoConvergence, NonPositiveNorm
from asdlab.neck import (
    CapOperator,
    ModeBasis,
    ModeVector,
    NeckConfig,
    direct_solve,
    embed_lowest,
    fit_decay_rate,
    iterate_neck,
    kahler_pairing,
    lowest_mode_projection,
    mode_decay,
    second_term_split,
    smallest_contracting_T,
    sweep,
)

BASIS = fixtures.ladder()


def test_basis_validation():
    assert BASIS.dimension == 9
    assert BASIS.next_gap == 3
    with pytest.raises(InvalidInput):
        ModeBasis(((3, 3),))
    with pytest.raises(InvalidInput):
        ModeBasis(((2, 2), (3, 3)))
    with pytest.raises(InvalidInput):
        ModeVector(BASIS, np.zeros(4))
    with pytest.raises(InvalidInput):
        ModeVector(BASIS, np.full(9, np.nan))


def test_pure_lowest_mode_decays_exactly_at_rate_two():
    n0, n1 = mode_decay(embed_lowest([1.0, -2.0, 0.5], BASIS), 1.0)
    assert n1 / n0 == pytest.approx(math.exp(-2), rel=1e-14)


def test_zero_field_has_zero_window_norms():
    assert mode_decay(ModeVector.zeros(BASIS), 2.0) == (0.0, 0.0)


def test_mixed_modes_decay_strictly_faster():
    basis = fixtures.ladder((2, 3))
    psi = ModeVector.from_dict(basis, {2: [1, 0, 0], 3: [1, 1, 1]})
    n0, ns = mode_decay(psi, 1.0)
    assert ns / n0 < math.exp(-2)


def test_mode_decay_rejects_bad_input():
    with pytest.raises(InvalidInput):
        mode_decay(ModeVector.zeros(BASIS), -1)
    with pytest.raises(InvalidInput):
        mode_decay(ModeVector.zeros(BASIS, "decreasing"), 1)


def test_zero_caps_leave_only_the_input():
    cfg = NeckConfig(4.0, BASIS)
    psi = fixtures.incoming(BASIS, 3)
    res = iterate_neck(cfg, psi)
    assert len(res.pieces) == 2 and not res.pieces[1].any()
    assert res.tail(1) == 0.0
    assert np.array_equal(res.limit[0], psi.amplitudes)


def test_identity_caps_contract_and_match_direct_solve():
    cfg = fixtures.neck_config(caps="identity", T=6.0)
    res = iterate_neck(cfg, fixtures.incoming(cfg.basis, 1))
    assert res.contraction < 1
    assert res.contraction <= res.contraction_bound
    assert res.oracle_residual <= 1e-12
    assert res.fixed_point_residual() <= 1e-12


def test_random_caps_fixed_point():
    cfg = fixtures.neck_config(seed=4, T=5.0)
    res = iterate_neck(cfg, fixtures.incoming(cfg.basis, 4))
    assert res.fixed_point_residual() <= 1e-12
    assert res.oracle_residual <= 1e-12
    assert all(r <= res.contraction_bound * (1 + 1e-9) for r in res.ratios)


def test_short_neck_with_large_caps_refuses_to_iterate():
    basis = fixtures.ladder()
    big = CapOperator.random(basis, 0, bound=100.0)
    with pytest.raises(NoConvergence):
        iterate_neck(NeckConfig(2.0, basis, big, big), fixtures.incoming(basis))


def test_cap_bound_is_enforced():
    with pytest.raises(BoundViolated):
        CapOperator(BASIS, 2 * np.eye(9), 1.0)
    assert CapOperator.random(BASIS, 5, 0.7).measured_norm() == pytest.approx(0.7, rel=1e-12)


def test_neck_length_lower_limit():
    with pytest.raises(InvalidInput):
        NeckConfig(1.0, BASIS)


def test_tails_decay_at_rates_two_and_four():
    cfg = fixtures.neck_config(seed=0)
    psi = fixtures.incoming(cfg.basis, 0)
    results = sweep(cfg, psi, range(4, 13))
    assert fit_decay_rate([(r.config.T, r.tail(1)) for r in results]).slope == pytest.approx(-2, abs=0.05)
    assert fit_decay_rate([(r.config.T, r.tail(2)) for r in results]).slope == pytest.approx(-4, abs=0.1)
    assert smallest_contracting_T(results) == 4


def test_single_rung_split_has_no_high_part():
    cfg = fixtures.neck_config((2,), seed=2)
    split = second_term_split(cfg, fixtures.incoming(cfg.basis, 2))
    assert split.higher_norm == 0.0 and split.lowest_norm > 0


def test_second_term_split_rates():
    cfg = fixtures.neck_config((2, 3), seed=0)
    psi = fixtures.incoming(cfg.basis, 0)
    splits = [second_term_split(cfg.with_T(T), psi) for T in range(4, 13)]
    low = fit_decay_rate([(s.T, s.lowest_norm) for s in splits])
    high = fit_decay_rate([(s.T, s.higher_norm) for s in splits])
    assert low.slope == pytest.approx(-2, abs=0.02)
    assert high.slope == pytest.approx(-3, abs=0.05)


def test_fit_recovers_exact_exponential():
    rep = fit_decay_rate([(T, 5 * math.exp(-2 * T)) for T in range(4, 10)])
    assert rep.slope == pytest.approx(-2, abs=1e-12)
    assert rep.intercept == pytest.approx(math.log(5), abs=1e-10)
    assert rep.residual < 1e-12


def test_fit_rejects_non_positive_norms():
    with pytest.raises(NonPositiveNorm):
        fit_decay_rate([(4, 1.0), (5, 0.5), (6, 0.0), (7, 0.1)])
    with pytest.raises(InvalidInput):
        fit_decay_rate([(4, 1.0), (5, 0.5)])


def test_lowest_mode_projection_and_pairing():
    psi = ModeVector.from_dict(BASIS, {2: [0.5, -1, 2], 3: [7, 7, 7]})
    assert lowest_mode_projection(psi) == (0.5, -1.0, 2.0)
    assert lowest_mode_projection(embed_lowest(lowest_mode_projection(psi), BASIS)) == (0.5, -1.0, 2.0)
    assert kahler_pairing((Fraction(3, 4), 5, -1)) == Fraction(3, 2)


# -- properties ---------------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


@given(seeds, st.floats(0, 6))
def test_window_ratio_never_exceeds_lowest_rate(seed, s):
    psi = fixtures.incoming(BASIS, seed)
    n0, ns = mode_decay(psi, s)
    assert ns <= math.exp(-2 * s) * n0 * (1 + 1e-12)


@given(seeds, st.floats(2, 12))
def test_transport_is_diagonal_exponential(seed, T):
    cfg = NeckConfig(T, BASIS)
    assert np.allclose(cfg.transport, np.exp(-BASIS.exponents * T), rtol=1e-15, atol=0)


@given(seeds)
def test_contraction_shrinks_with_neck_length(seed):
    cfg = fixtures.neck_config(seed=seed % 1000)
    psi = fixtures.incoming(cfg.basis, seed)
    rates = [iterate_neck(cfg.with_T(T), psi).contraction for T in (4.0, 6.0, 8.0)]
    assert rates[0] > rates[1] > rates[2]


@given(seeds)
def test_iteration_matches_direct_solve(seed):
    cfg = fixtures.neck_config(seed=seed % 1000, T=4.0)
    psi = fixtures.incoming(cfg.basis, seed)
    res = iterate_neck(cfg, psi)
    bL, bR = direct_solve(cfg, psi.amplitudes)
    assert np.allclose(res.limit[0], bL, atol=1e-13) and np.allclose(res.limit[1], bR, atol=1e-13)
