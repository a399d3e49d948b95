import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cloudmarket.core import DemandCurve, DimensionError, IntervalStats
from cloudmarket.pricing import closed_form_profit, markup_schedule, price_linear
from cloudmarket.risk import (
    RiskBounds,
    RiskParams,
    price_risk_aware,
    sample_probabilities,
    worst_case_loss,
)

from conftest import INF

TARGETS = (0, 10, INF)
M = DemandCurve(200, 2)


def nominal():
    return IntervalStats(np.array([0.7, 0.3]), np.array([6.0, 14.0]), np.array([3.0, 7.0]))


def test_zero_box_zero_loss_at_optimum():
    s = nominal()
    opt = price_linear(s, 1, 1, M, targets=TARGETS)
    loss = worst_case_loss(opt.prices, s, RiskBounds.zero(2), RiskParams(), 1, 1, M)
    assert loss == pytest.approx(0, abs=1e-9)


@pytest.mark.parametrize("delta", [-5.0, 0.5, 3.0])
def test_zero_box_loss_is_quadratic_in_markup_error(delta):
    s = nominal()
    opt = price_linear(s, 1, 1, M, targets=TARGETS)
    shifted = markup_schedule(TARGETS, s, opt.markup + delta)
    loss = worst_case_loss(shifted, s, RiskBounds.zero(2), RiskParams(), 1, 1, M)
    # P(pi*) - P(pi*+delta) for x (S - beta x) is beta * delta^2
    assert loss == pytest.approx(M.price_slope(1) * delta ** 2, rel=1e-9)
    slack = M.gamma - 2 * s.expected_time - 2 * s.expected_cost
    x = opt.markup + delta
    assert loss == pytest.approx(closed_form_profit(s, 1, 1, M) - x * (slack - 2 * x), rel=1e-9)


def dense_box_oracle(prices, s, bounds, beta_m, alpha_m, n=41):
    """Max regret over a dense (t*, c*) grid with p fixed at nominal."""
    best = 0.0
    quoted = prices.at(s.that)
    for dt in np.linspace(0, 1, n):
        for dc in np.linspace(0, 1, n):
            t = s.that + bounds.t_lo + dt * (bounds.t_hi - bounds.t_lo)
            c = s.c + bounds.c_lo + dc * (bounds.c_hi - bounds.c_lo)
            slack = M.gamma - alpha_m * t @ s.p - beta_m * c @ s.p
            opt = max(slack / (2 * beta_m), 1e-6)
            unit = quoted @ s.p - c @ s.p
            regret = opt * max(0, slack - beta_m * opt) - unit * max(0, slack - beta_m * unit)
            best = max(best, regret)
    return best


def test_positive_box_positive_loss_matches_dense_oracle():
    s = nominal()
    opt = price_linear(s, 1, 1, M, targets=TARGETS)
    bounds = RiskBounds.relative(s, -0.2, 0.2, p_radius=0.0)
    loss = worst_case_loss(opt.prices, s, bounds, RiskParams(), 1, 1, M)
    assert loss > 0
    assert loss == pytest.approx(dense_box_oracle(opt.prices, s, bounds, 2, 2), rel=1e-9)


def test_bounds_validation():
    with pytest.raises(ValueError):
        RiskBounds([1], [0], [0], [0])
    with pytest.raises(ValueError):
        RiskBounds([0], [0], [0], [0], p_radius=2)
    with pytest.raises(DimensionError):
        RiskBounds([0, 0], [0, 0, 0], [0], [0])
    with pytest.raises(ValueError):
        RiskParams(lam=-1)
    with pytest.raises(ValueError):
        RiskParams(n_t=1)
    with pytest.raises(DimensionError):
        worst_case_loss(price_linear(nominal(), 1, 1, M, targets=TARGETS).prices, nominal(),
                        RiskBounds.zero(3), RiskParams(), 1, 1, M)


def test_probability_samples_respect_radius():
    p = np.array([0.5, 0.3, 0.2, 0.0])
    q = sample_probabilities(p, 0.15, 200, seed=4)
    np.testing.assert_array_equal(q[0], p)
    assert np.allclose(q.sum(axis=1), 1)
    assert (q >= 0).all()
    tv = 0.5 * np.abs(q - p).sum(axis=1)
    assert tv.max() <= 0.15 + 1e-12
    assert tv.max() > 0.05


def test_lambda_zero_is_closed_form():
    s = nominal()
    a = price_risk_aware(s, RiskBounds.relative(s), RiskParams(lam=0), 1, 1, M, targets=TARGETS)
    b = price_linear(s, 1, 1, M, targets=TARGETS)
    np.testing.assert_array_equal(a.prices.intercepts, b.prices.intercepts)


def test_large_lambda_moves_toward_pessimistic_corner():
    s = nominal()
    # the box only allows slower and costlier outcomes
    bounds = RiskBounds.relative(s, 0.0, 0.4, p_radius=0.0)
    base = price_linear(s, 1, 1, M, targets=TARGETS)
    hedged = price_risk_aware(s, bounds, RiskParams(lam=1e3), 1, 1, M, targets=TARGETS)
    corner = price_linear(IntervalStats(s.p, s.that * 1.4, s.c * 1.4), 1, 1, M, targets=TARGETS)
    assert corner.markup < hedged.markup < base.markup


def test_risk_aware_output_is_profitable_and_no_worse_on_risk():
    s = nominal()
    bounds = RiskBounds.relative(s, -0.3, 0.3)
    params = RiskParams(lam=2.0)
    base = price_linear(s, 1, 1, M, targets=TARGETS)
    hedged = price_risk_aware(s, bounds, params, 1, 1, M, targets=TARGETS)
    assert hedged.expected_profit > 0
    assert worst_case_loss(hedged.prices, s, bounds, params, 1, 1, M) <= \
        worst_case_loss(base.prices, s, bounds, params, 1, 1, M) + 1e-9


@given(st.floats(-5, 5), st.floats(0.0, 0.5), st.integers(0, 100))
def test_loss_nonnegative(delta, width, seed):
    s = nominal()
    prices = markup_schedule(TARGETS, s, max(1e-6, price_linear(s, 1, 1, M, targets=TARGETS).markup + delta))
    bounds = RiskBounds.relative(s, -width, width)
    assert worst_case_loss(prices, s, bounds, RiskParams(seed=seed, n_p=8), 1, 1, M) >= 0


@given(st.floats(0.0, 0.3), st.floats(-3, 3))
def test_loss_monotone_in_box_size(width, delta):
    s = nominal()
    prices = markup_schedule(TARGETS, s, price_linear(s, 1, 1, M, targets=TARGETS).markup + delta)
    small = RiskBounds.relative(s, -width, width, p_radius=0.1)
    large = RiskBounds.relative(s, -2 * width, 2 * width, p_radius=0.1)
    # 9 points on the small box reappear among 17 points on the doubled box
    loss_small = worst_case_loss(prices, s, small, RiskParams(n_t=9, n_c=9), 1, 1, M)
    loss_large = worst_case_loss(prices, s, large, RiskParams(n_t=17, n_c=17), 1, 1, M)
    assert loss_large >= loss_small - 1e-9
