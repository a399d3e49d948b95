"""Risk-agnostic contract pricing.

Prices are realized as a uniform markup over expected interval costs,
``price_i = c_i + markup``. The linear closed form pins only the
probability-weighted price, so a single scalar is all the optimizer needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    Configuration,
    DemandCurve,
    DimensionError,
    IntervalStats,
    PiecewiseUtility,
    PriceSchedule,
    interval_stats,
)

EPSILON = 1e-6
DEFAULT_GRID_STEP = 1e-3
MAX_MARKUP = 1e6


@dataclass(frozen=True)
class PricingConstants:
    epsilon: float = EPSILON

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class PricingOutcome:
    prices: PriceSchedule
    expected_profit: float
    expected_demand: float
    overall_profit: float
    consumer_expected_utility: float

    @property
    def markup(self) -> float:
        """Uniform markup over expected interval costs (valid for optimizer output)."""
        return self.expected_profit


def _check_dims(prices: PriceSchedule, stats: IntervalStats):
    if prices.n_intervals != stats.n_intervals:
        raise DimensionError(
            f"price schedule has {prices.n_intervals} intervals, stats have {stats.n_intervals}"
        )


def expected_profit(prices: PriceSchedule, stats: IntervalStats) -> float:
    _check_dims(prices, stats)
    return float(np.dot(prices.at(stats.that) - stats.c, stats.p))


def expected_demand(prices: PriceSchedule, stats: IntervalStats, u: PiecewiseUtility,
                    m: DemandCurve) -> float:
    _check_dims(prices, stats)
    if u.n_intervals != stats.n_intervals:
        raise DimensionError("utility and stats disagree on the number of intervals")
    utilities = u.per_interval(stats.that, prices.at(stats.that))
    return float(np.dot(m(utilities), stats.p))


def consumer_utility(prices: PriceSchedule, stats: IntervalStats, u: PiecewiseUtility) -> float:
    return float(np.dot(u.per_interval(stats.that, prices.at(stats.that)), stats.p))


def evaluate(prices: PriceSchedule, stats: IntervalStats, u: PiecewiseUtility,
             m: DemandCurve) -> PricingOutcome:
    """Profit, demand and utility of an arbitrary schedule under ``stats``."""
    profit = expected_profit(prices, stats)
    demand = expected_demand(prices, stats, u, m)
    return PricingOutcome(prices, profit, demand, profit * demand, consumer_utility(prices, stats, u))


def markup_schedule(targets: Sequence[float], stats: IntervalStats, markup: float) -> PriceSchedule:
    return PriceSchedule.constant(targets, stats.c + markup)


def demand_slack(stats: IntervalStats, alpha_u: float, beta_u: float, m: DemandCurve,
                 kappa: float = 0.0) -> float:
    """``gamma - alpha_M t^T p - beta_M c^T p``: demand left after paying cost with no markup."""
    gamma = m.gamma + m.lam * kappa
    return gamma - m.time_slope(alpha_u) * stats.expected_time - m.price_slope(beta_u) * stats.expected_cost


def linear_markup(stats: IntervalStats, alpha_u: float, beta_u: float, m: DemandCurve,
                  eps: float = EPSILON, kappa: float = 0.0) -> float:
    """Optimal uniform markup for a linear utility: ``max(slack / (2 beta_M), eps)``."""
    beta_m = m.price_slope(beta_u)
    return max(demand_slack(stats, alpha_u, beta_u, m, kappa) / (2.0 * beta_m), eps)


def closed_form_profit(stats: IntervalStats, alpha_u: float, beta_u: float, m: DemandCurve,
                       kappa: float = 0.0) -> float:
    """``slack**2 / (4 beta_M)`` on the nonnegative-demand branch, 0 otherwise."""
    slack = demand_slack(stats, alpha_u, beta_u, m, kappa)
    return slack * slack / (4.0 * m.price_slope(beta_u)) if slack >= 0 else 0.0


def price_linear(stats: IntervalStats, alpha_u: float, beta_u: float, m: DemandCurve,
                 eps: PricingConstants | float = EPSILON, targets: Sequence[float] | None = None,
                 kappa: float = 0.0) -> PricingOutcome:
    """Closed-form optimum for ``U = kappa - alpha_u*t - beta_u*price`` and linear demand.

    ``targets`` defaults to ``(0, inf)`` split evenly; pass the contract's
    targets when there is more than one interval.
    """
    if alpha_u < 0 or beta_u <= 0:
        raise ValueError("linear pricing needs alpha_u >= 0 and beta_u > 0")
    eps = eps.epsilon if isinstance(eps, PricingConstants) else float(eps)
    targets = _default_targets(stats, targets)
    markup = linear_markup(stats, alpha_u, beta_u, m, eps, kappa)
    u = PiecewiseUtility(targets, [(kappa, alpha_u, beta_u)] * stats.n_intervals)
    return evaluate(markup_schedule(targets, stats, markup), stats, u, m)


def _default_targets(stats: IntervalStats, targets):
    if targets is None:
        if stats.n_intervals != 1:
            raise DimensionError("targets are required for multi-interval stats")
        return (0.0, math.inf)
    if len(targets) - 1 != stats.n_intervals:
        raise DimensionError("targets and stats disagree on the number of intervals")
    return tuple(targets)


def markup_span(stats: IntervalStats, u: PiecewiseUtility, m: DemandCurve) -> float:
    """Markup beyond which every price-sensitive interval has zero demand."""
    base = u.per_interval(stats.that, stats.c)
    slopes = np.array([piece.b for piece in u.pieces])
    live = stats.p > 0
    span = 0.0
    for i in np.flatnonzero(live):
        level = m.gamma + m.lam * base[i]
        if slopes[i] > 0:
            span = max(span, level / (m.lam * slopes[i]))
        elif level > 0:
            # demand never falls with price here; cap the search
            return MAX_MARKUP
    return span


def profit_curve(markups: np.ndarray, stats: IntervalStats, u: PiecewiseUtility,
                 m: DemandCurve) -> np.ndarray:
    """Overall profit for each uniform markup in ``markups`` (vectorized)."""
    markups = np.asarray(markups, dtype=float)
    prices = stats.c[None, :] + markups[:, None]
    kappa = np.array([p.kappa for p in u.pieces])
    a = np.array([p.a for p in u.pieces])
    b = np.array([p.b for p in u.pieces])
    utilities = kappa - a * stats.that - b * prices
    demand = m(utilities) @ stats.p
    return markups * demand


def price_oracle_grid(stats: IntervalStats, u: PiecewiseUtility, m: DemandCurve,
                      grid_step: float = DEFAULT_GRID_STEP, span: float | None = None,
                      eps: float = EPSILON) -> PricingOutcome:
    """Exhaustive search over uniform markups ``grid_step, 2*grid_step, ...``.

    Works for any piecewise utility. Falls back to an ``eps`` markup when
    no grid point earns a positive overall profit.
    """
    if u.n_intervals != stats.n_intervals:
        raise DimensionError("utility and stats disagree on the number of intervals")
    if span is None:
        span = markup_span(stats, u, m) + grid_step
    n = max(1, int(math.ceil(span / grid_step)))
    best_markup, best_profit = eps, -math.inf
    chunk = 1 << 18
    for start in range(1, n + 1, chunk):
        markups = np.arange(start, min(n, start + chunk - 1) + 1) * grid_step
        profits = profit_curve(markups, stats, u, m)
        k = int(np.argmax(profits))
        if profits[k] > best_profit:
            best_markup, best_profit = float(markups[k]), float(profits[k])
    if best_profit <= 0:
        best_markup = eps
    return evaluate(markup_schedule(u.targets, stats, best_markup), stats, u, m)


def price(stats: IntervalStats, u: PiecewiseUtility, m: DemandCurve, eps: float = EPSILON,
          grid_step: float = DEFAULT_GRID_STEP) -> PricingOutcome:
    """Price with the closed form when ``u`` is one linear piece, else by grid search."""
    coeffs = u.linear_coefficients()
    if coeffs is not None and coeffs[2] > 0:
        kappa, alpha_u, beta_u = coeffs
        return price_linear(stats, alpha_u, beta_u, m, eps, targets=u.targets, kappa=kappa)
    return price_oracle_grid(stats, u, m, grid_step=grid_step, eps=eps)


def select_configuration(configs: Sequence[Configuration], targets: Sequence[float],
                         u: PiecewiseUtility, m: DemandCurve,
                         eps: float = EPSILON) -> tuple[Configuration, PricingOutcome]:
    """Price every configuration and keep the most profitable one.

    Ties go to the lower rate, then to the lexicographically smaller id.
    """
    if not configs:
        raise ValueError("no configurations to choose from")
    priced = [(cfg, price(interval_stats(cfg.histogram, cfg.rate, targets), u, m, eps))
              for cfg in configs]
    return min(priced, key=lambda item: (-item[1].overall_profit, item[0].rate, item[0].id))
