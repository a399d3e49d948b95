"""Risk-aware pricing under bounded estimation error.

The agent's nominal stats may be wrong. Risk is the worst regret, over a
box of plausible true stats, of posting prices ``pi`` instead of the prices
that would have been optimal under the true stats. For linear utility and
demand the regret only depends on ``p*`` through the two scalars
``T = t*^T p*`` and ``C = c*^T p*``, so for each sampled ``p*`` the inner
search runs over a 2-D rectangle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import DemandCurve, DimensionError, IntervalStats, PiecewiseUtility, PriceSchedule
from .pricing import EPSILON, PricingOutcome, evaluate, markup_schedule, price_linear

DEFAULT_BOX = 0.1
DEFAULT_TV_RADIUS = 0.2
ZOOM_POINTS = 64
ZOOM_TOL = 1e-13


@dataclass(frozen=True)
class RiskBounds:
    """Per-interval bounds on ``t*_i - that_i`` and ``c*_i - c_i``.

    ``p_radius`` caps the total-variation distance between ``p*`` and the
    nominal probabilities.
    """

    t_lo: np.ndarray
    t_hi: np.ndarray
    c_lo: np.ndarray
    c_hi: np.ndarray
    p_radius: float = DEFAULT_TV_RADIUS

    def __post_init__(self):
        arrays = [np.atleast_1d(np.asarray(x, dtype=float)) for x in (self.t_lo, self.t_hi, self.c_lo, self.c_hi)]
        n = max(a.size for a in arrays)
        arrays = [np.broadcast_to(a, (n,)).copy() if a.size == 1 else a for a in arrays]
        if any(a.size != n for a in arrays):
            raise DimensionError("risk bounds must share one length")
        t_lo, t_hi, c_lo, c_hi = arrays
        if np.any(t_lo > t_hi) or np.any(c_lo > c_hi):
            raise ValueError("risk bounds need lo <= hi componentwise")
        if not 0 <= self.p_radius <= 1:
            raise ValueError("total-variation radius must lie in [0, 1]")
        for name, arr in zip(("t_lo", "t_hi", "c_lo", "c_hi"), arrays):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def zero(cls, n: int) -> RiskBounds:
        z = np.zeros(n)
        return cls(z, z, z, z, 0.0)

    @classmethod
    def relative(cls, stats: IntervalStats, lo: float = -DEFAULT_BOX, hi: float = DEFAULT_BOX,
                 p_radius: float = DEFAULT_TV_RADIUS) -> RiskBounds:
        """Box of ``[lo, hi]`` times the nominal expected time and cost."""
        return cls(lo * stats.that, hi * stats.that, lo * stats.c, hi * stats.c, p_radius)

    @property
    def n_intervals(self) -> int:
        return self.t_lo.size


@dataclass(frozen=True)
class RiskParams:
    lam: float = 0.0
    n_t: int = 9
    n_c: int = 9
    n_p: int = 64
    seed: int = 0
    n_markups: int = 256

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("risk weight must be nonnegative")
        if min(self.n_t, self.n_c, self.n_p, self.n_markups) < 2:
            raise ValueError("search resolutions must be at least 2")


def sample_probabilities(p: np.ndarray, radius: float, n: int, seed: int) -> np.ndarray:
    """``n`` probability vectors within total-variation ``radius`` of ``p``.

    Row 0 is ``p`` itself. Other rows move a random amount of mass, at most
    ``radius``, from some intervals onto others.
    """
    p = np.asarray(p, dtype=float)
    rng = np.random.default_rng(seed)
    out = np.empty((n, p.size))
    out[0] = p
    if p.size == 1 or radius == 0:
        out[1:] = p
        return out
    for k in range(1, n):
        d = rng.standard_normal(p.size)
        d[p == 0] = np.abs(d[p == 0])
        gain, loss = d.clip(0, None), (-d).clip(0, None)
        if gain.sum() == 0 or loss.sum() == 0:
            out[k] = p
            continue
        # unit total-variation direction; s is the mass moved
        d = gain / gain.sum() - loss / loss.sum()
        neg = d < 0
        s_max = float(np.min(p[neg] / -d[neg]))
        s = min(s_max, radius) * rng.random() ** 0.5
        q = np.clip(p + s * d, 0.0, None)
        out[k] = q / q.sum()
    return out


def _aggregate_profit(unit_profit, slack, beta_m):
    """Profit ``x * max(0, S - beta_M x)`` of unit profit x at demand slack S."""
    return unit_profit * np.maximum(0.0, slack - beta_m * unit_profit)


def _optimal_profit(slack, beta_m, eps):
    x = np.maximum(slack / (2.0 * beta_m), eps)
    return _aggregate_profit(x, slack, beta_m)


def _check(prices, stats, bounds):
    if bounds.n_intervals != stats.n_intervals:
        raise DimensionError("risk bounds and stats disagree on the number of intervals")
    if prices is not None and prices.n_intervals != stats.n_intervals:
        raise DimensionError("prices and stats disagree on the number of intervals")


def _regret(quoted: np.ndarray, stats: IntervalStats, bounds: RiskBounds, params: RiskParams,
            alpha_u: float, beta_u: float, m: DemandCurve, eps: float) -> np.ndarray:
    """Worst-case regret for each row of ``quoted`` (shape ``(k, n_intervals)``)."""
    alpha_m, beta_m = m.time_slope(alpha_u), m.price_slope(beta_u)
    ps = sample_probabilities(stats.p, bounds.p_radius, params.n_p, params.seed)   # (P, n)
    t_lo = ps @ (stats.that + bounds.t_lo)
    t_hi = ps @ (stats.that + bounds.t_hi)
    c_lo = ps @ (stats.c + bounds.c_lo)
    c_hi = ps @ (stats.c + bounds.c_hi)
    w = np.linspace(0.0, 1.0, params.n_t)
    v = np.linspace(0.0, 1.0, params.n_c)
    T = t_lo[:, None] + (t_hi - t_lo)[:, None] * w[None, :]      # (P, nt)
    C = c_lo[:, None] + (c_hi - c_lo)[:, None] * v[None, :]      # (P, nc)
    slack = m.gamma - alpha_m * T[:, :, None] - beta_m * C[:, None, :]   # (P, nt, nc)
    best = _optimal_profit(slack, beta_m, eps)
    revenue = quoted @ ps.T                                          # (k, P)
    unit = revenue[:, :, None, None] - C[None, :, None, :]           # (k, P, 1, nc)
    got = _aggregate_profit(unit, slack[None], beta_m)
    regret = best[None] - got
    return np.maximum(regret.reshape(regret.shape[0], -1).max(axis=1), 0.0)


def worst_case_loss(prices: PriceSchedule, stats: IntervalStats, bounds: RiskBounds,
                    params: RiskParams, alpha_u: float, beta_u: float, m: DemandCurve,
                    eps: float = EPSILON) -> float:
    """Largest profit regret of ``prices`` over the sampled box of true stats.

    Prices are read at the nominal expected times, so schedules with
    time-dependent pieces are treated as their quoted constants. The value
    is a lower bound on the exact maximum (the simplex is sampled).
    """
    _check(prices, stats, bounds)
    quoted = prices.at(stats.that)[None, :]
    return float(_regret(quoted, stats, bounds, params, alpha_u, beta_u, m, eps)[0])


def price_risk_aware(stats: IntervalStats, bounds: RiskBounds, params: RiskParams,
                     alpha_u: float, beta_u: float, m: DemandCurve, eps: float = EPSILON,
                     targets: Sequence[float] | None = None) -> PricingOutcome:
    """Maximize nominal overall profit minus ``lam`` times worst-case regret.

    Searches the uniform-markup family: a grid over ``[eps, markup_max]``
    followed by repeated finer grids around the best point.
    ``lam == 0`` returns the closed-form schedule unchanged.
    """
    _check(None, stats, bounds)
    nominal = price_linear(stats, alpha_u, beta_u, m, eps, targets=targets)
    if params.lam == 0:
        return nominal
    targets = nominal.prices.targets
    beta_m = m.price_slope(beta_u)
    alpha_m = m.time_slope(alpha_u)
    # the markup that zeroes demand under the most favourable box corner bounds the search
    top_slack = m.gamma - alpha_m * (stats.that + bounds.t_lo.clip(None, 0)) @ stats.p \
        - beta_m * (stats.c + bounds.c_lo.clip(None, 0)) @ stats.p
    upper = max(top_slack / beta_m, 2 * nominal.markup, 10 * eps)
    nominal_slack = m.gamma - alpha_m * stats.expected_time - beta_m * stats.expected_cost

    def objective(markups):
        markups = np.atleast_1d(markups)
        quoted = stats.c[None, :] + markups[:, None]
        gain = _aggregate_profit(markups, nominal_slack, beta_m)
        return gain - params.lam * _regret(quoted, stats, bounds, params, alpha_u, beta_u, m, eps)

    # the objective is concave in the markup, so zooming around the best grid point converges
    lo, hi = eps, upper
    n = params.n_markups
    while True:
        grid = np.linspace(lo, hi, n)
        k = int(np.argmax(objective(grid)))
        best_markup = float(grid[k])
        if hi - lo <= ZOOM_TOL * max(1.0, upper):
            break
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, n - 1)]
        n = ZOOM_POINTS
    best_markup = max(best_markup, eps)
    u = PiecewiseUtility.linear(alpha_u, beta_u, targets)
    return evaluate(markup_schedule(targets, stats, best_markup), stats, u, m)
