"""Differentiated Bertrand duopoly with best-response dynamics.

Agent i faces demand ``gamma_i - alpha_i*mu_i + beta_i*mu_j`` and earns
``mu_i`` per unit (price over marginal cost).
"""

from __future__ import annotations

import enum
import itertools
import warnings
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

DEFAULT_TOL = 1e-9
DEFAULT_MAX_STEPS = 10**6


class Update(enum.Enum):
    AGENT_ONE = "F1"
    AGENT_TWO = "F2"
    BOTH = "F3"


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class DuopolyParams:
    gamma: tuple[float, float]
    alpha: tuple[float, float]
    beta: tuple[float, float]

    def __post_init__(self):
        for name in ("gamma", "alpha", "beta"):
            value = tuple(float(x) for x in getattr(self, name))
            if len(value) != 2 or min(value) <= 0:
                raise ValueError(f"{name} needs two positive entries, got {value}")
            object.__setattr__(self, name, value)

    @classmethod
    def identical(cls, gamma: float, alpha: float, beta: float) -> DuopolyParams:
        return cls((gamma, gamma), (alpha, alpha), (beta, beta))

    @property
    def slopes(self) -> tuple[float, float]:
        """``a_i = beta_i / (2 alpha_i)``: how strongly each agent follows the other."""
        return tuple(b / (2 * a) for a, b in zip(self.alpha, self.beta))

    @property
    def intercepts(self) -> tuple[float, float]:
        return tuple(g / (2 * a) for a, g in zip(self.alpha, self.gamma))

    @property
    def contraction(self) -> float:
        a1, a2 = self.slopes
        return a1 * a2

    def profit(self, agent: int, mu_self: float, mu_other: float) -> float:
        i = _agent_index(agent)
        return (self.gamma[i] - self.alpha[i] * mu_self + self.beta[i] * mu_other) * mu_self


def _agent_index(agent) -> int:
    if agent in (1, Update.AGENT_ONE):
        return 0
    if agent in (2, Update.AGENT_TWO):
        return 1
    raise ValueError(f"agent must be 1 or 2, got {agent!r}")


def best_response(params: DuopolyParams, agent: int, mu_other: float) -> float:
    i = _agent_index(agent)
    return (params.gamma[i] + params.beta[i] * mu_other) / (2 * params.alpha[i])


def nash_equilibrium(params: DuopolyParams) -> tuple[float, float]:
    (g1, g2), (a1, a2), (b1, b2) = params.gamma, params.alpha, params.beta
    den = 4 * a1 * a2 - b1 * b2
    if den == 0:
        raise ZeroDivisionError("degenerate duopoly: 4*alpha1*alpha2 == beta1*beta2")
    mu1 = (2 * a2 * g1 + b1 * g2) / den
    mu2 = (2 * a1 * g2 + b2 * g1) / den
    if mu1 < 0 or mu2 < 0:
        warnings.warn(f"equilibrium has a negative price: ({mu1:.6g}, {mu2:.6g})", RuntimeWarning)
    return mu1, mu2


@dataclass(frozen=True)
class UpdateSchedule:
    """A finite prefix of updates followed by a suffix repeated forever."""

    prefix: tuple[Update, ...]
    cycle: tuple[Update, ...]

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(Update(u) for u in self.prefix))
        object.__setattr__(self, "cycle", tuple(Update(u) for u in self.cycle))
        if not self.cycle:
            raise ValueError("schedule needs a nonempty repeating cycle")
        one = any(u in (Update.AGENT_ONE, Update.BOTH) for u in self.cycle)
        two = any(u in (Update.AGENT_TWO, Update.BOTH) for u in self.cycle)
        if not (one and two):
            raise ValueError("both agents must update infinitely often")

    @classmethod
    def synchronized(cls) -> UpdateSchedule:
        return cls((), (Update.BOTH,))

    @classmethod
    def alternating(cls) -> UpdateSchedule:
        return cls((), (Update.AGENT_ONE, Update.AGENT_TWO))

    @classmethod
    def random(cls, rng: np.random.Generator, max_prefix: int = 20, max_cycle: int = 8) -> UpdateSchedule:
        choices = list(Update)
        prefix = tuple(choices[i] for i in rng.integers(0, 3, rng.integers(0, max_prefix + 1)))
        while True:
            cycle = tuple(choices[i] for i in rng.integers(0, 3, rng.integers(1, max_cycle + 1)))
            try:
                return cls(prefix, cycle)
            except ValueError:
                continue

    def __iter__(self) -> Iterator[Update]:
        return itertools.chain(self.prefix, itertools.cycle(self.cycle))


def apply_update(params: DuopolyParams, update: Update, prices: tuple[float, float]) -> tuple[float, float]:
    mu1, mu2 = prices
    if update is Update.AGENT_ONE:
        return best_response(params, 1, mu2), mu2
    if update is Update.AGENT_TWO:
        return mu1, best_response(params, 2, mu1)
    return best_response(params, 1, mu2), best_response(params, 2, mu1)


def iterate_to_equilibrium(params: DuopolyParams, schedule: UpdateSchedule,
                           init: Sequence[float] = (0.0, 0.0), tol: float = DEFAULT_TOL,
                           max_steps: int = DEFAULT_MAX_STEPS) -> tuple[tuple[float, float], int]:
    """Apply best responses in schedule order until both prices are within ``tol`` of the NE.

    Returns the final prices and the number of updates applied.
    """
    if params.contraction >= 1:
        raise ValueError(f"best responses do not contract: a1*a2 = {params.contraction:.6g}")
    target = nash_equilibrium(params)
    prices = (float(init[0]), float(init[1]))
    updates = iter(schedule)
    for step in range(max_steps + 1):
        if abs(prices[0] - target[0]) <= tol and abs(prices[1] - target[1]) <= tol:
            return prices, step
        if step == max_steps:
            break
        prices = apply_update(params, next(updates), prices)
    raise ConvergenceError(f"no convergence within {max_steps} updates; last prices {prices}")


def composed_response(params: DuopolyParams, z: float, k: int) -> float:
    """Agent one's price after ``k`` rounds of (agent two responds, agent one responds)."""
    for _ in range(k):
        z = best_response(params, 1, best_response(params, 2, z))
    return z
