"""Second-price (VCG-style) alternative to posted prices.

Agents submit contracts priced at their (claimed) cost. The consumer takes
the contract with the highest expected utility and pays a schedule shifted
so that the utility it actually receives equals the runner-up's.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Contract, IntervalStats, PiecewiseUtility, PriceSchedule, expected_contract_utility


@dataclass(frozen=True)
class Bid:
    agent: str
    contract: Contract
    true_stats: IntervalStats | None = None

    def __post_init__(self):
        if np.any(self.contract.quoted_prices() < 0):
            raise ValueError(f"bid from {self.agent!r} has negative prices")
        if self.true_stats is not None and self.true_stats.n_intervals != self.contract.probs.size:
            raise ValueError(f"bid from {self.agent!r}: true stats do not match the contract")


@dataclass(frozen=True)
class VcgOutcome:
    winner: str
    delta: float
    payment: PriceSchedule
    runner_up_utility: float
    winner_utility: float
    utilities: dict[str, float]


def _linear_utility(targets, alpha_u: float, beta_u: float) -> PiecewiseUtility:
    if beta_u <= 0 or alpha_u < 0:
        raise ValueError("VCG payments need alpha_u >= 0 and beta_u > 0")
    return PiecewiseUtility.linear(alpha_u, beta_u, targets)


def run_vcg(bids: Sequence[Bid], alpha_u: float, beta_u: float) -> VcgOutcome:
    """Highest expected utility wins; payment lifts its prices by ``delta / beta_u``.

    Ties go to the lowest agent id, and ``delta`` is measured against the
    best of the remaining bids, so a tie yields ``delta == 0``.
    """
    if len(bids) < 2:
        raise ValueError("an auction needs at least two bids")
    ids = [b.agent for b in bids]
    if len(set(ids)) != len(ids):
        raise ValueError("agent ids must be unique")
    u = _linear_utility(bids[0].contract.targets, alpha_u, beta_u)
    utilities = {b.agent: expected_contract_utility(b.contract, u) for b in bids}
    ranked = sorted(bids, key=lambda b: (-utilities[b.agent], b.agent))
    winner, runner_up = ranked[0], ranked[1]
    delta = utilities[winner.agent] - utilities[runner_up.agent]
    return VcgOutcome(
        winner=winner.agent,
        delta=delta,
        payment=winner.contract.prices.shifted(delta / beta_u),
        runner_up_utility=utilities[runner_up.agent],
        winner_utility=utilities[winner.agent],
        utilities=utilities,
    )


def vcg_payoff(outcome: VcgOutcome, bid: Bid) -> float:
    """Expected payment minus expected true cost for the winner, 0 for losers."""
    if bid.agent not in outcome.utilities:
        raise KeyError(f"agent {bid.agent!r} did not take part in this auction")
    if bid.agent != outcome.winner:
        return 0.0
    if bid.true_stats is None:
        raise ValueError("payoff needs the winner's true costs")
    c = bid.contract
    paid = outcome.payment.at(c.expected_times)
    return float(np.dot(c.probs, paid - bid.true_stats.c))


def truthful_bid(agent: str, task, targets, stats: IntervalStats) -> Bid:
    """Bid that quotes the true expected cost of each interval."""
    contract = Contract.from_stats(task, targets, stats, PriceSchedule.constant(targets, stats.c))
    return Bid(agent, contract, stats)


def shaded_bid(agent: str, task, targets, stats: IntervalStats, shift: float) -> Bid:
    """Bid whose quoted prices differ from true cost by ``shift`` cents (clipped at 0)."""
    prices = PriceSchedule.constant(targets, np.maximum(stats.c + shift, 0.0))
    return Bid(agent, Contract.from_stats(task, targets, stats, prices), stats)
