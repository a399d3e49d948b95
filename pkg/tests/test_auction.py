import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cloudmarket.auction import Bid, run_vcg, shaded_bid, truthful_bid, vcg_payoff
from cloudmarket.core import Contract, IntervalStats, PriceSchedule

INF = math.inf
TARGETS = (0, 10, 20, INF)


def random_stats(rng, n=3):
    p = rng.dirichlet(np.ones(n))
    that = np.array([rng.uniform(lo, hi) for lo, hi in zip((0, 10, 20), (10, 20, 40))])[:n]
    return IntervalStats(p, that, rng.uniform(5, 30) * np.ones(n) + rng.uniform(0, 5, n))


def test_payment_shift_worked_example():
    # winner quotes the price that leaves the consumer at utility -30
    targets = (0, INF)
    prices = PriceSchedule(targets, [15.0], [0.5])
    winner = Bid("a", Contract("q", {}, targets, [1.0], [4.0], prices))
    runner = Bid("b", Contract("q", {}, targets, [1.0], [10.0], PriceSchedule.constant(targets, [15.0])))
    out = run_vcg([winner, runner], 1.0, 2.0)
    assert out.winner == "a"
    assert out.winner_utility == pytest.approx(-30)
    assert out.delta == pytest.approx(10)
    # payment is (-t + 40) / 2
    np.testing.assert_allclose(out.payment.intercepts, [20.0])
    np.testing.assert_allclose(out.payment.slopes, [0.5])
    assert out.payment(4.0) == pytest.approx(18.0)


def test_identical_bids_give_zero_delta():
    stats = random_stats(np.random.default_rng(0))
    a, b = truthful_bid("b", "q", TARGETS, stats), truthful_bid("a", "q", TARGETS, stats)
    out = run_vcg([a, b], 1.0, 1.0)
    assert out.winner == "a"
    assert out.delta == 0
    np.testing.assert_array_equal(out.payment.intercepts, b.contract.prices.intercepts)
    assert vcg_payoff(out, b) == pytest.approx(0, abs=1e-12)


def test_three_bids_against_sorting():
    rng = np.random.default_rng(4)
    for _ in range(50):
        bids = [shaded_bid(name, "q", TARGETS, random_stats(rng), rng.uniform(-3, 3)) for name in "xyz"]
        alpha, beta = rng.uniform(0, 2), rng.uniform(0.5, 3)
        scored = []
        for b in bids:
            c = b.contract
            u = -alpha * c.expected_times - beta * c.quoted_prices()
            scored.append((float(c.probs @ u), b.agent))
        scored.sort(key=lambda s: (-s[0], s[1]))
        out = run_vcg(bids, alpha, beta)
        assert out.winner == scored[0][1]
        assert out.delta == pytest.approx(scored[0][0] - scored[1][0], abs=1e-9)
        winner = next(b for b in bids if b.agent == out.winner)
        np.testing.assert_allclose(out.payment.intercepts - winner.contract.prices.intercepts, out.delta / beta)


def test_loser_payoff_is_zero_and_unknown_agent_rejected():
    rng = np.random.default_rng(1)
    bids = [truthful_bid(n, "q", TARGETS, random_stats(rng)) for n in "ab"]
    out = run_vcg(bids, 1.0, 1.0)
    loser = next(b for b in bids if b.agent != out.winner)
    assert vcg_payoff(out, loser) == 0.0
    with pytest.raises(KeyError):
        vcg_payoff(out, truthful_bid("zz", "q", TARGETS, random_stats(rng)))


def test_input_errors():
    stats = random_stats(np.random.default_rng(2))
    with pytest.raises(ValueError):
        run_vcg([truthful_bid("a", "q", TARGETS, stats)], 1, 1)
    with pytest.raises(ValueError):
        run_vcg([truthful_bid("a", "q", TARGETS, stats)] * 2, 1, 1)
    with pytest.raises(ValueError):
        run_vcg([truthful_bid("a", "q", TARGETS, stats), truthful_bid("b", "q", TARGETS, stats)], 1, 0)
    with pytest.raises(ValueError):
        Bid("a", Contract("q", {}, TARGETS, stats.p, stats.that, PriceSchedule.constant(TARGETS, -stats.c)))


def _scenario(seed):
    rng = np.random.default_rng(seed)
    alpha, beta = rng.uniform(0, 2), rng.uniform(0.5, 3)
    me = random_stats(rng)
    rivals = [truthful_bid(f"r{i}", "q", TARGETS, random_stats(rng)) for i in range(int(rng.integers(1, 4)))]
    return rng, alpha, beta, me, rivals


@given(st.integers(0, 10**6))
def test_payoff_sign_follows_true_utility(seed):
    rng, alpha, beta, me, rivals = _scenario(seed)
    truthful_u = -alpha * me.expected_time - beta * me.expected_cost
    best_rival = max(run_vcg(rivals + [truthful_bid("s", "q", TARGETS, me)], alpha, beta).utilities[r.agent]
                     for r in rivals)
    gap = truthful_u - best_rival
    # shade so the reported utility lands just above the runner-up
    reported = best_rival + rng.uniform(0.1, 5)
    shift = (truthful_u - reported) / beta
    if np.any(me.c + shift < 0) or abs(gap) < 1e-6:
        return
    bid = shaded_bid("me", "q", TARGETS, me, shift)
    out = run_vcg(rivals + [bid], alpha, beta)
    assert out.winner == "me"
    payoff = vcg_payoff(out, bid)
    if gap > 0:
        assert payoff > 0
    else:
        assert payoff < 0


@given(st.integers(0, 10**6), st.floats(-10, 10))
def test_truthful_bidding_weakly_dominates(seed, shift):
    rng, alpha, beta, me, rivals = _scenario(seed)
    honest = truthful_bid("me", "q", TARGETS, me)
    other = shaded_bid("me", "q", TARGETS, me, shift)
    u_honest = vcg_payoff(run_vcg(rivals + [honest], alpha, beta), honest)
    u_other = vcg_payoff(run_vcg(rivals + [other], alpha, beta), other)
    assert u_honest >= u_other - 1e-9


@given(st.integers(0, 10**6))
def test_payment_identity(seed):
    rng, alpha, beta, me, rivals = _scenario(seed)
    bid = shaded_bid("me", "q", TARGETS, me, rng.uniform(-3, 3))
    bids = rivals + [bid]
    out = run_vcg(bids, alpha, beta)
    w = next(b for b in bids if b.agent == out.winner).contract
    paid = w.probs @ out.payment.at(w.expected_times)
    reported = w.probs @ w.quoted_prices()
    assert paid - reported == pytest.approx(out.delta / beta, abs=1e-9)
    assert out.delta >= 0
