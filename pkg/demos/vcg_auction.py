# coding: utf-8

# # Second-price contracts
#
# Instead of posting prices, agents bid contracts priced at their costs. The
# consumer takes the best one but pays enough extra that it ends up exactly
# as well off as it would have been with the runner-up.

# In[1]:

from pathlib import Path

import numpy as np

from cloudmarket.auction import run_vcg, shaded_bid, truthful_bid, vcg_payoff
from cloudmarket.core import IntervalStats
from cloudmarket.formats import load_auction

DATA = Path(__file__).parent / "data"


# In[2]:

bids, alpha, beta = load_auction(DATA / "auction.json")
out = run_vcg(bids, alpha, beta)
print("utilities", {k: round(v, 3) for k, v in out.utilities.items()})
print("winner", out.winner, "margin", round(out.delta, 3), "payoff",
      round(vcg_payoff(out, next(b for b in bids if b.agent == out.winner)), 3))


# Lying about costs never helps. Shading the bid below cost can win auctions
# the agent should lose, at a loss; padding it can only lose auctions.

# In[3]:

targets = (0, 10, np.inf)
me = IntervalStats([0.7, 0.3], [6.0, 14.0], [12.0, 22.0])
rivals = [truthful_bid(f"r{i}", "q", targets, IntervalStats([0.5, 0.5], [5, 15], c))
          for i, c in enumerate(([10, 14], [12, 18]))]
for shift in (-4, -2, 0, 2, 4):
    bid = shaded_bid("me", "q", targets, me, shift)
    o = run_vcg(rivals + [bid], 1, 1)
    print(f"shift {shift:+d}: winner {o.winner}, payoff {vcg_payoff(o, bid):+.3f}")
