# coding: utf-8

# # Pricing a single query
#
# A consumer wants a query answered and cares about two things: how long it
# takes and what it costs. We describe that with a utility that drops one
# unit per minute and one unit per cent. Demand for contracts falls off
# linearly as utility falls.

# In[1]:

from pathlib import Path

import numpy as np

from cloudmarket import (
    CompletionHistogram,
    Configuration,
    DemandCurve,
    PiecewiseUtility,
    interval_stats,
    price,
    price_linear,
    price_oracle_grid,
    select_configuration,
)
from cloudmarket.formats import load_workload

DATA = Path(__file__).parent / "data"


# The smallest possible case: the query always finishes in half a minute on
# a machine that costs 0.2 cents per minute.

# In[2]:

w = load_workload(DATA / "single_interval.json")
task = w.task("q1")
cfg = task.configs[0]
stats = interval_stats(cfg.histogram, cfg.rate, task.targets)
print("expected time", stats.expected_time, "min; expected cost", stats.expected_cost, "cents")


# With a linear utility the optimal markup has a closed form. The agent
# charges 0.8 cents, sells 35 contracts and keeps 24.5 cents overall.

# In[3]:

out = price_linear(stats, 1.0, 1.0, w.demand, targets=task.targets)
print("price", out.prices.intercepts, "demand", out.expected_demand, "overall profit", out.overall_profit)


# A brute-force scan over markups in steps of a thousandth of a cent agrees.

# In[4]:

grid = price_oracle_grid(stats, w.utility(task), w.demand)
print("grid markup", grid.markup, "grid profit", grid.overall_profit)


# # Deadlines
#
# Real utilities are rarely linear. Here the consumer pays a flat penalty for
# missing one minute and a bigger one for missing two, and cares twice as much
# about time once it is very late. Pricing falls back to a grid search over
# a markup shared by all intervals.

# In[5]:

w = load_workload(DATA / "three_targets.json")
task = w.task("report")
u = w.utility(task)
for cfg in task.configs:
    s = interval_stats(cfg.histogram, cfg.rate, task.targets)
    o = price(s, u, w.demand)
    print(f"{cfg.id:9s} P={np.round(s.p, 2)} markup={o.markup:.3f} overall profit={o.overall_profit:.2f}")


# Given the menu, the agent keeps the configuration with the best overall
# profit. Faster machines can win even at a higher rate.

# In[6]:

chosen, outcome = select_configuration(task.configs, task.targets, u, w.demand)
print("chosen", chosen.id, "profit", round(outcome.overall_profit, 3))


# # Better configurations help both sides
#
# If one configuration gives the consumer more raw utility than another, the
# priced contract built on it is better for the consumer and more
# profitable for the agent.

# In[7]:

targets = (0.0, 30.0, np.inf)
m = DemandCurve(500, 1)
u = PiecewiseUtility.linear(1, 1, targets)
fast = Configuration("fast", 2.0, CompletionHistogram.from_gaussian(12, 2))
slow = Configuration("slow", 0.8, CompletionHistogram.from_gaussian(40, 6))
for cfg in (fast, slow):
    s = interval_stats(cfg.histogram, cfg.rate, targets)
    o = price_linear(s, 1, 1, m, targets=targets)
    raw = -s.expected_time - s.expected_cost
    print(f"{cfg.id}: raw {raw:7.2f}  consumer {o.consumer_expected_utility:7.2f}  profit {o.overall_profit:9.2f}")
