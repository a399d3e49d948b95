# coding: utf-8

# # Choosing machines for a query plan
#
# A query is a graph of subtasks. Each subtask can run on a few machines,
# each with its own time and cost. Finishing time is the longest path through
# the graph, and cost adds up over all subtasks.

# In[1]:

import time
from pathlib import Path

from cloudmarket.core import DemandCurve
from cloudmarket.formats import load_dag
from cloudmarket.simulator import generate_synthetic_dag
from cloudmarket.taskgraph import (
    knapsack_brute_force,
    knapsack_to_graph,
    linear_profit,
    price_exhaustive,
    price_fine_grained_dp,
    price_greedy,
)

DATA = Path(__file__).parent / "data"


# Three subtasks: a select and an aggregate feed a join. The select already
# takes five minutes, so paying for the fast aggregate gains nothing.

# In[2]:

g, (alpha, beta), demand = load_dag(DATA / "select_join.json")
profit = linear_profit(alpha, beta, demand)
for name, fn in (("dp", price_fine_grained_dp), ("greedy", price_greedy), ("search", price_exhaustive)):
    a = fn(g, profit)
    picks = {n: (g.options[n][k].time, g.options[n][k].cost) for n, k in a.choices.items()}
    print(f"{name:6s} time={a.total_time} cost={a.total_cost} aggregate={picks['aggregate']}")


# The planner is a dynamic program over time budgets. It can also solve
# knapsack problems, which shows the general problem is hard.

# In[3]:

items = [(2, 3), (3, 4), (4, 5), (5, 6)]
g_k, p_k = knapsack_to_graph(items, 5)
print("dp", price_fine_grained_dp(g_k, p_k).profit, "brute force", knapsack_brute_force(items, 5))


# A 154-node plan with five machine options per node prices in well under a
# second at one-minute granularity.

# In[4]:

big = generate_synthetic_dag(7, 154)
start = time.perf_counter()
plan = price_fine_grained_dp(big, linear_profit(1, 1, DemandCurve(20000, 1)))
print(f"{len(big.nodes)} nodes, {len(big.edges)} edges: time {plan.total_time:.1f}, "
      f"cost {plan.total_cost:.1f}, {time.perf_counter() - start:.2f} s")
greedy = price_greedy(big, linear_profit(1, 1, DemandCurve(20000, 1)))
print(f"greedy profit {greedy.profit:.1f} vs dp {plan.profit:.1f}")
