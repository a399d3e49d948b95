# coding: utf-8

# # A small market
#
# Several agents sell contracts for the same twenty synthetic tasks. The
# expert knows every configuration exactly; naive agents always use one
# fixed configuration; the estimator guesses run times 30% too high; the
# hedged agent makes the same guess but prices with a risk penalty.

# In[1]:

from pathlib import Path

from cloudmarket.formats import load_scenario
from cloudmarket.simulator import perfect_scenario, run_market, sweep

DATA = Path(__file__).parent / "data"


# In[2]:

sc = load_scenario(DATA / "market.json")
metrics = run_market(sc)
print(f"{'agent':10s} {'profit':>10s} {'offered utility':>16s} {'mean loss':>10s}")
for a in metrics.agents:
    print(f"{a['agent']:10s} {a['overall_profit']:10.1f} {a['offered_utility']:16.1f} {a['mean_relative_loss']:10.2e}")


# With perfect estimates the expert beats every naive agent on both profit
# and the utility it offers.

# In[3]:

for a in run_market(perfect_scenario(11)).agents:
    print(f"{a['agent']:9s} profit {a['overall_profit']:10.1f}  utility {a['offered_utility']:9.1f}")


# How many runs does a consumer need before benchmarking every configuration
# itself beats buying from the expert? The answer is the crossover column.

# In[4]:

for row in sweep(sc, "benchmark_repetitions", [1, 5, 20, 100]):
    print(f"{row['value']:4d} runs: benchmark {row['benchmark_utility']:10.1f}  "
          f"agent {row['agent_utility']:10.1f}  crossover {row['crossover']}")
