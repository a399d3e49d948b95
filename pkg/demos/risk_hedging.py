# coding: utf-8

# # Hedging against bad estimates
#
# An agent prices from its own estimate of how long a query runs. When that
# estimate is off, the price is off too. A risk-aware agent looks at a box of
# plausible true statistics around its estimate and trades a little expected
# profit for a smaller worst-case regret.

# In[1]:

from cloudmarket.core import DemandCurve, interval_stats
from cloudmarket.pricing import price_linear
from cloudmarket.risk import RiskBounds, RiskParams, price_risk_aware, worst_case_loss
from cloudmarket.simulator import AgentModel, Scenario, estimate_histogram, generate_synthetic_workload, sweep


# One synthetic task, priced by an agent that overestimates run times by 30%.

# In[2]:

task = generate_synthetic_workload(0, 1)[0]
cfg = task.configs[0]
m = DemandCurve(300, 1)
truth = interval_stats(cfg.histogram, cfg.rate, task.targets)
belief = interval_stats(estimate_histogram(cfg.histogram, 1.3, 0.05), cfg.rate, task.targets)
print("true mean time", round(truth.expected_time, 2), "believed", round(belief.expected_time, 2))


# The box says the truth may be up to 30% below the estimate in both time and
# cost. Increasing the risk weight pulls the markup toward what the
# pessimistic corner of the box would want.

# In[3]:

bounds = RiskBounds.relative(belief, -0.3, 0.0, p_radius=0.0)
base = price_linear(belief, 1, 1, m, targets=task.targets)
print("lambda  markup   worst-case regret")
for lam in (0, 0.5, 1, 2, 5):
    params = RiskParams(lam=lam)
    o = price_risk_aware(belief, bounds, params, 1, 1, m, targets=task.targets)
    risk = worst_case_loss(o.prices, belief, bounds, params, 1, 1, m)
    print(f"{lam:6.1f}  {o.markup:7.3f}  {risk:9.3f}")
print("closed-form markup on the belief:", round(base.markup, 3))


# Measured against the true statistics, the relative loss never grows as the
# risk weight goes up.

# In[4]:

agent = AgentModel("risk", "risk_aware", k=1.3, bound_lo=-0.3, bound_hi=0.0, p_radius=0.0)
sc = Scenario(0, (task,), (agent,), m)
for row in sweep(sc, "risk_lambda", [0, 0.5, 1, 2, 5]):
    print(f"lambda={row['value']:<4} relative loss={row['mean_relative_loss']:.3e}")
