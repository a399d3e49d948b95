# coding: utf-8

# # Two competing sellers
#
# Each seller's demand drops with its own markup and rises with its rival's.
# Both keep best-responding to the other; as long as each reacts less than
# one for one, prices settle on the equilibrium no matter who moves when.

# In[1]:

import numpy as np

from cloudmarket.bertrand import (
    DuopolyParams,
    UpdateSchedule,
    apply_update,
    iterate_to_equilibrium,
    nash_equilibrium,
)


# In[2]:

params = DuopolyParams((10, 8), (2, 3), (1, 1))
print("equilibrium", np.round(nash_equilibrium(params), 4), "contraction", params.contraction)


# Alternating moves, printed step by step.

# In[3]:

prices = (0.0, 0.0)
for step, update in zip(range(8), UpdateSchedule.alternating()):
    prices = apply_update(params, update, prices)
    print(step, update.value, np.round(prices, 5))


# Any schedule in which both sellers keep moving reaches the same point.

# In[4]:

rng = np.random.default_rng(1)
for name, schedule in (("sync", UpdateSchedule.synchronized()), ("alternating", UpdateSchedule.alternating()),
                       ("random", UpdateSchedule.random(rng))):
    final, steps = iterate_to_equilibrium(params, schedule, (20.0, -5.0))
    print(f"{name:11s} {steps:3d} updates -> {np.round(final, 9)}")
