"""
Searching threshold lockdown policies
=====================================

Score every policy of a small grid on the same random streams and show
the daily lockdown level chosen by the best one.
"""

import numpy as np

from lockdown_pomdp import (
    Action,
    ObservedState,
    PolicyGrid,
    PopulationState,
    RngStream,
    TestingSchedule,
    default_initial_params,
    optimize_policy,
)
from lockdown_pomdp.policy import CostConfig, rollout_policy

params = default_initial_params(cap=600)
# end of a 40-day training period in a growing outbreak
pop = PopulationState(990_800, 2_000, 4_000, 400, 800, 200, day_index=40)
obs = ObservedState(400, 200, 80, 50, day_index=40)
schedule = TestingSchedule(np.full(89, 0.03), np.full(89, 0.3))

grid = PolicyGrid(
    l_values=(1e-5, 4.5e-4), u1_values=(5e-4, 2e-3), u2_values=(2.5e-3, 1e-2), theta_values=(0.0, 1.0)
)
for c_l in (4_700_000, 1_500_000, 0):
    cost = CostConfig(c_e=484_700_000, c_l=c_l, cap=600)
    stream = RngStream(3)
    search = optimize_policy(grid, params, cost, pop, obs, schedule, 90, 20, stream, prev_action=Action.FULL)
    roll = rollout_policy(search.best, params, cost, pop, obs, schedule, 90, 20, stream, prev_action=Action.FULL)
    blocks = [int(np.bincount(roll.actions[:, k], minlength=3).argmax()) for k in range(0, 50, 14)]
    print(f"cost of a death {c_l:>9,d}: best {search.best.as_tuple()}  "
          f"levels per 14-day block {blocks}  expected cost ${-search.reward / 1e9:,.1f}B")
