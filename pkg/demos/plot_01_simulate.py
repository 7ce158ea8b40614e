"""
Simulating the hidden and documented epidemic
=============================================

Run one seeded trajectory of the coupled process and print how the
documented counts lag behind the true ones.
"""

from lockdown_pomdp import Action, InitializationSpec, RngStream, default_initial_params, initialize_states
from lockdown_pomdp.model import simulate_coupled

# Michigan-sized population, 500 reported active cases on day 1
n = 9_986_857
params = default_initial_params(cap=11_320)
spec = InitializationSpec(p_severe=0.07, inflation=10, initial_active=500, initial_deaths=4_000)
pop, obs = initialize_states(spec, n)

# 60 days without lockdown, 2% of undocumented mild and 20% of severe cases found daily
days = 60
pops, obss = simulate_coupled(
    pop, obs, params, [Action.NONE] * days, [0.02] * days, [0.2] * days, RngStream(1).generator()
)

print("day   mild(true)  mild(doc)  severe(true)  severe(doc)  deaths(true)  deaths(doc)")
for t in range(0, days + 1, 10):
    p, o = pops[t], obss[t]
    print(f"{t + 1:3d}  {p.i_m:11d}  {o.i_m_o:9d}  {p.i_s:12d}  {o.i_s_o:11d}  {p.d:12d}  {o.d_o:11d}")

# the same stream gives the same path, a different stream does not
again, _ = simulate_coupled(pop, obs, params, [0] * days, [0.02] * days, [0.2] * days, RngStream(1).generator())
other, _ = simulate_coupled(pop, obs, params, [0] * days, [0.02] * days, [0.2] * days, RngStream(2).generator())
print("reproducible:", again[-1] == pops[-1], " different seed differs:", other[-1] != pops[-1])
