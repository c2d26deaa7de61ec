"""
Projected inventory level against constant order
================================================

A small version of the lead-time experiment. For each penalty cost the best
constant order r_p is found on the lattice, the PIL target is read off its
value function, and both policies are simulated on the same demand paths.
The gap should stay below h * kappa_bar^2. The constant-order cost does not
depend on L, so the same bound holds at every lead time.
"""

from lostsales import make_parametric_demand
from lostsales.experiments import gap_vs_L
from lostsales.simulation import SimConfig

demand = make_parametric_demand("geometric", rho=0.9)

# short runs so this finishes in under a minute; the tests use T = 200000
config = SimConfig(0, 20_000, replications=5, seed=3)
out = gap_vs_L(demand, 1.0, [5.0, 20.0], [5, 20], config)

print("kappa_bar =", round(out["kappa_bar"], 4), "  bound =", round(out["bound"], 4))
for row in out["rows"]:
    print(f"p = {row['p']:5.1f}  L = {row['L']:3d}  r_p = {row['r_p']:5.2f}  "
          f"C = {row['cost_constant']:7.3f}  PIL = {row['cost_pil']:7.3f}  "
          f"gap = {row['gap']:6.3f} +/- {row['gap_se']:.3f}")
