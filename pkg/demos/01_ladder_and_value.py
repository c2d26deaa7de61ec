"""
Ladder heights and the constant-order value function
====================================================

Geometric demand with rho = 0.9 has mean 9. Ordering a constant 5 units each
period leaves a random walk with drift -4, and the inventory level is its
reflection at zero. Everything below is exact for this lattice law.
"""

import numpy as np

from lostsales import CostParams, make_parametric_demand
from lostsales.demand import increment_model
from lostsales.ladder import ascending_ladder_exact, ladder_moments_kappa, stationary_mean
from lostsales.value import build_value_table, quadratic_decomposition, value_exact

demand = make_parametric_demand("geometric", rho=0.9)
inc = increment_model(demand, 5.0, K=1)

# weak ascending ladder heights of the walk with steps D - r
dist = ascending_ladder_exact(inc)
s = ladder_moments_kappa(dist)
print("ladder pmf head  ", np.round(dist.pmf[:6], 5))
print("mean height      ", s.mu_plus)
print("kappa            ", s.kappa)

# long-run inventory under the constant order, from the characteristic roots
print("E[J] stationary  ", stationary_mean(demand, 5.0, 1))

# bias function, pinned to zero at empty stock
costs = CostParams(h=1.0, p=1.0)
table = build_value_table(inc, costs, x_max=40.0)
x = table.grid(12.0)
v = value_exact(table, x)
quad, corr = quadratic_decomposition(table, x)
for xi, vi, qi in zip(x[::3], v[::3], quad[::3]):
    print(f"x = {xi:5.1f}   v = {vi:9.4f}   quadratic part = {qi:9.4f}")

# the two pieces add back up exactly
print("decomposition error", np.max(np.abs(v - quad - corr)))
print("PIL target xi      ", table.xi)
