"""
Heavy traffic
=============

As the constant order approaches mean demand the stationary inventory blows
up like sigma^2 / (2 (mu - r)). The ratio below should climb towards 1.
"""

from lostsales import make_parametric_demand
from lostsales.experiments import heavy_traffic_scan

demand = make_parametric_demand("geometric", rho=0.9)

rows = heavy_traffic_scan(demand, [5.0, 7.0, 8.0, 8.8], K=10)
for row in rows:
    print(f"r = {row['r']:4.1f}   E[J] = {row['EJ_inf']:10.3f}   ratio = {row['ratio']:.4f}")

# exponential demand has a closed form, and the ratio is exactly (r / mu)^2
expo = make_parametric_demand("exponential", rate=1.0)
for row in heavy_traffic_scan(expo, [0.5, 0.9, 0.99]):
    print(f"exponential r = {row['r']:4.2f}   ratio = {row['ratio']:.4f}")
