"""Tuning of the constant order r_p and the projected-inventory target xi_p."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .demand import DemandModel, increment_model
from .errors import BadParamError, BracketMissError
from .ladder import stationary_mean
from .policies import pil
from .simulation import SimConfig, estimate_cost_rate
from .value import CostParams, build_value_table

GOLDEN = (math.sqrt(5) - 1) / 2


def constant_order_cost(demand: DemandModel, costs: CostParams, r: float, K: int) -> float:
    """h E[J] + p (mu_D - r), the long-run cost of ordering r every period."""
    return costs.h * stationary_mean(demand, r, K) + costs.p * (demand.mu - r)


@dataclass(frozen=True)
class RTuning:
    r: float
    cost: float
    K: int
    evaluations: int
    refined: tuple | None = None  # (r, cost, K) after grid refinement


def _argmin_convex(f, lo, hi):
    """Smallest minimiser of a convex sequence f on lo..hi, by bisection on
    the sign of the forward difference."""
    while lo < hi:
        mid = (lo + hi) // 2
        if f(mid + 1) - f(mid) >= 0:
            hi = mid
        else:
            lo = mid + 1
    return lo


def optimize_r(demand: DemandModel, costs: CostParams, K: int = 10,
               refine: int | None = None) -> RTuning:
    """Minimise the constant-order cost over r in {0, d/K, 2d/K, ...} below mu_D.

    ``refine`` > 1 repeats the search on a grid ``refine`` times finer,
    restricted to the neighbouring cells of the grid optimum.
    """
    demand.require_lattice()
    span = demand.span / K
    n_max = int(math.ceil(demand.mu / span - 1e-9)) - 1  # largest j with j*span < mu_D
    cache = {}

    def f(j, k=K):
        key = (j, k)
        if key not in cache:
            cache[key] = constant_order_cost(demand, costs, j * demand.span / k, k)
        return cache[key]

    if costs.p == 0:
        j = 0
    else:
        j = _argmin_convex(f, 0, n_max)
    refined = None
    if refine and refine > 1 and costs.p > 0:
        K2 = K * refine
        lo = max((j - 1) * refine, 0)
        hi = min((j + 1) * refine, int(math.ceil(demand.mu * K2 / demand.span - 1e-9)) - 1)
        j2 = _argmin_convex(lambda i: f(i, K2), lo, hi)
        refined = (j2 * demand.span / K2, f(j2, K2), K2)
    return RTuning(j * span, f(j), K, len(cache), refined)


def tune_r_sequence(demand: DemandModel, h: float, p_list, K: int = 10, refine=None):
    """r_p for each p, plus whether the sequence is non-decreasing."""
    out = [optimize_r(demand, CostParams(h, p), K, refine) for p in p_list]
    rs = [t.r for t in out]
    monotone = all(b >= a - 1e-12 for a, b in zip(rs, rs[1:]))
    return out, monotone


def pil_target_for(demand: DemandModel, costs: CostParams, r: float, K: int,
                   convention: str = "derived") -> float:
    table = build_value_table(increment_model(demand, r, K), costs, convention, x_max=demand.mu)
    return table.xi


@dataclass(frozen=True)
class XiSearch:
    xi: float
    cost: float
    se: float
    samples: list = field(default_factory=list)  # (xi, cost, se)
    unimodal: bool = True
    bracket: tuple = (0.0, 0.0)


def _unimodal(samples, slack):
    pts = sorted(samples)
    costs = [c for _, c, _ in pts]
    i = int(np.argmin(costs))
    left = all(costs[k] >= costs[k + 1] - slack for k in range(i))
    right = all(costs[k + 1] >= costs[k] - slack for k in range(i, len(costs) - 1))
    return left and right


def optimize_xi(demand: DemandModel, costs: CostParams, L: int, config: SimConfig,
                bracket: tuple | None = None, xi_center: float | None = None, K: int = 1,
                tol: float | None = None, max_evals: int = 30) -> XiSearch:
    """Golden-section search of the simulated PIL cost over ``bracket``.

    All evaluations share demand streams (common random numbers). The default
    bracket is [0.5 xi_center, 2 xi_center + L d/K].
    """
    if config.L != L:
        raise BadParamError("config.L must match L")
    span = demand.span / K
    if bracket is None:
        if xi_center is None:
            raise BadParamError("need a bracket or a centre")
        bracket = (0.5 * max(xi_center, 0.0), 2 * max(xi_center, 0.0) + L * span)
    a, b = map(float, bracket)
    if b < a:
        raise BadParamError("bracket must satisfy lo <= hi")
    samples = []

    def cost(x):
        e = estimate_cost_rate(pil(x, K=K), demand, costs, config)
        samples.append((x, e.mean, e.se))
        return e.mean

    if b - a <= 0:
        c = cost(a)
        return XiSearch(a, c, samples[0][2], samples, True, (a, b))
    tol = tol if tol is not None else max(span / 2, 1e-3 * (b - a))
    x1, x2 = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    f1, f2 = cost(x1), cost(x2)
    lo, hi = a, b
    while hi - lo > tol and len(samples) < max_evals:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = cost(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = cost(x2)
    best = min(samples, key=lambda s: (s[1], s[0]))
    slack = 2 * max(s[2] for s in samples if not math.isnan(s[2])) if config.replications > 1 else 0
    res = XiSearch(best[0], best[1], best[2], samples, _unimodal(samples, slack), (a, b))
    edge = 1.5 * tol
    if best[0] - a < edge and a > 0 or b - best[0] < edge:
        raise BracketMissError(f"minimum {best[0]:.4g} sits at the bracket edge {res.bracket}")
    return res
