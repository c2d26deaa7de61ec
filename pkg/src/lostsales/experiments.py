"""Experiment drivers. Each returns a list of row dicts in a fixed order."""

from __future__ import annotations

import math

import numpy as np

from .demand import DemandModel, increment_model
from .ladder import ladder_summary, stationary_mean
from .mdp import (
    build_mdp,
    exact_policy_eval,
    newsvendor,
    greedy_policy_eval,
    relative_value_iteration,
)
from .policies import base_stock as base_stock_policy, capped_base_stock, constant, pil
from .simulation import SimConfig, estimate_cost_rate, paired_difference
from .tuning import optimize_r
from .value import CostParams, build_value_table


def heavy_traffic_scan(demand: DemandModel, r_grid, K: int = 10) -> list[dict]:
    rows = []
    for r in r_grid:
        ej = stationary_mean(demand, float(r), K)
        mu_y = demand.mu - r
        rows.append({"r": float(r), "mu_Y": mu_y, "EJ_inf": ej,
                     "ratio": 2 * mu_y * ej / demand.sigma2})
    return rows


def kappa_bar(demand: DemandModel, r_values, K: int = 10) -> tuple[float, list]:
    """Largest kappa over the given r values (each on the d/K grid)."""
    ks = [(float(r), ladder_summary(increment_model(demand, float(r), K)).kappa) for r in r_values]
    return max(k for _, k in ks), ks


def default_kappa_grid(demand: DemandModel, step: float | None = None) -> list[float]:
    step = step or demand.span
    n = int(math.ceil(demand.mu / step - 1e-9))
    return [i * step for i in range(n)]


def _cell_seed(seed, *coords):
    return int(np.random.SeedSequence([seed, *coords]).generate_state(1)[0])


def gap_vs_L(demand: DemandModel, h: float, p_list, L_list, config: SimConfig,
             K: int = 10, proj_K: int = 1, conventions=("derived",), kappa_r=None,
             base_stock: bool = False) -> dict:
    """Simulated cost of C_{r_p} and P_{xi(r_p)} with common random numbers.

    Returns {"rows": [...], "kappa_bar": ..., "bound": h * kappa_bar^2, ...}.
    Each row also carries the mean correction term
    b mu_plus int_J^{J + q - r_p} g along the PIL trajectory.
    """
    tuned = {p: optimize_r(demand, CostParams(h, p), K) for p in p_list}
    r_ps = sorted({t.r for t in tuned.values()})
    grid = default_kappa_grid(demand) if kappa_r is None else list(kappa_r)
    kb, ks = kappa_bar(demand, sorted(set(grid) | set(r_ps)), K)
    bound = h * kb**2
    rows = []
    for p in p_list:
        costs = CostParams(h, p)
        r_p = tuned[p].r
        tables = {}
        for conv in conventions:
            x_max = 2 * demand.mu * (max(L_list) + 2) + 10 * demand.sigma
            tables[conv] = build_value_table(increment_model(demand, r_p, K), costs, conv,
                                             x_max=x_max)
        for L in L_list:
            cfg = SimConfig(L, config.T, config.warmup, config.replications,
                            _cell_seed(config.seed, int(p * 1000), L), True, config.pipeline0)
            c_r = estimate_cost_rate(constant(r_p), demand, costs, cfg)
            row = {"p": p, "L": L, "r_p": r_p, "cost_constant": c_r.mean, "se_constant": c_r.se}
            for conv in conventions:
                t = tables[conv]
                tag = "" if conv == "derived" else "_as_printed"

                def correction(tr, s, t=t):
                    lo, hi = tr.J[s:], tr.J[s:] + tr.arrivals[s:] - t.r
                    g = t.renewal.g_integral
                    return float(np.mean(t.b * t.ladder.mu_plus * (g(hi) - g(lo))))

                est = estimate_cost_rate(pil(t.xi, K=proj_K), demand, costs, cfg,
                                         hooks={"correction": correction})
                gap, gap_se = paired_difference(est, c_r)
                row.update({
                    f"xi{tag}": t.xi, f"cost_pil{tag}": est.mean, f"se_pil{tag}": est.se,
                    f"gap{tag}": gap, f"gap_se{tag}": gap_se,
                    f"rel_gap{tag}": gap / c_r.mean,
                    f"order_mean{tag}": est.metadata["order_bound_mean"],
                    f"order_se{tag}": est.metadata["order_bound_se"],
                    f"max_J{tag}": est.metadata["max_J"],
                    f"correction{tag}": est.metadata["correction_mean"],
                    f"correction_se{tag}": est.metadata["correction_se"],
                })
            if base_stock:
                S = row["xi"] + L * demand.mu
                bs = estimate_cost_rate(base_stock_policy(S), demand, costs, cfg)
                row.update({"cost_base_stock": bs.mean, "se_base_stock": bs.se})
            row.update({"kappa_bar": kb, "bound": bound})
            rows.append(row)
    return {"rows": rows, "kappa_bar": kb, "bound": bound, "kappas": ks,
            "r_p": {p: tuned[p].r for p in p_list}}


def best_capped_base_stock(mdp):
    """Capped base-stock (S, cap) minimising the exact cost on the MDP grid."""
    span = mdp.span
    best = None
    top = mdp.nq + mdp.L * mdp.nq
    for cap in range(1, mdp.nq + 1):
        for S in range(0, min(top, mdp.nJ) + 1):
            pol = capped_base_stock(S * span, cap * span)
            g = exact_policy_eval(mdp, pol, start=0)
            if best is None or g < best[0] - 1e-12:
                best = (g, pol)
    return best


def mdp_benchmark(demand: DemandModel, h: float, p_list, L_list, J_max: float, q_max: float,
                  K: int = 1, tol: float = 1e-9, tune_cbs: bool = True) -> list[dict]:
    rows = []
    for p in p_list:
        costs = CostParams(h, p)
        r_p = optimize_r(demand, costs, K).r
        xi = build_value_table(increment_model(demand, r_p, K), costs, x_max=demand.mu).xi \
            if r_p > 0 else None
        for L in L_list:
            mdp = build_mdp(demand, costs, L, J_max, q_max, K)
            sol = relative_value_iteration(mdp, tol)
            row = {"p": p, "L": L, "g_star": sol.g_star, "iterations": sol.iterations,
                   "span_residual": sol.span_residual, "truncation_mass": mdp.truncation_mass,
                   "g_lower": sol.lower, "g_upper": sol.upper,
                   "g_greedy": greedy_policy_eval(mdp, sol)[0],
                   "r_p": r_p, "cost_constant": exact_policy_eval(mdp, constant(r_p))}
            if L == 0:
                row["newsvendor"] = newsvendor(demand, costs)[1]
            row["xi"] = xi
            row["cost_pil"] = exact_policy_eval(mdp, pil(xi, K=K), start=0) if xi is not None else None
            if tune_cbs:
                g_cbs, pol = best_capped_base_stock(mdp)
                row.update({"cost_capped_base_stock": g_cbs, "S": pol.S, "cap": pol.cap})
            for k in ("constant", "pil", "capped_base_stock"):
                v = row.get(f"cost_{k}")
                row[f"gap_{k}"] = None if v is None else v - sol.g_star
            rows.append(row)
    return rows
