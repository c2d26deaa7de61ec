"""Trajectory simulation and long-run cost estimates.

Event order in period t: observe (J_t, q_t, ..., q_{t+L-1}), place q_{t+L},
receive q_t, see demand D_t, pay h (J_t + q_t - D_t)^+ + p (D_t - J_t - q_t)^+.
Replication i draws its demands from SeedSequence([seed, i]); without common
random numbers the crc32 of the policy label is appended to that key.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .demand import DemandModel, sample
from .errors import BadParamError, OffGridError
from .policies import (
    BASE_STOCK,
    CAPPED,
    CONSTANT,
    HYBRID,
    PolicySpec,
    SystemState,
    decide,
    make_projector,
    project_units,
)
from .value import CostParams, ValueTable, value_exact


@dataclass(frozen=True)
class SimConfig:
    L: int
    T: int
    warmup: int | None = None
    replications: int = 10
    seed: int = 0
    crn: bool = True
    pipeline0: tuple | None = None

    def __post_init__(self):
        if self.L < 0 or self.T < 1 or self.replications < 1:
            raise BadParamError("need L >= 0, T >= 1 and at least one replication")
        if self.W >= self.T:
            raise BadParamError(f"warm-up {self.W} must be shorter than the horizon {self.T}")
        if self.pipeline0 is not None and len(self.pipeline0) != self.L:
            raise BadParamError("initial pipeline must have length L")

    @property
    def W(self) -> int:
        return self.warmup if self.warmup is not None else max(10 * self.L, 1000)

    @property
    def start(self) -> int:
        """First accounted period."""
        return max(self.L, self.W)

    def initial_pipeline(self) -> np.ndarray:
        return np.zeros(self.L) if self.pipeline0 is None else np.asarray(self.pipeline0, float)


def demand_stream(config: SimConfig, rep: int, policy: PolicySpec | None = None):
    key = [config.seed, rep]
    if not config.crn and policy is not None:
        key.append(zlib.crc32(policy.label().encode()))
    return np.random.default_rng(np.random.SeedSequence(key))


# no on-disk cache: it would not notice edits to project_units in policies.py
@njit
def _simulate(code, r, S, cap, xi, t_switch, d, L, h, p, J0, pipe0, f, rho, K, unit):
    n = len(d)
    q = np.zeros(n + L)
    q[:L] = pipe0
    cost = np.empty(n)
    order = np.empty(n)
    inv = np.empty(n)
    lost = np.empty(n)
    pipe_units = np.empty(L, np.int64)
    J = J0
    for t in range(n):
        if code == CONSTANT or (code == HYBRID and t > t_switch + L):
            o = r
        elif code == BASE_STOCK or code == CAPPED:
            pos = J
            for i in range(L):
                pos += q[t + i]
            o = max(S - pos, 0.0)
            if code == CAPPED:
                o = min(o, cap)
        elif xi <= 0.0:
            o = 0.0
        else:
            ju = int(math.floor(J / unit + 0.5))
            if abs(ju * unit - J) > 1e-7 * max(1.0, J):
                return cost, order, inv, lost, q, t
            for i in range(L):
                qi = q[t + i]
                pipe_units[i] = int(math.floor(qi / unit + 0.5))
                if abs(pipe_units[i] * unit - qi) > 1e-7 * max(1.0, qi):
                    return cost, order, inv, lost, q, t
            proj = project_units(ju, pipe_units, f, rho, K) * unit
            o = max(math.floor((xi - proj) / unit + 0.5) * unit, 0.0)
        q[t + L] += o
        order[t] = o
        inv[t] = J
        avail = J + q[t]
        D = d[t]
        sold = min(avail, D)
        short = D - sold
        nxt = max(avail - D, 0.0)
        if abs(nxt + sold - avail) > 1e-9 * max(1.0, avail):
            return cost, order, inv, lost, q, -2 - t
        cost[t] = h * nxt + p * short
        lost[t] = short
        J = nxt
    return cost, order, inv, lost, q, -1


@dataclass(frozen=True)
class Trajectory:
    """Per-period records for t = 0..T: costs, orders placed, on-hand J_t at
    the start of the period, arrivals q_t, demands and lost sales."""

    costs: np.ndarray = field(repr=False)
    orders: np.ndarray = field(repr=False)
    J: np.ndarray = field(repr=False)
    arrivals: np.ndarray = field(repr=False)
    demand: np.ndarray = field(repr=False)
    lost: np.ndarray = field(repr=False)
    L: int = 0


def _mc_trajectory(policy, demand, costs, config, d, rep):
    L = config.L
    n = len(d)
    q = np.zeros(n + L)
    q[:L] = config.initial_pipeline()
    out = {k: np.empty(n) for k in ("cost", "order", "inv", "lost")}
    J = 0.0
    for t in range(n):
        o = decide(policy, SystemState(J, q[t:t + L], t), demand,
                   seed=hash((config.seed, rep, t)) & 0xFFFFFFFF)
        q[t + L] += o
        avail = J + q[t]
        nxt = max(avail - d[t], 0.0)
        out["cost"][t] = costs.h * nxt + costs.p * max(d[t] - avail, 0.0)
        out["order"][t], out["inv"][t], out["lost"][t] = o, J, max(d[t] - avail, 0.0)
        J = nxt
    return out["cost"], out["order"], out["inv"], out["lost"], q


def simulate_trajectory(policy: PolicySpec, demand: DemandModel, costs: CostParams,
                        config: SimConfig, rep: int = 0) -> Trajectory:
    d = np.asarray(sample(demand, demand_stream(config, rep, policy), config.T + 1), float)
    L = config.L
    if policy.uses_projection and policy.projector == "mc":
        c, o, j, lost, q = _mc_trajectory(policy, demand, costs, config, d, rep)
        return Trajectory(c, o, j, q[: len(d)], d, lost, L)
    if policy.uses_projection:
        proj = make_projector(demand, policy.K)
        f, rho, K, unit = proj.f, proj.rho, proj.K, proj.span
    else:
        f, rho, K, unit = np.zeros(1), -1.0, 1, 1.0
    nan = float("nan")
    c, o, j, lost, q, status = _simulate(
        policy.code, policy.r if policy.r is not None else nan,
        policy.S if policy.S is not None else nan, policy.cap if policy.cap is not None else nan,
        policy.xi if policy.xi is not None else nan,
        policy.switch_period if policy.switch_period is not None else -1,
        d, L, float(costs.h), float(costs.p), 0.0, config.initial_pipeline(), f, rho, K, unit)
    if status >= 0:
        raise OffGridError(f"state left the projection grid at period {status}")
    if status < -1:
        raise AssertionError(f"flow conservation failed at period {-2 - status}")
    return Trajectory(c, o, j, q[: len(d)], d, lost, L)


@dataclass(frozen=True)
class CostRateEstimate:
    mean: float
    se: float
    rep_means: np.ndarray = field(repr=False)
    warmup: int
    metadata: dict = field(default_factory=dict)

    @property
    def replications(self) -> int:
        return len(self.rep_means)


def _mean_se(x):
    x = np.asarray(x, float)
    se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else float("nan")
    return float(x.mean()), se


def estimate_cost_rate(policy: PolicySpec, demand: DemandModel, costs: CostParams,
                       config: SimConfig, hooks: dict | None = None) -> CostRateEstimate:
    """Replication means of the per-period cost over [max(L, W), T].

    ``hooks`` maps names to functions of (Trajectory, start) returning one
    number per replication; their means and standard errors land in metadata.
    """
    s = config.start
    rows = {k: [] for k in ("cost", "order", "inventory", "lost_fraction", "order_bound",
                            "max_J")}
    extra = {k: [] for k in (hooks or {})}
    for rep in range(config.replications):
        tr = simulate_trajectory(policy, demand, costs, config, rep)
        rows["cost"].append(tr.costs[s:].mean())
        rows["order"].append(tr.orders[s:].mean())
        rows["inventory"].append(tr.J[s:].mean())
        rows["lost_fraction"].append(tr.lost[s:].sum() / max(tr.demand[s:].sum(), 1e-300))
        # arrivals q_t for t >= L + 1 are the orders placed from period 1 on
        rows["order_bound"].append(tr.arrivals[config.L + 1:].mean()
                                   if len(tr.arrivals) > config.L + 1 else 0.0)
        rows["max_J"].append(tr.J[s:].max())
        for k, fn in (hooks or {}).items():
            extra[k].append(fn(tr, s))
    mean, se = _mean_se(rows["cost"])
    meta = {"policy": policy.to_config(), "L": config.L, "T": config.T,
            "replications": config.replications, "seed": config.seed, "crn": config.crn,
            "window": [s, config.T],
            "projector": policy.projector if policy.uses_projection else None}
    for k in ("order", "inventory", "lost_fraction", "order_bound"):
        meta[f"{k}_mean"], meta[f"{k}_se"] = _mean_se(rows[k])
    meta["max_J"] = float(np.max(rows["max_J"]))
    meta["rep_orders"] = [float(v) for v in rows["order"]]
    meta["rep_inventory"] = [float(v) for v in rows["inventory"]]
    meta["rep_lost_fraction"] = [float(v) for v in rows["lost_fraction"]]
    for k, v in extra.items():
        meta[f"{k}_mean"], meta[f"{k}_se"] = _mean_se(v)
    return CostRateEstimate(mean, se, np.asarray(rows["cost"]), config.W, meta)


def paired_difference(a: CostRateEstimate, b: CostRateEstimate) -> tuple[float, float]:
    """Mean and SE of a - b from per-replication differences."""
    return _mean_se(a.rep_means - b.rep_means)


@dataclass(frozen=True)
class IdentityCheck:
    residual: float
    se: float
    n_paths: int
    segment: tuple


def improvement_identity_check(table: ValueTable, costs: CostParams, t1: int, t2: int,
                               n_paths: int, seed: int, start=None) -> IdentityCheck:
    """Monte Carlo residual of the telescoping identity for the constant order r:

    E[sum_{t=t1}^{t2} c_t | J] - (v(J) - E[v(J_{t2+1}) | J] + (t2 + 1 - t1) C).

    ``start`` is an array of starting levels (cycled over paths) or a
    callable rng -> array of n_paths levels; by default the table grid up
    to the projected target.
    """
    if t2 < t1:
        raise BadParamError("segment needs t2 >= t1")
    demand = table.inc.demand
    rng = np.random.default_rng(seed)
    r = table.r
    if start is None:
        top = max(table.xi, 4 * table.r, demand.mu)
        if table.span is None:
            J0 = rng.uniform(0, top, n_paths)
        else:
            J0 = rng.integers(0, int(top / table.span) + 1, n_paths) * table.span
    elif callable(start):
        J0 = np.asarray(start(rng), float)
    else:
        J0 = np.resize(np.asarray(start, float), n_paths)
    J = J0.copy()
    total = np.zeros(n_paths)
    for _ in range(t2 - t1 + 1):
        d = sample(demand, rng, n_paths)
        avail = J + r
        total += costs.h * np.maximum(avail - d, 0) + costs.p * np.maximum(d - avail, 0)
        J = np.maximum(avail - d, 0.0)
        if table.span is not None:
            J = np.round(J / table.span) * table.span
    n = t2 + 1 - t1
    terms = total - (value_exact(table, J0) - value_exact(table, J) + n * table.cost_rate)
    mean, se = _mean_se(terms)
    return IdentityCheck(mean, se, n_paths, (t1, t2))
