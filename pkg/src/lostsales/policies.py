"""Ordering policies and the pipeline projection E[J_{t+L} | state].

Exact projection runs on an integer grid of span d/K. PIL orders computed
with it are rounded to that grid so the inventory process stays on the grid
and the next projection is exact again.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ._lattice import dense_demand
from .demand import DemandModel, on_grid, refinement_for, sample
from .errors import BadParamError, NotLatticeError, OffGridError

CONSTANT, BASE_STOCK, CAPPED, PIL, HYBRID = range(5)
KIND_CODES = {"constant": CONSTANT, "base_stock": BASE_STOCK,
              "capped_base_stock": CAPPED, "pil": PIL, "hybrid_switch": HYBRID}


@dataclass(frozen=True)
class SystemState:
    J: float
    pipeline: tuple = ()
    t: int = 0

    def __post_init__(self):
        object.__setattr__(self, "pipeline", tuple(float(q) for q in self.pipeline))
        if self.J < 0 or any(q < 0 for q in self.pipeline):
            raise BadParamError("inventory and pipeline entries must be non-negative")

    @property
    def L(self) -> int:
        return len(self.pipeline)

    @property
    def position(self) -> float:
        return self.J + sum(self.pipeline)


@dataclass(frozen=True)
class PolicySpec:
    kind: str
    r: float | None = None
    S: float | None = None
    cap: float | None = None
    xi: float | None = None
    switch_period: int | None = None
    projector: str = "exact"
    K: int = 1  # projection grid is d/K
    n_paths: int = 4000

    def __post_init__(self):
        if self.kind not in KIND_CODES:
            raise BadParamError(f"unknown policy kind {self.kind!r}")
        for name in ("r", "S", "cap", "xi"):
            v = getattr(self, name)
            if v is not None and (v < 0 and name != "xi"):
                raise BadParamError(f"{name} must be non-negative")
        if self.projector not in ("exact", "mc"):
            raise BadParamError("projector must be 'exact' or 'mc'")

    @property
    def code(self) -> int:
        return KIND_CODES[self.kind]

    @property
    def uses_projection(self) -> bool:
        return self.kind in ("pil", "hybrid_switch")

    def label(self) -> str:
        parts = [f"{k}={getattr(self, k)}" for k in ("r", "S", "cap", "xi", "switch_period")
                 if getattr(self, k) is not None]
        return f"{self.kind}({', '.join(parts)})"

    def to_config(self) -> dict:
        out = {"kind": self.kind}
        for k in ("r", "S", "cap", "xi", "switch_period"):
            if getattr(self, k) is not None:
                out[k] = getattr(self, k)
        if self.uses_projection:
            out.update(projector=self.projector, K=self.K)
        return out


def constant(r) -> PolicySpec:
    return PolicySpec("constant", r=float(r))


def base_stock(S) -> PolicySpec:
    return PolicySpec("base_stock", S=float(S))


def capped_base_stock(S, cap) -> PolicySpec:
    return PolicySpec("capped_base_stock", S=float(S), cap=float(cap))


def pil(xi, projector="exact", K=1, n_paths=4000) -> PolicySpec:
    return PolicySpec("pil", xi=float(xi), projector=projector, K=int(K), n_paths=n_paths)


def hybrid_switch(xi, r, switch_period, projector="exact", K=1) -> PolicySpec:
    return PolicySpec("hybrid_switch", r=float(r), xi=float(xi),
                      switch_period=int(switch_period), projector=projector, K=int(K))


def policy_from_config(cfg: dict) -> PolicySpec:
    cfg = dict(cfg)
    kind = cfg.pop("kind")
    return PolicySpec(kind, **cfg)


# projection kernels -------------------------------------------------------


PROJ_EPS = 1e-18  # cells above the support top with less mass are dropped


@njit(cache=True)
def _step_geometric(buf, top, s, rho, K):
    """In place: law of (J + s - D)^+ with D = K * Geometric(rho).

    ``buf[:top + 1]`` holds the law of J; returns the new top index.
    """
    top += s
    a = 1.0 - rho
    rest = 0.0
    lo = max(s, 1)
    if K == 1:
        v = 0.0
        for y in range(top, lo - 1, -1):
            v = a * buf[y - s] + rho * v
            buf[y] = v
            rest += v
        for y in range(min(s, top + 1) - 1, 0, -1):
            v = rho * v
            buf[y] = v
            rest += v
    else:
        for y in range(top, 0, -1):
            x = buf[y - s] if y >= s else 0.0
            nxt = buf[y + K] if y + K <= top else 0.0
            v = a * x + rho * nxt
            buf[y] = v
            rest += v
    buf[0] = max(1.0 - rest, 0.0)
    while top > 0 and buf[top] < PROJ_EPS:
        buf[top] = 0.0
        top -= 1
    return top


@njit(cache=True)
def _step_general(buf, top, s, f, tmp):
    top += s
    m = len(f)
    for y in range(top, -1, -1):
        tmp[y] = buf[y - s] if y >= s else 0.0
    rest = 0.0
    for y in range(1, top + 1):
        acc = 0.0
        for k in range(min(m, top + 1 - y)):
            acc += f[k] * tmp[y + k]
        buf[y] = acc
        rest += acc
    buf[0] = max(1.0 - rest, 0.0)
    while top > 0 and buf[top] < PROJ_EPS:
        buf[top] = 0.0
        top -= 1
    return top


@njit(cache=True)
def project_units(J, pipe, f, rho, K):
    """Mean of J after len(pipe) Lindley steps, all in grid units."""
    n = J + 1
    for i in range(len(pipe)):
        n += pipe[i]
    buf = np.zeros(n + 1)
    buf[J] = 1.0
    top = J
    if rho >= 0.0:
        for i in range(len(pipe)):
            top = _step_geometric(buf, top, pipe[i], rho, K)
    else:
        tmp = np.zeros(n + 1)
        for i in range(len(pipe)):
            top = _step_general(buf, top, pipe[i], f, tmp)
    mean = 0.0
    for y in range(top + 1):
        mean += y * buf[y]
    return mean


@dataclass(frozen=True)
class Projector:
    """Grid data needed by ``project_units`` for one demand law and K."""

    demand: DemandModel
    K: int
    f: np.ndarray = field(repr=False)
    rho: float

    @property
    def span(self) -> float:
        return self.demand.span / self.K

    def units(self, x) -> int:
        n = on_grid(x, self.span, tol=1e-7)
        if n is None or n < 0:
            raise OffGridError(f"{x} is not on the projection grid of span {self.span}")
        return n

    def __call__(self, J, pipeline) -> float:
        if len(pipeline) == 0:
            return float(J)
        pipe = np.array([self.units(q) for q in pipeline], dtype=np.int64)
        return project_units(self.units(J), pipe, self.f, self.rho, self.K) * self.span


def make_projector(demand: DemandModel, K: int = 1) -> Projector:
    if not demand.is_lattice:
        raise NotLatticeError("exact projection needs a lattice demand")
    rho = float(demand.params["rho"]) if demand.family == "geometric" else -1.0
    return Projector(demand, int(K), dense_demand(demand.pmf, int(K)), rho)


def project_inventory_exact(state: SystemState, demand: DemandModel, K: int | None = None) -> float:
    """E[J_{t+L} | state] by L exact Lindley steps from a point mass at J."""
    if not demand.is_lattice:
        raise NotLatticeError("exact projection needs a lattice demand")
    if state.L == 0:
        return float(state.J)
    if K is None:
        K = max(refinement_for(v, demand) for v in (state.J, *state.pipeline))
    return make_projector(demand, K)(state.J, state.pipeline)


def project_inventory_mc(state: SystemState, demand: DemandModel, n_paths: int,
                         seed: int) -> tuple[float, float]:
    """Monte Carlo E[J_{t+L} | state] with its standard error."""
    if n_paths < 1:
        raise BadParamError("n_paths must be at least 1")
    if state.L == 0:
        return float(state.J), 0.0
    rng = np.random.default_rng(seed)
    J = np.full(n_paths, float(state.J))
    for q in state.pipeline:
        J = np.maximum(J + q - sample(demand, rng, n_paths), 0.0)
    se = float(J.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else 0.0
    return float(J.mean()), se


def round_to_grid(x: float, span: float) -> float:
    return math.floor(x / span + 0.5) * span


def decide(spec: PolicySpec, state: SystemState, demand: DemandModel, seed: int = 0) -> float:
    """Order placed in ``state`` under ``spec``."""
    kind = spec.kind
    if kind == "constant":
        return spec.r
    if kind == "base_stock":
        return max(spec.S - state.position, 0.0)
    if kind == "capped_base_stock":
        return min(max(spec.S - state.position, 0.0), spec.cap)
    if kind == "hybrid_switch" and state.t > spec.switch_period + state.L:
        return spec.r
    if spec.xi <= 0:
        return 0.0
    if spec.projector == "mc":
        proj, _ = project_inventory_mc(state, demand, spec.n_paths, seed)
        return max(spec.xi - proj, 0.0)
    proj = project_inventory_exact(state, demand, spec.K)
    return max(round_to_grid(spec.xi - proj, demand.span / spec.K), 0.0)
