"""Exact average-cost benchmark on a truncated grid, for small lead times.

State (J, q_t, ..., q_{t+L-1}) with J in [0, J_max] and each pipeline slot in
[0, q_max]; orders live on the same grid of span d/K. Inventory that would
exceed J_max is held at J_max.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse.linalg import spsolve

from .demand import DemandModel, on_grid
from .errors import (
    BadParamError,
    MultichainError,
    NoConvergenceError,
    NotLatticeError,
    StateBudgetExceededError,
)
from .policies import PolicySpec, make_projector, round_to_grid
from .value import CostParams

DEFAULT_STATE_BUDGET = 2_000_000


@dataclass(frozen=True)
class MdpModel:
    demand: DemandModel
    costs: CostParams
    L: int
    K: int
    nJ: int  # J cells 0..nJ
    nq: int  # order cells 0..nq
    P: np.ndarray = field(repr=False)  # P[y, j]: next J given J + q_t = y
    c: np.ndarray = field(repr=False)  # expected period cost given y
    truncation_mass: float

    @property
    def span(self) -> float:
        return self.demand.span / self.K

    @property
    def shape(self) -> tuple:
        return (self.nJ + 1,) + (self.nq + 1,) * self.L

    @property
    def n_states(self) -> int:
        return int(np.prod(self.shape))

    @property
    def J_max(self) -> float:
        return self.nJ * self.span

    @property
    def q_max(self) -> float:
        return self.nq * self.span


def _cells(x, span, name):
    n = on_grid(x, span)
    if n is None or n < 0:
        raise BadParamError(f"{name} = {x} is not a non-negative multiple of {span}")
    return n


def build_mdp(demand: DemandModel, costs: CostParams, L: int, J_max: float, q_max: float,
              K: int = 1, state_budget: int = DEFAULT_STATE_BUDGET) -> MdpModel:
    if not demand.is_lattice:
        raise NotLatticeError("the MDP benchmark needs a lattice demand")
    if L < 0:
        raise BadParamError("L must be non-negative")
    span = demand.span / K
    nJ, nq = _cells(J_max, span, "J_max"), _cells(q_max, span, "q_max")
    count = (nJ + 1) * (nq + 1) ** L
    if count > state_budget:
        raise StateBudgetExceededError(f"{count} states exceed the budget {state_budget}")
    ny = nJ + nq + 1
    f = np.zeros(ny)
    kmax = min(len(demand.pmf) - 1, (ny - 1) // K)
    f[: kmax * K + 1: K] = demand.pmf[: kmax + 1]
    surv = 1.0 - np.concatenate([[0.0], np.cumsum(f)])  # surv[s] = P(D' >= s)
    P = np.zeros((ny, nJ + 1))
    for y in range(ny):
        j = np.arange(1, y + 1)
        w = f[y - j]
        top = min(y, nJ)
        P[y, 1: top + 1] = w[:top]
        if y > nJ:
            P[y, nJ] += w[nJ:].sum()
        P[y, 0] = max(surv[y], 0.0)
    P /= P.sum(axis=1, keepdims=True)
    yv = np.arange(ny) * span
    dk = np.arange(len(demand.pmf)) * demand.span
    over = np.maximum(yv[:, None] - dk[None, :], 0.0) @ demand.pmf
    under = over - (yv - demand.mu)
    c = costs.h * over + costs.p * under
    trunc = float(demand.pmf[dk > J_max + 1e-12].sum())
    return MdpModel(demand, costs, L, int(K), nJ, nq, P, c, trunc)


def _q_values(mdp: MdpModel, V: np.ndarray) -> np.ndarray:
    """Q[x, a] for every state x (in ``mdp.shape``) and order cell a."""
    nJ, nq, L = mdp.nJ, mdp.nq, mdp.L
    if L == 0:
        EV = mdp.P @ V
        y = np.arange(nJ + 1)[:, None] + np.arange(nq + 1)[None, :]
        return mdp.c[y] + EV[y]
    # V[j', q_{t+1}, ..., q_{t+L-1}, a] -> expectation over j' given y
    E = (mdp.P @ V.reshape(nJ + 1, -1)).reshape((mdp.P.shape[0],) + (nq + 1,) * L)
    y = np.arange(nJ + 1)[:, None] + np.arange(nq + 1)[None, :]
    Q = E[y]  # (J, q_t, q_{t+1}, ..., a)
    return Q + mdp.c[y].reshape(y.shape + (1,) * (L))


@dataclass(frozen=True)
class MdpSolution:
    g_star: float
    bias: np.ndarray = field(repr=False)
    policy: np.ndarray = field(repr=False)  # order cells per state
    span_residual: float
    iterations: int
    lower: float
    upper: float
    truncation_mass: float
    boundary_mass: float | None = None


def relative_value_iteration(mdp: MdpModel, tol: float = 1e-9, max_iters: int = 100_000,
                             tau: float = 1.0) -> MdpSolution:
    """Relative value iteration with reference state 0.

    ``tau`` < 1 applies the aperiodicity transform P -> tau P + (1 - tau) I.
    Each sweep yields bounds min/max (T V - V) on the optimal average cost.
    """
    V = np.zeros(mdp.shape)
    lo, hi = -math.inf, math.inf
    for it in range(1, max_iters + 1):
        TV = _q_values(mdp, V).min(axis=-1)
        diff = TV - V
        lo, hi = float(diff.min()), float(diff.max())
        V = (1 - tau) * V + tau * TV
        V -= V.flat[0]
        if hi - lo <= tol:
            break
    else:
        raise NoConvergenceError(f"span {hi - lo:.3g} after {max_iters} sweeps")
    g = (lo + hi) / 2
    Q = _q_values(mdp, V)
    qmin = Q.min(axis=-1, keepdims=True)
    slack = 1e-12 * max(1.0, float(np.abs(qmin).max()))
    policy = np.argmax(Q <= qmin + slack, axis=-1)
    return MdpSolution(g, V, policy, hi - lo, it, lo, hi, mdp.truncation_mass)


def _state_index(mdp: MdpModel):
    return np.arange(mdp.n_states).reshape(mdp.shape)


def _policy_orders(mdp: MdpModel, policy: PolicySpec, clip: bool = True) -> np.ndarray:
    """Order cell per state. Orders beyond q_max are cut to q_max, or
    rejected when ``clip`` is off."""
    span = mdp.span
    states = np.indices(mdp.shape).reshape(mdp.L + 1, -1).T
    out = np.empty(len(states), dtype=np.int64)
    if policy.kind == "constant":
        out[:] = _cells(policy.r, span, "r")
    elif policy.kind in ("base_stock", "capped_base_stock"):
        pos = states.sum(axis=1) * span
        o = np.maximum(policy.S - pos, 0.0)
        if policy.kind == "capped_base_stock":
            o = np.minimum(o, policy.cap)
        out[:] = np.floor(o / span + 0.5 + 1e-9)
    elif policy.kind == "pil":
        proj = make_projector(mdp.demand, mdp.K)
        for i, s in enumerate(states):
            e = proj.__call__(s[0] * span, tuple(s[1:] * span)) if mdp.L else s[0] * span
            o = max(round_to_grid(policy.xi - e, span), 0.0) if policy.xi > 0 else 0.0
            out[i] = int(round(o / span))
    else:
        raise BadParamError(f"{policy.kind} is not a stationary policy")
    if clip:
        return np.minimum(out, mdp.nq)
    if out.max() > mdp.nq:
        raise BadParamError(f"{policy.label()} orders {out.max() * span} > q_max {mdp.q_max}")
    return out


def _chain(mdp: MdpModel, orders: np.ndarray):
    """Sparse transition matrix and cost vector of a stationary policy."""
    states = np.indices(mdp.shape).reshape(mdp.L + 1, -1).T
    n = len(states)
    y = states[:, 0] + (states[:, 1] if mdp.L else orders)
    cost = mdp.c[y]
    block = (mdp.nq + 1) ** mdp.L  # states per J level
    rest = np.arange(n) % block
    if mdp.L:
        tail = (rest % (block // (mdp.nq + 1))) * (mdp.nq + 1) + orders
    else:
        tail = np.zeros(n, dtype=np.int64)
    W = mdp.P[y]  # (n, nJ + 1)
    i, j = np.nonzero(W)
    M = sparse.csr_matrix((W[i, j], (i, j * block + tail[i])), shape=(n, n))
    return M, cost


def _closed_law(M, members):
    sub = M[members][:, members]
    A = (sub.T - sparse.identity(len(members))).tolil()
    A[0, :] = 1.0
    b = np.zeros(len(members))
    b[0] = 1.0
    pi = np.clip(spsolve(A.tocsc(), b), 0.0, None)
    return pi / pi.sum()


def stationary_distribution(M: sparse.csr_matrix, start: int | None = None) -> np.ndarray:
    """Stationary law of the chain.

    With more than one closed class this raises, unless ``start`` names a
    state: then the limit law from that state is returned, mixing the closed
    classes by their absorption probabilities.
    """
    n = M.shape[0]
    ncomp, labels = csgraph.connected_components(M, directed=True, connection="strong")
    C = sparse.coo_matrix(M)
    leaving = np.zeros(ncomp, dtype=bool)
    cross = labels[C.row] != labels[C.col]
    leaving[labels[C.row[cross]]] = True
    closed = np.flatnonzero(~leaving)
    if len(closed) != 1 and start is None:
        raise MultichainError(f"policy has {len(closed)} closed classes")
    pi = np.zeros(n)
    if len(closed) == 1:
        members = np.flatnonzero(labels == closed[0])
        pi[members] = _closed_law(M, members)
        return pi
    in_closed = np.isin(labels, closed)
    trans = np.flatnonzero(~in_closed)
    weights = np.zeros(len(closed))
    if in_closed[start]:
        weights[np.flatnonzero(closed == labels[start])[0]] = 1.0
    else:
        pos = {s: i for i, s in enumerate(trans)}
        Q = M[trans][:, trans]
        A = (sparse.identity(len(trans)) - Q).tocsc()
        for c, lab in enumerate(closed):
            R = np.asarray(M[trans][:, np.flatnonzero(labels == lab)].sum(axis=1)).ravel()
            weights[c] = spsolve(A, R)[pos[start]]
    for c, lab in enumerate(closed):
        if weights[c] > 0:
            members = np.flatnonzero(labels == lab)
            pi[members] += weights[c] * _closed_law(M, members)
    return pi / pi.sum()


def exact_policy_eval(mdp: MdpModel, policy: PolicySpec, return_pi: bool = False,
                      clip: bool = True, start: int | None = None):
    """Long-run average cost of a stationary policy on the truncated chain.

    Pass ``start`` (a flat state index; 0 is the empty system) to allow
    policies whose truncated chain splits into several closed classes.
    """
    orders = _policy_orders(mdp, policy, clip)
    M, cost = _chain(mdp, orders)
    pi = stationary_distribution(M, start)
    g = float(pi @ cost)
    return (g, pi) if return_pi else g


def greedy_policy_eval(mdp: MdpModel, sol: MdpSolution) -> tuple[float, float]:
    """Average cost of the RVI policy and its stationary mass at J = J_max."""
    M, cost = _chain(mdp, sol.policy.reshape(-1))
    pi = stationary_distribution(M)
    return float(pi @ cost), float(pi.reshape(mdp.shape)[-1].sum())


def newsvendor(demand: DemandModel, costs: CostParams) -> tuple[float, float]:
    """(order-up-to level, expected cost) at the p/(p+h) fractile."""
    demand.require_lattice()
    frac = costs.p / (costs.p + costs.h)
    cdf = demand.cdf_grid()
    k = int(np.searchsorted(cdf, frac - 1e-15))
    y = k * demand.span
    dk = np.arange(len(demand.pmf)) * demand.span
    cost = costs.h * (np.maximum(y - dk, 0) @ demand.pmf) + costs.p * (np.maximum(dk - y, 0) @ demand.pmf)
    return y, float(cost)
