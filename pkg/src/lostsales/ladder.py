"""Ascending ladder heights, renewal measure and the stationary inventory level.

Everything lattice-valued is computed on integer grids. Heights and renewal
tables are reported on the refined grid of span ``d' = d/K``; internally the
walk is moved to the coarsest grid it actually lives on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import signal, stats

from ._lattice import lindley_step, reduced_walk
from .demand import (
    DemandModel,
    IncrementModel,
    increment_model,
    refinement_for,
)
from .errors import (
    AtomOneError,
    BadParamError,
    BeyondTableError,
    CapExceededError,
    DegenerateLadderError,
    DepthExceededError,
    NotLatticeError,
    RootFindingError,
    WalkCapError,
)

EXACT = "exact-absorbing-chain"
MONTE_CARLO = "monte-carlo"
ANALYTIC = "analytic"


@dataclass(frozen=True)
class LadderDistribution:
    """Law of the first weak ascending ladder height.

    Lattice: ``pmf[k]`` = P(H = k * span). Continuous Monte Carlo runs keep
    the raw ``samples`` instead.
    """

    pmf: np.ndarray | None
    span: float | None
    residual_mass: float
    method: str
    lattice_span: float | None = None
    sample_count: int = 0
    samples: np.ndarray | None = field(default=None, repr=False)
    mean_tau: float | None = None
    tau_se: float | None = None

    @property
    def total_mass(self) -> float:
        return float(self.pmf.sum()) if self.pmf is not None else 1.0

    @property
    def heights(self) -> np.ndarray:
        return np.arange(len(self.pmf)) * self.span


def ascending_ladder_exact(inc: IncrementModel, depth_bound: float | None = None,
                           mass_tol: float = 1e-12, max_iter: int = 10**6) -> LadderDistribution:
    """Propagate the walk's mass over negative levels until almost all of it
    has crossed into [0, inf).

    ``depth_bound`` is in the units of Y. Without it, levels whose combined
    mass is negligible (below ``mass_tol * 1e-3``) are trimmed as they appear.
    """
    if not inc.is_lattice:
        raise NotLatticeError("exact ladder needs a lattice demand")
    unit, a, f = reduced_walk(inc)
    stride = int(round(unit / inc.span))
    if a == 0:
        pmf = np.zeros(stride * (len(f) - 1) + 1)
        pmf[::stride] = f
        return LadderDistribution(pmf, inc.span, 0.0, EXACT, unit, mean_tau=1.0)

    B = None if depth_bound is None else int(math.floor(depth_bound / unit + 1e-9))
    nh = max(len(f) - a, 1)
    heights = np.zeros(nh)
    # first step: levels -a..-1 stay negative, the rest is absorbed
    m = f[:a].copy()
    heights[: len(f) - a] += f[a:]
    escaped = dropped = 0.0
    mean_tau = 1.0
    trim = mass_tol * 1e-3
    for _ in range(max_iter):
        left = m.sum()
        if left < mass_tol:
            break
        mean_tau += left
        n = len(m)
        c = signal.convolve(m, f)
        np.clip(c, 0.0, None, out=c)
        hi = c[n + a:]
        heights[: len(hi)] += hi
        m = c[: n + a]
        if B is not None and len(m) > B:
            escaped += m[: len(m) - B].sum()
            m = m[len(m) - B:]
            if escaped > mass_tol:
                raise DepthExceededError(
                    f"mass {escaped:.3g} fell below depth {depth_bound}")
        else:
            cut = np.searchsorted(np.cumsum(m), trim)
            if cut:
                dropped += m[:cut].sum()
                m = m[cut:]
    else:
        raise DepthExceededError(f"ladder mass {m.sum():.3g} left after {max_iter} steps")
    pmf = np.zeros(stride * (nh - 1) + 1)
    pmf[::stride] = heights
    return LadderDistribution(pmf, inc.span, float(m.sum() + escaped + dropped), EXACT, unit,
                              mean_tau=mean_tau)


def ascending_ladder_mc(inc: IncrementModel, n_walks: int, seed: int,
                        step_cap: int = 10**7) -> LadderDistribution:
    """Run ``n_walks`` independent walks until each first reaches [0, inf)."""
    rng = np.random.default_rng(seed)
    demand = inc.demand
    if inc.is_lattice:
        unit, a, _ = reduced_walk(inc)
        g = math.gcd(inc.K * demand.support_gcd, inc.r_steps)
        cdf = demand.cdf_grid()
        pos = np.zeros(n_walks, dtype=np.int64)
    else:
        pos = np.zeros(n_walks)
    steps = np.zeros(n_walks, dtype=np.int64)
    active = np.arange(n_walks)
    while active.size:
        if inc.is_lattice:
            k = np.searchsorted(cdf, rng.random(active.size), side="right")
            k = np.minimum(k, len(cdf) - 1)
            pos[active] += (inc.K * k) // g - a
        else:
            pos[active] += rng.exponential(demand.mu, active.size) - inc.r
        steps[active] += 1
        active = active[pos[active] < 0]
        if active.size and steps[active[0]] >= step_cap:
            raise WalkCapError(f"{active.size} walks still below 0 after {step_cap} steps")
    tau_se = float(steps.std(ddof=1) / math.sqrt(n_walks)) if n_walks > 1 else 0.0
    if inc.is_lattice:
        stride = g
        counts = np.bincount(pos * stride) / n_walks
        return LadderDistribution(counts, inc.span, 0.0, MONTE_CARLO, unit, n_walks,
                                  samples=pos * unit, mean_tau=float(steps.mean()), tau_se=tau_se)
    return LadderDistribution(None, None, 0.0, MONTE_CARLO, None, n_walks, samples=pos,
                              mean_tau=float(steps.mean()), tau_se=tau_se)


@dataclass(frozen=True)
class LadderSummary:
    dist: LadderDistribution
    mu_plus: float
    sigma_plus: float
    kappa: float
    lattice: bool
    span: float | None  # lattice span used in kappa
    mu_plus_se: float = 0.0
    kappa_se: float = 0.0
    mu_Y: float | None = None

    @property
    def sigma2_plus(self) -> float:
        return self.sigma_plus**2

    @property
    def second_moment(self) -> float:
        return self.sigma_plus**2 + self.mu_plus**2

    @property
    def atom(self) -> float:
        return float(self.dist.pmf[0] / self.dist.total_mass) if self.dist.pmf is not None else 0.0


def kappa_value(mu, sigma2, span=None):
    extra = span * mu if span else 0.0
    return (sigma2 + mu**2 + extra) / (2 * mu**2)


def ladder_moments_kappa(dist: LadderDistribution, lattice: bool | None = None,
                         span: float | None = None) -> LadderSummary:
    """Moments of the ladder height and the renewal constant kappa."""
    if lattice is None:
        lattice = dist.pmf is not None
    if lattice and span is None:
        span = dist.lattice_span
    mu_se = kappa_se = 0.0
    if dist.pmf is not None and dist.method != MONTE_CARLO:
        w = dist.pmf / dist.pmf.sum()
        x = dist.heights
        mu = float(w @ x)
        var = float(w @ (x - mu) ** 2)
    else:
        x = np.asarray(dist.samples, dtype=float)
        n = len(x)
        mu = float(x.mean())
        var = float(x.var())
        m2 = var + mu**2
        if mu > 0 and n > 1:
            s = span if lattice else 0.0
            grad = np.array([s / (2 * mu**2) - (m2 + s * mu) / mu**3, 1 / (2 * mu**2)])
            cov = np.cov(np.vstack([x, x**2])) / n
            kappa_se = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
            mu_se = float(x.std(ddof=1) / math.sqrt(n))
    if not mu > 0:
        raise DegenerateLadderError("ladder height has zero mean")
    kappa = kappa_value(mu, var, span if lattice else None)
    return LadderSummary(dist, mu, math.sqrt(var), kappa, bool(lattice),
                         span if lattice else None, mu_se, kappa_se)


def exponential_ladder(demand: DemandModel, r: float | None = None) -> LadderSummary:
    """Closed form: for exponential demand the ladder height is Exp(rate)."""
    if demand.family != "exponential":
        raise BadParamError("analytic ladder is only available for exponential demand")
    mu = demand.mu
    dist = LadderDistribution(None, None, 0.0, ANALYTIC)
    return LadderSummary(dist, mu, mu, 1.0, False, None,
                         mu_Y=None if r is None else demand.mu - r)


def ladder_summary(inc: IncrementModel, **kw) -> LadderSummary:
    """Exact summary for lattice demand, analytic one for exponential demand."""
    if inc.is_lattice:
        s = ladder_moments_kappa(ascending_ladder_exact(inc, **kw))
        return replace(s, mu_Y=inc.mu)
    return exponential_ladder(inc.demand, inc.r)


@dataclass(frozen=True)
class RenewalTable:
    """Renewal function U on the grid ``k * span``, ``0 <= k * span <= x_max``.

    U is a right-continuous step function, so integrals of U are exact.
    """

    span: float
    x_max: float
    u: np.ndarray = field(repr=False)
    mu_plus: float
    kappa: float

    @property
    def grid(self) -> np.ndarray:
        return np.arange(len(self.u)) * self.span

    @property
    def values(self) -> np.ndarray:
        return np.cumsum(self.u)

    @property
    def correction(self) -> np.ndarray:
        return self.values - self.grid / self.mu_plus - self.kappa

    def _index(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x > self.x_max * (1 + 1e-12) + 1e-12):
            raise BeyondTableError(f"x = {np.max(x)} beyond table range {self.x_max}")
        return x, np.floor(x / self.span + 1e-9).astype(np.int64)

    def U(self, x):
        x, k = self._index(x)
        vals = self.values
        return np.where(x < 0, 0.0, vals[np.clip(k, 0, len(vals) - 1)])

    def integral_U(self, x):
        """Exact integral of U over [0, x]; zero for x <= 0."""
        x, k = self._index(x)
        vals = self.values
        left = np.concatenate([[0.0], np.cumsum(vals) * self.span])
        kc = np.clip(k, 0, len(vals) - 1)
        out = left[kc] + (x - kc * self.span) * vals[kc]
        return np.where(x <= 0, 0.0, out)

    def g(self, x):
        """U(x) - x/mu_plus - kappa, with U = 0 for negative arguments."""
        x = np.asarray(x, dtype=float)
        return self.U(x) - x / self.mu_plus - self.kappa

    def g_integral(self, x):
        x = np.asarray(x, dtype=float)
        return self.integral_U(x) - x**2 / (2 * self.mu_plus) - self.kappa * x


@dataclass(frozen=True)
class AnalyticRenewal:
    """Renewal function 1 + rate * x of an Exp(rate) ladder height."""

    rate: float
    x_max: float = math.inf
    mu_plus: float = field(init=False)
    kappa: float = 1.0
    span: None = None

    def __post_init__(self):
        object.__setattr__(self, "mu_plus", 1 / self.rate)

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x > self.x_max):
            raise BeyondTableError(f"x beyond table range {self.x_max}")
        return x

    def U(self, x):
        x = self._check(x)
        return np.where(x < 0, 0.0, 1 + self.rate * x)

    def integral_U(self, x):
        x = self._check(x)
        return np.where(x <= 0, 0.0, x + self.rate * x**2 / 2)

    def g(self, x):
        x = np.asarray(x, dtype=float)
        return self.U(x) - x / self.mu_plus - self.kappa

    def g_integral(self, x):
        x = np.asarray(x, dtype=float)
        return self.integral_U(x) - x**2 / (2 * self.mu_plus) - self.kappa * x


def renewal_measure(summary: LadderSummary, x_max: float):
    """Solve (1 - beta) u(k) = delta(k) + sum_{j>=1} g(j) u(k - j) on the grid."""
    dist = summary.dist
    if dist.method == ANALYTIC:
        return AnalyticRenewal(1 / summary.mu_plus, x_max)
    if dist.pmf is None:
        raise NotLatticeError("renewal tables need a lattice ladder distribution")
    if dist.method == MONTE_CARLO:
        raise BadParamError("renewal tables are built from exact ladder distributions")
    stride = int(round(dist.lattice_span / dist.span))
    gp = dist.pmf[::stride] / dist.pmf.sum()
    beta = gp[0]
    if beta >= 1 - 1e-15:
        raise AtomOneError("ladder height is zero with probability one")
    n_pts = int(math.floor(x_max / dist.span + 1e-9)) + 1
    n = (n_pts - 1) // stride + 1
    u = np.zeros(n)
    tail = gp[1:][::-1]
    m = len(tail)
    for k in range(n):
        acc = 1.0 if k == 0 else 0.0
        if k:
            lo = max(0, k - m)
            acc += tail[m - (k - lo):] @ u[lo:k]
        u[k] = acc / (1 - beta)
    dense = np.zeros(n_pts)
    dense[::stride] = u
    return RenewalTable(dist.span, float(x_max), dense, summary.mu_plus, summary.kappa)


# stationary inventory ------------------------------------------------------


@dataclass(frozen=True)
class StationaryInventory:
    pmf: np.ndarray = field(repr=False)
    unit: float
    mean: float
    iterations: int
    tv_residual: float
    J_cap: float


def _increment(demand, r, K):
    demand.require_lattice()
    if K is None:
        K = refinement_for(r, demand)
    return increment_model(demand, r, K)


def default_cap(demand: DemandModel, r: float) -> float:
    mu_y = demand.mu - r
    return demand.mu * max(64.0, 32.0 * demand.sigma / mu_y)


def stationary_inventory(demand: DemandModel, r: float, tv_tol: float = 1e-12,
                         J_cap: float | None = None, K: int | None = None,
                         max_iter: int = 10**6, max_doublings: int = 6) -> StationaryInventory:
    """Fixed point of J -> (J + r - D)^+ by power iteration from J = 0."""
    inc = _increment(demand, r, K)
    if r == 0:
        return StationaryInventory(np.array([1.0]), inc.span, 0.0, 0, 0.0, 0.0)
    unit, a, f = reduced_walk(inc)
    auto = J_cap is None
    cap_x = default_cap(demand, r) if auto else float(J_cap)
    for _ in range(max_doublings + 1):
        cap = int(math.ceil(cap_x / unit))
        pi = np.zeros(cap + 1)
        pi[0] = 1.0
        resid = math.inf
        it = 0
        while it < max_iter:
            new = lindley_step(pi, a, f)
            top = new[cap:].sum()
            new = new[: cap + 1]
            new[cap] = top
            new /= new.sum()
            resid = float(np.abs(new - pi).sum())
            pi = new
            it += 1
            if resid < tv_tol:
                break
        if pi[cap] <= tv_tol:
            mean = float(np.arange(cap + 1) @ pi) * unit
            return StationaryInventory(pi, unit, mean, it, resid, cap * unit)
        if not auto:
            break
        cap_x *= 2
    raise CapExceededError(f"stationary mass {pi[cap]:.3g} at the cap {cap * unit}")


@dataclass(frozen=True)
class SpitzerResult:
    mean: float
    last_term: float
    t_max: int
    exact_terms: int
    se: float = 0.0


def spitzer_mean(demand: DemandModel, r: float, t_max: int = 500, mc_budget: int = 10**5,
                 K: int | None = None, seed: int = 0, max_cells: int = 2_000_000) -> SpitzerResult:
    """Partial sum of (1/t) E[(t r - D_1 - ... - D_t)^+] for t = 1..t_max.

    Lattice terms come from exact convolutions while the truncated law of the
    partial sum fits in ``max_cells``; later terms use ``mc_budget`` paths.
    Exponential terms use the Gamma closed form.
    """
    if r == 0:
        return SpitzerResult(0.0, 0.0, t_max, t_max)
    terms = np.zeros(t_max)
    var = np.zeros(t_max)
    exact = 0
    if demand.is_lattice:
        inc = _increment(demand, r, K)
        unit, a, f = reduced_walk(inc)
        limit = t_max * a
        dist = np.array([1.0])
        t0 = t_max
        for t in range(1, t_max + 1):
            if min(len(dist) + len(f), limit) > max_cells:
                t0 = t - 1
                break
            dist = np.convolve(dist, f)[:limit]
            n = min(len(dist), t * a)
            terms[t - 1] = unit * (np.arange(t * a, t * a - n, -1) @ dist[:n]) / t
            exact = t
        if t0 < t_max:
            rng = np.random.default_rng(seed)
            cdf = demand.cdf_grid()
            s = np.zeros(mc_budget)
            for _ in range(t_max):
                k = np.minimum(np.searchsorted(cdf, rng.random(mc_budget), side="right"), len(cdf) - 1)
                s += k * demand.span
                t = _ + 1
                if t > t0:
                    x = np.maximum(t * r - s, 0) / t
                    terms[t - 1] = x.mean()
                    var[t - 1] = x.var(ddof=1) / mc_budget
    elif demand.family == "exponential":
        t = np.arange(1, t_max + 1)
        lam = 1 / demand.mu
        x = t * r
        terms = (x * stats.gamma.cdf(x, t, scale=1 / lam)
                 - t / lam * stats.gamma.cdf(x, t + 1, scale=1 / lam)) / t
        exact = t_max
    else:
        raise NotLatticeError(f"no Spitzer route for {demand.family}")
    return SpitzerResult(float(terms.sum()), float(terms[-1]), t_max, exact,
                         float(math.sqrt(var.sum())))


@dataclass(frozen=True)
class RootsResult:
    mean: float
    roots: np.ndarray = field(repr=False)
    max_residual: float
    iterations: int


def stationary_mean_roots(inc: IncrementModel, tol: float = 1e-12,
                          fp_iters: int = 20_000) -> RootsResult:
    """E[J] from the roots of z^a = E[z^C] inside the unit disk.

    On the reduced grid, J' = (J + a - C)^+ with integer a and C. The
    stationary pgf is prod_i (1 - z_i)/(1 - z_i z) over the roots z_i with
    |z_i| < 1, hence E[J] = sum_i z_i/(1 - z_i) grid units.
    """
    if not inc.is_lattice:
        raise NotLatticeError("root method needs a lattice demand")
    unit, a, f = reduced_walk(inc)
    idx = np.flatnonzero(f > 0)
    cmin = int(idx[0])
    if a <= cmin:
        return RootsResult(0.0, np.zeros(0), 0.0, 0)
    # factor z^cmin out of both sides
    n = a - cmin
    step = math.gcd(*(int(i) for i in idx - cmin)) if len(idx) > 1 else 1
    coef = f[cmin::step][::-1]  # polynomial in w = z^step, highest power first
    dcoef = np.polyder(coef)
    omega = np.exp(2j * np.pi * np.arange(n) / n)

    def B(z):
        return np.polyval(coef, z**step)

    z = np.zeros(n, dtype=complex)
    it = 0
    for it in range(1, fp_iters + 1):
        new = omega * B(z) ** (1.0 / n)
        delta = np.max(np.abs(new - z))
        z = new
        if delta < 1e-9:
            break
    for _ in range(100):
        w = z**step
        fz = z**n - np.polyval(coef, w)
        dfz = n * z ** (n - 1) - step * z ** (step - 1) * np.polyval(dcoef, w)
        dz = fz / dfz
        z = z - dz
        if np.max(np.abs(dz)) < tol:
            break
    resid = float(np.max(np.abs(z**n - B(z))))
    if np.any(np.abs(z) >= 1 - 1e-13) or resid > 1e-9:
        raise RootFindingError(f"root polish failed (residual {resid:.3g})")
    if n > 1:
        d = np.abs(z[:, None] - z[None, :]) + np.eye(n)
        if d.min() < 1e-10:
            raise RootFindingError("roots are not distinct")
    s = np.sum(z / (1 - z))
    if abs(s.imag) > 1e-6 * max(1.0, abs(s.real)):
        raise RootFindingError("root sum is not real")
    return RootsResult(float(s.real) * unit, z, resid, it)


def ladder_mean_identity(summary: LadderSummary, inc: IncrementModel) -> float:
    """E[J] = E[Y^2]/(2 E[Y]) - E[H^2]/(2 E[H]) with H the ladder height."""
    ey2 = inc.sigma2 + inc.mu**2
    return ey2 / (2 * inc.mu) - summary.second_moment / (2 * summary.mu_plus)


def stationary_mean(demand: DemandModel, r: float, K: int | None = None) -> float:
    """E[J] under the constant order r: roots for lattice demand, closed form
    for exponential demand."""
    if r == 0:
        return 0.0
    if demand.is_lattice:
        return stationary_mean_roots(_increment(demand, r, K)).mean
    inc = increment_model(demand, r)
    return ladder_mean_identity(exponential_ladder(demand, r), inc)
