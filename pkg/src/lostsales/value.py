"""Relative value function of the constant-order policy.

v(x) = (h mu_plus / mu_Y) * int_0^x U(y) dy - (h + p) x, with U the renewal
function of the ascending ladder height. It splits as

    v(x) = b ((x - xi_t)^2 - xi_t^2) + 2 b mu_plus int_0^x g(y) dy,

b = h / (2 mu_Y). Two variants of the constant xi_t are kept: ``derived``
(mu_Y (p/h + 1) - mu_plus * kappa), which makes the split exact, and
``as-printed`` (mu_Y (p/h + 1) - kappa), kept for comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .demand import DemandModel, IncrementModel, increment_model
from .errors import BadParamError, NotLatticeError, OffGridError
from .ladder import (
    LadderSummary,
    exponential_ladder,
    ladder_summary,
    renewal_measure,
    stationary_mean,
    stationary_mean_roots,
)

CONVENTIONS = ("derived", "as-printed")


@dataclass(frozen=True)
class CostParams:
    h: float
    p: float

    def __post_init__(self):
        if self.h < 0 or self.p < 0:
            raise BadParamError("cost parameters must be non-negative")

    def require_h(self):
        if not self.h > 0:
            raise BadParamError("value-function work needs h > 0")


def _check_convention(convention):
    if convention not in CONVENTIONS:
        raise BadParamError(f"convention must be one of {CONVENTIONS}")


def xi_tilde(mu_Y: float, costs: CostParams, ladder: LadderSummary,
             convention: str = "derived") -> float:
    _check_convention(convention)
    costs.require_h()
    shift = ladder.mu_plus * ladder.kappa if convention == "derived" else ladder.kappa
    return mu_Y * (costs.p / costs.h + 1) - shift


def pil_target(r: float, costs: CostParams, ladder: LadderSummary,
               convention: str = "derived", mu_D: float | None = None) -> float:
    """Target xi(r) = xi_tilde(r) + r of the projected-inventory policy."""
    mu_Y = (mu_D - r) if mu_D is not None else ladder.mu_Y
    if mu_Y is None:
        raise BadParamError("pass mu_D or a summary that carries mu_Y")
    return xi_tilde(mu_Y, costs, ladder, convention) + r


@dataclass(frozen=True)
class ValueTable:
    inc: IncrementModel
    ladder: LadderSummary
    renewal: object
    costs: CostParams
    EJ_inf: float
    convention: str = "derived"

    @property
    def r(self) -> float:
        return self.inc.r

    @property
    def mu_Y(self) -> float:
        return self.inc.mu

    @property
    def b(self) -> float:
        return self.costs.h / (2 * self.mu_Y)

    @property
    def xi_tilde(self) -> float:
        return xi_tilde(self.mu_Y, self.costs, self.ladder, self.convention)

    @property
    def xi(self) -> float:
        return self.xi_tilde + self.r

    @property
    def x_max(self) -> float:
        return self.renewal.x_max

    @property
    def span(self) -> float | None:
        return self.inc.span

    @property
    def cost_rate(self) -> float:
        """Long-run cost of the constant order: h E[J] + p mu_Y."""
        return self.costs.h * self.EJ_inf + self.costs.p * self.mu_Y

    def grid(self, x_max: float | None = None) -> np.ndarray:
        top = self.x_max if x_max is None else x_max
        return np.arange(int(math.floor(top / self.span + 1e-9)) + 1) * self.span

    def with_convention(self, convention: str) -> "ValueTable":
        _check_convention(convention)
        return ValueTable(self.inc, self.ladder, self.renewal, self.costs, self.EJ_inf, convention)


def default_x_max(xi: float, demand: DemandModel, L: int = 0) -> float:
    return max(xi, 0.0) + L * demand.mu + 10 * demand.sigma


def build_value_table(inc: IncrementModel, costs: CostParams, convention: str = "derived",
                      x_max: float | None = None, L: int = 0) -> ValueTable:
    """Ladder summary, renewal table and E[J] for the constant order ``inc.r``."""
    _check_convention(convention)
    costs.require_h()
    summary = ladder_summary(inc)
    xi = xi_tilde(inc.mu, costs, summary, convention) + inc.r
    if x_max is None:
        x_max = default_x_max(xi, inc.demand, L)
    if inc.is_lattice:
        x_max = math.ceil(x_max / inc.span - 1e-9) * inc.span
        ej = stationary_mean_roots(inc).mean if inc.r > 0 else 0.0
    else:
        ej = stationary_mean(inc.demand, inc.r)
    return ValueTable(inc, summary, renewal_measure(summary, x_max), costs, ej, convention)


def analytic_exponential_table(demand: DemandModel, r: float, costs: CostParams,
                               x_max: float = math.inf) -> ValueTable:
    if demand.family != "exponential":
        raise BadParamError("analytic table needs exponential demand")
    costs.require_h()
    inc = increment_model(demand, r)
    summary = exponential_ladder(demand, r)
    return ValueTable(inc, summary, renewal_measure(summary, x_max), costs,
                      stationary_mean(demand, r))


def _check_grid(table: ValueTable, x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise OffGridError("x must be non-negative")
    if table.span is not None:
        q = x / table.span
        if np.any(np.abs(q - np.round(q)) > 1e-9 * np.maximum(1.0, np.abs(q))):
            raise OffGridError(f"x is not a multiple of the grid span {table.span}")
    return x


def _shortfall_mean(demand: DemandModel, z):
    """E[(z - D)^+], i.e. the integral of F_D over [0, z]."""
    z = np.asarray(z, dtype=float)
    if demand.is_lattice:
        k = np.arange(len(demand.pmf)) * demand.span
        return np.maximum(z[..., None] - k, 0.0) @ demand.pmf
    lam = 1 / demand.mu
    zp = np.maximum(z, 0.0)
    return zp + np.expm1(-lam * zp) / lam


def eval_a_r(table: ValueTable, x):
    """a(x) = (h + p) int_{-r}^x F_Y - p x - h E[J]."""
    x = _check_grid(table, x)
    c = table.costs
    return (c.h + c.p) * _shortfall_mean(table.inc.demand, x + table.r) - c.p * x \
        - c.h * table.EJ_inf


def value_exact(table: ValueTable, x):
    x = _check_grid(table, x)
    c = table.costs
    scale = c.h * table.ladder.mu_plus / table.mu_Y
    return scale * table.renewal.integral_U(x) - (c.h + c.p) * x


def quadratic_decomposition(table: ValueTable, x, kappa_shift: float = 0.0):
    """(quadratic part, correction part) of v.

    The correction integrates g exactly, with the same step integral of U
    that ``value_exact`` uses. ``kappa_shift`` perturbs kappa inside xi_tilde
    only and exists for sensitivity probes.
    """
    x = _check_grid(table, x)
    b = table.b
    xt = table.xi_tilde - (table.ladder.mu_plus if table.convention == "derived" else 1.0) \
        * kappa_shift
    quad = b * ((x - xt) ** 2 - xt**2)
    corr = 2 * b * table.ladder.mu_plus * table.renewal.g_integral(x)
    return quad, corr


@dataclass(frozen=True)
class WienerHopfResidual:
    max_abs: float
    scale: float
    residuals: np.ndarray

    @property
    def relative(self) -> float:
        return self.max_abs / self.scale


def wiener_hopf_residual(table: ValueTable, x_grid=None, value=None) -> WienerHopfResidual:
    """Max over x of |a(x) + sum_y v(x - y) f_Y(y) - v(x)|.

    The sum runs over y <= x; larger y empty the system and contribute v(0) = 0.
    ``value`` overrides the function being checked (defaults to value_exact).
    """
    inc = table.inc
    if not inc.is_lattice:
        raise NotLatticeError("the residual check runs on lattice tables")
    if value is None:
        def value(z):
            return value_exact(table, z)
    if x_grid is None:
        x_grid = table.grid(table.x_max - table.r)
    x = _check_grid(table, x_grid)
    pmf = inc.demand.pmf
    dk = np.arange(len(pmf)) * inc.demand.span
    arg = x[:, None] + table.r - dk[None, :]
    mask = arg >= -1e-9
    arg = np.where(mask, np.round(np.maximum(arg, 0.0) / inc.span) * inc.span, 0.0)
    vals = np.asarray(value(arg.ravel()), dtype=float).reshape(arg.shape)
    conv = (np.where(mask, vals, 0.0)) @ pmf
    vx = np.asarray(value(x), dtype=float)
    res = eval_a_r(table, x) + conv - vx
    return WienerHopfResidual(float(np.max(np.abs(res))), 1.0 + float(np.max(np.abs(vx))), res)
