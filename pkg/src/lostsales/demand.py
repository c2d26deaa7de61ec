"""Demand distributions and the increment law Y = D - r.

Lattice demands live on the grid {0, d, 2d, ...} and carry an exact pmf.
Continuous families (currently exponential) only carry a sampler; every
exact routine downstream refuses them with ``NotLatticeError``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (
    BadParamError,
    BadSpanError,
    GridMismatchError,
    NegativeMassError,
    NotLatticeError,
    RTooLargeError,
    ZeroVarianceError,
)

DEFAULT_TAIL_EPS = 1e-12
DEFAULT_REFINEMENT = 10


def _frozen(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DemandModel:
    """Per-period demand law.

    ``pmf[k]`` is P(D = k * span) for lattice models; ``None`` for
    continuous ones.
    """

    kind: str  # "lattice" or "continuous"
    family: str
    params: dict = field(compare=False)
    mu: float
    sigma2: float
    span: float | None = None
    pmf: np.ndarray | None = field(default=None, compare=False, repr=False)
    tail_eps: float = DEFAULT_TAIL_EPS

    @property
    def is_lattice(self) -> bool:
        return self.kind == "lattice"

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def support_gcd(self) -> int:
        """gcd of the grid indices carrying mass (1 for a geometric law)."""
        self.require_lattice()
        idx = np.flatnonzero(self.pmf > 0)
        return int(np.gcd.reduce(idx)) if len(idx) > 1 else max(int(idx[0]), 1)

    def require_lattice(self):
        if not self.is_lattice:
            raise NotLatticeError(f"{self.family} demand has no lattice pmf")

    def cdf_grid(self) -> np.ndarray:
        self.require_lattice()
        return np.cumsum(self.pmf)

    def survival_grid(self) -> np.ndarray:
        """``S[k] = P(D >= k * span)`` for k = 0..len(pmf)."""
        self.require_lattice()
        tail = np.concatenate([np.cumsum(self.pmf[::-1])[::-1], [0.0]])
        return np.minimum(tail, 1.0)

    def to_config(self) -> dict:
        return {"family": self.family, **self.params}


def _moments(pmf, span):
    k = np.arange(len(pmf), dtype=float) * span
    mu = float(np.dot(pmf, k))
    var = float(np.dot(pmf, (k - mu) ** 2))
    return mu, var


def make_lattice_demand(pmf, span=1.0, *, family="pmf", params=None,
                        tail_eps=DEFAULT_TAIL_EPS, sum_tol=1e-12) -> DemandModel:
    """Build a lattice demand from probabilities on {0, span, 2*span, ...}.

    >>> d = make_lattice_demand([0.5, 0.5], span=2.0)
    >>> d.mu, d.sigma2
    (1.0, 1.0)
    """
    if not span > 0:
        raise BadSpanError(f"span must be positive, got {span}")
    pmf = np.asarray(pmf, dtype=float)
    if pmf.ndim != 1 or len(pmf) == 0:
        raise BadParamError("pmf must be a non-empty vector")
    if np.any(pmf < 0):
        raise NegativeMassError("pmf has negative entries")
    total = pmf.sum()
    if abs(total - 1.0) > sum_tol:
        raise BadParamError(f"pmf sums to {total!r}, not 1 within {sum_tol}")
    pmf = pmf / total
    nz = np.flatnonzero(pmf)
    pmf = pmf[: nz[-1] + 1]
    mu, var = _moments(pmf, span)
    if len(nz) < 2 or var <= 0:
        raise ZeroVarianceError("demand must have positive variance")
    if params is None:
        params = {"span": float(span), "probs": pmf.tolist()}
    return DemandModel("lattice", family, params, mu, var, float(span), _frozen(pmf), tail_eps)


def _geometric(rho, tail_eps, span=1.0):
    if not 0 < rho < 1:
        raise BadParamError(f"geometric rho must lie in (0, 1), got {rho}")
    # keep k with P(D >= k) = rho**k >= tail_eps
    kmax = max(int(math.ceil(math.log(tail_eps) / math.log(rho))), 1)
    k = np.arange(kmax + 1)
    pmf = (1 - rho) * rho ** k
    return make_lattice_demand(pmf / pmf.sum(), span, family="geometric",
                               params={"rho": rho, "span": span}, tail_eps=tail_eps,
                               sum_tol=2 * tail_eps + 1e-15)


def _span_of(values):
    fr = [Fraction(v).limit_denominator(10**6) for v in values if v != 0]
    if not fr:
        raise ZeroVarianceError("two-point law needs a non-zero value")
    den = math.lcm(*(f.denominator for f in fr))
    g = math.gcd(*(int(f * den) for f in fr))
    return g / den


def make_parametric_demand(family, params=None, tail_eps=DEFAULT_TAIL_EPS, **kw) -> DemandModel:
    """Named families: ``exponential`` (rate), ``geometric`` (rho),
    ``two_point`` (values, probs) and ``pmf`` (probs, span).

    The geometric law lives on {0, 1, 2, ...}: P(D = k) = (1 - rho) rho^k.
    """
    params = dict(params or {}, **kw)
    if not tail_eps > 0:
        raise BadParamError("tail_eps must be positive")
    if family == "exponential":
        lam = params.get("rate", params.get("lam", params.get("lambda")))
        if lam is None or not lam > 0:
            raise BadParamError(f"exponential rate must be positive, got {lam}")
        lam = float(lam)
        return DemandModel("continuous", "exponential", {"rate": lam}, 1 / lam, 1 / lam**2,
                           tail_eps=tail_eps)
    if family == "geometric":
        rho = params.get("rho")
        if rho is None:
            raise BadParamError("geometric needs rho")
        return _geometric(float(rho), tail_eps, float(params.get("span", 1.0)))
    if family == "two_point":
        values = [float(v) for v in params["values"]]
        probs = [float(v) for v in params["probs"]]
        if len(values) != 2 or len(probs) != 2 or min(values) < 0:
            raise BadParamError("two_point needs two non-negative values and two probs")
        span = float(params.get("span") or _span_of(values))
        pmf = np.zeros(int(round(max(values) / span)) + 1)
        for v, p in zip(values, probs):
            i = v / span
            if abs(i - round(i)) > 1e-9:
                raise BadSpanError(f"value {v} is not a multiple of span {span}")
            pmf[int(round(i))] += p
        return make_lattice_demand(pmf, span, family="two_point",
                                   params={"values": values, "probs": probs, "span": span},
                                   tail_eps=tail_eps)
    if family == "pmf":
        return make_lattice_demand(params["probs"], float(params.get("span", 1.0)),
                                   tail_eps=tail_eps)
    raise BadParamError(f"unknown demand family {family!r}")


def demand_from_config(cfg: dict) -> DemandModel:
    cfg = dict(cfg)
    family = cfg.pop("family")
    tail_eps = cfg.pop("tail_eps", DEFAULT_TAIL_EPS)
    return make_parametric_demand(family, cfg, tail_eps=tail_eps)


def moments(model: DemandModel) -> tuple[float, float]:
    return model.mu, model.sigma2


def sample_units(model: DemandModel, rng: np.random.Generator, size) -> np.ndarray:
    """Lattice draws as integer grid indices (demand = index * span)."""
    model.require_lattice()
    u = rng.random(size)
    idx = np.searchsorted(model.cdf_grid(), u, side="right")
    return np.minimum(idx, len(model.pmf) - 1).astype(np.int64)


def sample(model: DemandModel, rng: np.random.Generator, size=None):
    """i.i.d. demand draws; deterministic given the generator state."""
    if model.is_lattice:
        out = sample_units(model, rng, size) * model.span
        return float(out) if size is None else out
    if model.family == "exponential":
        return rng.exponential(model.mu, size)
    raise BadParamError(f"no sampler for {model.family}")


@dataclass(frozen=True)
class IncrementModel:
    """Increment Y = D - r on the refined grid of span d/K.

    In refined units, Y takes the value ``K*k - r_steps`` with probability
    ``demand.pmf[k]``.
    """

    demand: DemandModel
    r: float
    K: int | None
    span: float | None  # refined span d' = d/K
    r_steps: int | None

    @property
    def mu(self) -> float:
        return self.demand.mu - self.r

    @property
    def sigma2(self) -> float:
        return self.demand.sigma2

    @property
    def is_lattice(self) -> bool:
        return self.demand.is_lattice

    def dense_pmf(self):
        """(offset, pmf) with ``pmf[i]`` = P(Y = (i + offset) * span)."""
        self.demand.require_lattice()
        f = np.zeros(self.K * (len(self.demand.pmf) - 1) + 1)
        f[:: self.K] = self.demand.pmf
        return -self.r_steps, f

    @property
    def lattice_span(self) -> float:
        """Span of the lattice the random walk S_t actually lives on."""
        g = math.gcd(self.K * self.demand.support_gcd, self.r_steps)
        return g * self.span

    def cdf(self, x):
        """F_Y(x) = F_D(x + r)."""
        self.demand.require_lattice()
        x = np.asarray(x, dtype=float)
        k = np.floor((x + self.r) / self.demand.span + 1e-9).astype(int)
        cdf = self.demand.cdf_grid()
        out = np.where(k < 0, 0.0, cdf[np.clip(k, 0, len(cdf) - 1)])
        return np.minimum(out, 1.0)


def on_grid(x, span, tol=1e-9):
    """Return x/span as an integer if x is a grid point, else None."""
    q = x / span
    n = round(q)
    return int(n) if abs(q - n) <= tol * max(1.0, abs(q)) else None


def increment_model(demand: DemandModel, r: float, K: int = DEFAULT_REFINEMENT) -> IncrementModel:
    if r < 0:
        raise BadParamError("constant order r must be non-negative")
    if r >= demand.mu:
        raise RTooLargeError(f"r = {r} must be below mean demand {demand.mu}")
    if not demand.is_lattice:
        return IncrementModel(demand, float(r), None, None, None)
    if int(K) != K or K < 1:
        raise BadParamError("refinement K must be a positive integer")
    K = int(K)
    span = demand.span / K
    steps = on_grid(r, span)
    if steps is None:
        raise GridMismatchError(f"r = {r} is not a multiple of d/K = {span}")
    return IncrementModel(demand, float(r), K, span, steps)


def refinement_for(r: float, demand: DemandModel, max_K: int = 10_000) -> int:
    """Smallest K for which r sits on the d/K grid."""
    for K in range(1, max_K + 1):
        if on_grid(r, demand.span / K) is not None:
            return K
    raise GridMismatchError(f"r = {r} needs a refinement above {max_K}")
