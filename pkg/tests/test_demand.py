import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lostsales.demand import (
    demand_from_config,
    increment_model,
    make_lattice_demand,
    make_parametric_demand,
    on_grid,
    refinement_for,
    sample,
)
from lostsales.errors import (
    BadParamError,
    BadSpanError,
    GridMismatchError,
    NegativeMassError,
    NotLatticeError,
    RTooLargeError,
    ValidationError,
    ZeroVarianceError,
)


def test_geometric_moments(geo09):
    assert geo09.mu == pytest.approx(9.0, rel=1e-9)
    assert geo09.sigma2 == pytest.approx(90.0, rel=1e-8)
    assert geo09.support_gcd == 1


def test_two_point_span_and_gcd(two_point):
    assert two_point.span == 2.0
    assert list(two_point.pmf) == [0.5, 0.5]
    assert (two_point.mu, two_point.sigma2) == (1.0, 1.0)


def test_pmf_trailing_zeros_trimmed():
    d = make_lattice_demand([0.25, 0.0, 0.75, 0.0, 0.0])
    assert len(d.pmf) == 3
    assert d.support_gcd == 2


def test_pmf_is_read_only(geo05):
    with pytest.raises(ValueError):
        geo05.pmf[0] = 1.0


@pytest.mark.parametrize("pmf, err", [
    ([1.0], ZeroVarianceError),
    ([0.0, 1.0], ZeroVarianceError),
    ([-0.1, 1.1], NegativeMassError),
    ([0.3, 0.3], BadParamError),
])
def test_bad_pmfs(pmf, err):
    with pytest.raises(err):
        make_lattice_demand(pmf)


def test_bad_span():
    with pytest.raises(BadSpanError):
        make_lattice_demand([0.5, 0.5], span=0.0)
    with pytest.raises(BadSpanError):
        make_parametric_demand("two_point", values=[0, 1], probs=[0.5, 0.5], span=0.3)


def test_validation_errors_are_value_errors():
    with pytest.raises(ValueError):
        make_parametric_demand("geometric", rho=1.2)
    assert issubclass(RTooLargeError, ValidationError)


def test_config_roundtrip(geo09, two_point):
    for d in (geo09, two_point):
        again = demand_from_config(d.to_config())
        assert np.array_equal(again.pmf, d.pmf)
        assert again.mu == d.mu


def test_exponential_is_continuous(expo):
    assert not expo.is_lattice
    with pytest.raises(NotLatticeError):
        expo.cdf_grid()


def test_geometric_tail_truncation():
    d = make_parametric_demand("geometric", rho=0.5, tail_eps=1e-6)
    # every kept point has P(D >= k) >= tail_eps
    assert 0.5 ** (len(d.pmf) - 1) >= 1e-6 * 0.5


def test_sampling_is_deterministic(geo09):
    a = sample(geo09, np.random.default_rng(3), 1000)
    b = sample(geo09, np.random.default_rng(3), 1000)
    assert np.array_equal(a, b)


def test_sample_mean(geo05, expo):
    rng = np.random.default_rng(0)
    for d in (geo05, expo):
        x = sample(d, rng, 200_000)
        assert abs(x.mean() - d.mu) < 4 * d.sigma / math.sqrt(len(x))


def test_increment_model_grid(geo09):
    inc = increment_model(geo09, 4.3, K=10)
    assert inc.r_steps == 43
    assert inc.span == pytest.approx(0.1)
    assert inc.mu == pytest.approx(geo09.mu - 4.3)
    with pytest.raises(GridMismatchError):
        increment_model(geo09, 4.35, K=10)
    with pytest.raises(RTooLargeError):
        increment_model(geo09, 9.5)
    with pytest.raises(BadParamError):
        increment_model(geo09, -1.0)


def test_lattice_span_uses_support_gcd(two_point):
    # demand moves in steps of 2, so the walk's lattice is set by r
    inc = increment_model(two_point, 0.5, K=4)
    assert inc.span == 0.5
    assert inc.lattice_span == 0.5
    inc = increment_model(two_point, 0.25, K=8)
    assert inc.lattice_span == 0.25


def test_increment_cdf(geo05):
    inc = increment_model(geo05, 0.5, K=2)
    # F_Y(-0.5) = P(D <= 0) = 0.5
    assert inc.cdf(-0.5) == pytest.approx(0.5)
    assert inc.cdf(-1.0) == 0.0


def test_refinement_for(geo09):
    assert refinement_for(3.0, geo09) == 1
    assert refinement_for(2.5, geo09) == 2
    assert refinement_for(0.35, geo09) == 20


def test_on_grid():
    assert on_grid(0.3, 0.1) == 3
    assert on_grid(0.35, 0.1) is None


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=12),
       st.sampled_from([0.5, 1.0, 2.0]))
def test_normalised_pmf_moments(weights, span):
    w = np.asarray(weights)
    w = np.where(w < 1e-3, 0.0, w)
    if np.count_nonzero(w) < 2:
        return
    pmf = w / w.sum()
    d = make_lattice_demand(pmf, span)
    k = np.arange(len(d.pmf)) * span
    assert d.pmf.sum() == pytest.approx(1.0)
    assert d.mu == pytest.approx(float(d.pmf @ k))
    assert d.sigma2 == pytest.approx(float(d.pmf @ k**2) - d.mu**2, abs=1e-9)
    s = d.survival_grid()
    assert s[0] == pytest.approx(1.0) and s[-1] == 0.0
