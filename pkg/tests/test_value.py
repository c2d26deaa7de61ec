import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lostsales.demand import increment_model, make_lattice_demand
from lostsales.errors import BadParamError, OffGridError
from lostsales.value import (
    CostParams,
    analytic_exponential_table,
    build_value_table,
    eval_a_r,
    pil_target,
    quadratic_decomposition,
    value_exact,
    wiener_hopf_residual,
    xi_tilde,
)


def poisson_oracle(demand, r, K, costs, J_max):
    """Bias of the constant-order chain, pinned to 0 at J = 0, from a dense
    solve of the average-cost Poisson equation on a truncated grid."""
    span = demand.span / K
    n = int(round(J_max / span)) + 1
    a = int(round(r / span))
    P = np.zeros((n, n))
    c = np.zeros(n)
    for j in range(n):
        for k, w in enumerate(demand.pmf):
            y = j + a - k * K
            P[j, min(max(y, 0), n - 1)] += w
            avail = (j + a) * span
            d = k * demand.span
            c[j] += w * (costs.h * max(avail - d, 0) + costs.p * max(d - avail, 0))
    # unknowns: w(1..n-1) and g, with w(0) = 0
    A = np.zeros((n, n))
    A[:, :n - 1] = (np.eye(n) - P)[:, 1:]
    A[:, n - 1] = 1.0
    sol = np.linalg.solve(A, c)
    return np.concatenate([[0.0], sol[:n - 1]]), sol[n - 1]


def test_geometric_golden(geo09):
    table = build_value_table(increment_model(geo09, 5.0, 1), CostParams(1, 1), x_max=20)
    assert float(value_exact(table, 4.0)) == pytest.approx(3.5, abs=1e-9)
    assert table.xi_tilde == pytest.approx(-2.0, abs=1e-8)
    assert table.xi == pytest.approx(3.0, abs=1e-8)
    printed = table.with_convention("as-printed")
    assert printed.xi_tilde == pytest.approx(62 / 9, abs=1e-8)
    assert table.b == pytest.approx(1 / 8)


@pytest.mark.parametrize("fixture, r, K", [("geo05", 0.5, 2), ("two_point", 0.75, 8),
                                           ("two_point", 0.25, 8)])
def test_value_matches_poisson_equation(request, fixture, r, K):
    demand = request.getfixturevalue(fixture)
    costs = CostParams(1.0, 4.0)
    bias, g = poisson_oracle(demand, r, K, costs, 60.0)
    table = build_value_table(increment_model(demand, r, K), costs, x_max=60.0)
    x = table.grid(10.0)
    assert np.max(np.abs(value_exact(table, x) - bias[: len(x)])) < 1e-8
    assert g == pytest.approx(table.cost_rate, abs=1e-9)


def test_value_at_zero_is_zero(geo05):
    table = build_value_table(increment_model(geo05, 0.5, 2), CostParams(1, 3), x_max=5)
    assert float(value_exact(table, 0.0)) == 0.0


def test_exponential_quadratic(expo):
    table = analytic_exponential_table(expo, 0.9, CostParams(1, 9))
    x = np.linspace(0, 20, 41)
    assert np.allclose(value_exact(table, x), 5 * x**2, rtol=1e-14, atol=1e-12)
    quad, corr = quadratic_decomposition(table, x)
    assert np.max(np.abs(corr)) < 1e-12
    assert table.xi == pytest.approx(0.9)


def test_exponential_other_costs(expo):
    # v is quadratic for exponential demand: b x^2 - 2 b xi_t x
    table = analytic_exponential_table(expo, 0.5, CostParams(2, 3))
    x = np.linspace(0, 10, 11)
    b, xt = table.b, table.xi_tilde
    assert np.allclose(value_exact(table, x), b * x**2 - 2 * b * xt * x, atol=1e-11)


@pytest.mark.parametrize("fixture, r, K", [("geo09", 5.0, 1), ("geo05", 0.5, 2),
                                           ("two_point", 0.5, 8)])
def test_decomposition_derived_is_exact(request, fixture, r, K):
    demand = request.getfixturevalue(fixture)
    table = build_value_table(increment_model(demand, r, K), CostParams(1, 9), x_max=40)
    x = table.grid(30.0)
    v = value_exact(table, x)
    quad, corr = quadratic_decomposition(table, x)
    assert np.max(np.abs(v - quad - corr)) <= 1e-9 * max(1, np.max(np.abs(v)))


def test_decomposition_as_printed_fails(geo09):
    table = build_value_table(increment_model(geo09, 5.0, 1), CostParams(1, 9), "as-printed",
                              x_max=40)
    x = table.grid(30.0)
    v = value_exact(table, x)
    quad, corr = quadratic_decomposition(table, x)
    assert np.max(np.abs(v - quad - corr)) > 1e-3 * np.max(np.abs(v))


def test_kappa_shift_breaks_identity(geo09):
    table = build_value_table(increment_model(geo09, 5.0, 1), CostParams(1, 9), x_max=40)
    x = table.grid(30.0)
    v = value_exact(table, x)
    quad, corr = quadratic_decomposition(table, x, kappa_shift=0.1)
    assert np.max(np.abs(v - quad - corr)) / np.max(np.abs(v)) >= 1e-3


def test_a_r_at_zero(geo05):
    table = build_value_table(increment_model(geo05, 0.5, 2), CostParams(1, 3), x_max=5)
    # a(0) = c(0) - C, the one-period cost from empty minus the average
    c0 = 1 * 0.5 * 0.5 + 3 * sum(
        (1 - 0.5) * 0.5**k * max(k - 0.5, 0) for k in range(200))
    assert float(eval_a_r(table, 0.0)) == pytest.approx(c0 - table.cost_rate, abs=1e-9)


def test_xi_functions_agree(geo09):
    table = build_value_table(increment_model(geo09, 5.0, 1), CostParams(1, 9), x_max=20)
    assert xi_tilde(table.mu_Y, table.costs, table.ladder) == table.xi_tilde
    assert pil_target(5.0, table.costs, table.ladder, mu_D=geo09.mu) == pytest.approx(table.xi)


def test_guards(geo05):
    inc = increment_model(geo05, 0.5, 2)
    with pytest.raises(BadParamError):
        build_value_table(inc, CostParams(0, 3))
    with pytest.raises(BadParamError):
        build_value_table(inc, CostParams(1, 3), convention="other")
    with pytest.raises(BadParamError):
        CostParams(-1, 3)
    table = build_value_table(inc, CostParams(1, 3), x_max=5)
    with pytest.raises(OffGridError):
        value_exact(table, 0.3)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=3, max_size=6), st.data(),
       st.floats(0.5, 20.0))
def test_wiener_hopf_holds_for_random_laws(weights, data, p):
    w = np.where(np.asarray(weights) < 0.05, 0.0, np.asarray(weights))
    if np.count_nonzero(w) < 2:
        return
    d = make_lattice_demand(w / w.sum())
    K = 2
    steps = int(np.ceil(d.mu * K - 1e-9)) - 1
    if steps < 1:
        return
    r = data.draw(st.integers(1, steps)) / K
    table = build_value_table(increment_model(d, r, K), CostParams(1.0, p), x_max=30.0)
    res = wiener_hopf_residual(table, table.grid(25.0))
    assert res.relative < 1e-9
    x = table.grid(25.0)
    quad, corr = quadratic_decomposition(table, x)
    v = value_exact(table, x)
    assert np.max(np.abs(v - quad - corr)) <= 1e-9 * max(1, np.max(np.abs(v)))
