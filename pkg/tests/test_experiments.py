import numpy as np
import pytest

from lostsales.experiments import (
    default_kappa_grid,
    gap_vs_L,
    heavy_traffic_scan,
    kappa_bar,
    mdp_benchmark,
)
from lostsales.simulation import SimConfig
from lostsales.tuning import optimize_r
from lostsales.value import CostParams


def test_heavy_traffic_rows(geo09):
    rows = heavy_traffic_scan(geo09, [0.0, 4.0, 8.0])
    assert rows[0]["EJ_inf"] == 0.0 and rows[0]["ratio"] == 0.0
    ratios = [r["ratio"] for r in rows]
    assert ratios == sorted(ratios)
    assert all(r["mu_Y"] == pytest.approx(geo09.mu - r["r"]) for r in rows)


def test_kappa_bar_is_the_max(geo09):
    kb, ks = kappa_bar(geo09, [1.0, 5.0, 8.0])
    assert kb == max(k for _, k in ks)
    assert [r for r, _ in ks] == [1.0, 5.0, 8.0]
    assert default_kappa_grid(geo09) == [float(i) for i in range(9)]


@pytest.fixture(scope="module")
def small_gap():
    from lostsales.demand import make_parametric_demand
    d = make_parametric_demand("geometric", rho=0.9)
    cfg = SimConfig(0, 3000, replications=3, seed=2)
    return d, gap_vs_L(d, 1.0, [5.0], [2], cfg, conventions=("derived", "as-printed"),
                       base_stock=True)


def test_gap_row_contents(small_gap):
    d, out = small_gap
    (row,) = out["rows"]
    assert row["r_p"] == optimize_r(d, CostParams(1, 5), 10).r
    assert row["gap"] == pytest.approx(row["cost_pil"] - row["cost_constant"], abs=1e-12)
    assert out["bound"] == pytest.approx(out["kappa_bar"] ** 2)
    for key in ("xi_as_printed", "gap_as_printed", "cost_base_stock", "correction"):
        assert key in row
    assert row["xi"] != row["xi_as_printed"]


def test_gap_cells_are_reproducible(small_gap):
    d, out = small_gap
    again = gap_vs_L(d, 1.0, [5.0], [2], SimConfig(0, 3000, replications=3, seed=2),
                     conventions=("derived", "as-printed"), base_stock=True)
    assert again["rows"] == out["rows"]


def test_mdp_benchmark_small(two_point):
    rows = mdp_benchmark(two_point, 1.0, [4.0], [0, 1], J_max=6.0, q_max=3.0, K=2, tol=1e-11)
    assert [r["L"] for r in rows] == [0, 1]
    r0 = rows[0]
    assert r0["g_star"] == pytest.approx(r0["newsvendor"], abs=1e-8)
    for r in rows:
        assert r["g_lower"] <= r["g_star"] <= r["g_upper"]
        assert r["g_greedy"] == pytest.approx(r["g_star"], abs=1e-8)
        for k in ("gap_constant", "gap_pil", "gap_capped_base_stock"):
            assert r[k] is None or r[k] >= -1e-8
        assert np.isfinite(r["cost_constant"])
