import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lostsales.errors import BadParamError, NotLatticeError, OffGridError
from lostsales.policies import (
    PolicySpec,
    SystemState,
    base_stock,
    capped_base_stock,
    constant,
    decide,
    hybrid_switch,
    make_projector,
    pil,
    policy_from_config,
    project_inventory_exact,
    project_inventory_mc,
    project_units,
)


def brute_projection(J, pipeline, demand):
    """E[J_{t+L}] by enumerating every demand path (small supports only)."""
    vals = np.arange(len(demand.pmf)) * demand.span
    total = 0.0
    for path in itertools.product(range(len(vals)), repeat=len(pipeline)):
        w, j = 1.0, J
        for q, k in zip(pipeline, path):
            w *= demand.pmf[k]
            j = max(j + q - vals[k], 0.0)
        total += w * j
    return total


def test_projection_matches_enumeration(two_point):
    state = SystemState(1.0, (0.5, 2.0, 0.0, 1.5))
    exact = project_inventory_exact(state, two_point, K=4)
    assert exact == pytest.approx(brute_projection(1.0, state.pipeline, two_point), abs=1e-12)


def test_projection_enumeration_pmf():
    from lostsales.demand import make_lattice_demand
    d = make_lattice_demand([0.2, 0.5, 0.0, 0.3])
    state = SystemState(2.0, (1.0, 3.0, 0.0))
    assert project_inventory_exact(state, d) == pytest.approx(
        brute_projection(2.0, state.pipeline, d), abs=1e-12)


def test_projection_against_mc(geo09):
    state = SystemState(12.0, (3.0, 9.0, 4.0, 10.0, 0.0))
    exact = project_inventory_exact(state, geo09)
    mc, se = project_inventory_mc(state, geo09, 200_000, seed=4)
    assert abs(mc - exact) < 4 * se


def test_geometric_fast_path_matches_general(geo09, geo05):
    for d, K in ((geo09, 1), (geo05, 2), (geo05, 3)):
        proj = make_projector(d, K)
        pipe = np.array([3, 0, 7, 12, 1, 5], dtype=np.int64) * K
        for J in (0, 4 * K, 25 * K):
            fast = project_units(J, pipe, proj.f, proj.rho, K)
            slow = project_units(J, pipe, proj.f, -1.0, K)
            # the general path uses the pmf cut at tail_eps = 1e-12
            assert fast == pytest.approx(slow, rel=1e-10, abs=1e-10)


def test_projection_without_pipeline(geo09):
    assert project_inventory_exact(SystemState(3.5), geo09) == 3.5
    assert project_inventory_mc(SystemState(3.5), geo09, 10, 0) == (3.5, 0.0)


def test_projection_guards(geo09, expo):
    with pytest.raises(NotLatticeError):
        project_inventory_exact(SystemState(1.0, (1.0,)), expo)
    with pytest.raises(OffGridError):
        make_projector(geo09, 1)(1.0, (0.5,))
    with pytest.raises(BadParamError):
        project_inventory_mc(SystemState(1.0, (1.0,)), geo09, 0, 0)
    with pytest.raises(BadParamError):
        SystemState(-1.0)


def test_decide_rules(geo09):
    s = SystemState(2.0, (1.0, 3.0), t=5)
    assert decide(constant(4.0), s, geo09) == 4.0
    assert decide(base_stock(10.0), s, geo09) == 4.0
    assert decide(base_stock(5.0), s, geo09) == 0.0
    assert decide(capped_base_stock(10.0, 2.5), s, geo09) == 2.5
    xi = 20.0
    proj = project_inventory_exact(s, geo09)
    assert decide(pil(xi), s, geo09) == float(np.floor(xi - proj + 0.5))
    assert decide(pil(0.0), s, geo09) == 0.0


def test_pil_order_is_on_the_grid(geo05):
    s = SystemState(1.5, (0.5, 1.0))
    o = decide(pil(3.3, K=2), s, geo05)
    assert (o / 0.5) == int(o / 0.5)


def test_hybrid_switches(geo09):
    h = hybrid_switch(20.0, 4.0, switch_period=10)
    early = SystemState(2.0, (1.0, 3.0), t=12)
    late = SystemState(2.0, (1.0, 3.0), t=13)
    assert decide(h, early, geo09) == decide(pil(20.0), early, geo09)
    assert decide(h, late, geo09) == 4.0


def test_spec_validation_and_config():
    with pytest.raises(BadParamError):
        PolicySpec("mystery")
    with pytest.raises(BadParamError):
        constant(-1)
    with pytest.raises(BadParamError):
        PolicySpec("pil", xi=1.0, projector="guess")
    for spec in (constant(2.0), capped_base_stock(5.0, 1.0), pil(3.0, K=2),
                 hybrid_switch(3.0, 1.0, 7)):
        again = policy_from_config(spec.to_config())
        assert again.to_config() == spec.to_config()
        assert again.label() == spec.label()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 30), st.lists(st.integers(0, 15), min_size=1, max_size=6),
       st.integers(1, 5))
def test_projection_properties(J, pipe, bump):
    from lostsales.demand import make_parametric_demand
    d = make_parametric_demand("geometric", rho=0.7)
    base = project_inventory_exact(SystemState(float(J), tuple(map(float, pipe))), d)
    more = project_inventory_exact(SystemState(float(J + bump), tuple(map(float, pipe))), d)
    # monotone in J, never below the fluid level, and 1-Lipschitz
    assert more >= base - 1e-12
    assert more - base <= bump + 1e-9
    assert base >= J + sum(pipe) - len(pipe) * d.mu - 1e-9
    assert base >= 0
