"""Lost-sales inventory laboratory.

Constant-order and projected-inventory policies, the ladder-height and
renewal machinery behind the constant order's relative value function,
trajectory simulation and an exact benchmark for short lead times.
"""

__version__ = "0.1.0"

from .demand import (
    DemandModel,
    IncrementModel,
    demand_from_config,
    increment_model,
    make_lattice_demand,
    make_parametric_demand,
)
from .errors import LostSalesError, NumericalGuardError, ValidationError
from .ladder import (
    ascending_ladder_exact,
    ascending_ladder_mc,
    ladder_summary,
    renewal_measure,
    spitzer_mean,
    stationary_inventory,
    stationary_mean,
)
from .mdp import build_mdp, exact_policy_eval, newsvendor, relative_value_iteration
from .policies import (
    PolicySpec,
    SystemState,
    base_stock,
    capped_base_stock,
    constant,
    hybrid_switch,
    pil,
    project_inventory_exact,
    project_inventory_mc,
)
from .simulation import SimConfig, estimate_cost_rate, paired_difference
from .tuning import optimize_r, optimize_xi
from .value import (
    CostParams,
    build_value_table,
    quadratic_decomposition,
    value_exact,
    wiener_hopf_residual,
)

__all__ = [
    "CostParams", "DemandModel", "IncrementModel", "LostSalesError", "NumericalGuardError",
    "PolicySpec", "SimConfig", "SystemState", "ValidationError",
    "ascending_ladder_exact", "ascending_ladder_mc", "base_stock", "build_mdp",
    "build_value_table", "capped_base_stock", "constant", "demand_from_config",
    "estimate_cost_rate", "exact_policy_eval", "hybrid_switch", "increment_model",
    "ladder_summary", "make_lattice_demand", "make_parametric_demand", "newsvendor",
    "optimize_r", "optimize_xi", "paired_difference", "pil", "project_inventory_exact",
    "project_inventory_mc", "quadratic_decomposition", "relative_value_iteration",
    "renewal_measure", "spitzer_mean", "stationary_inventory", "stationary_mean",
    "value_exact", "wiener_hopf_residual",
]
