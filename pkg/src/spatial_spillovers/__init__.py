"""Spatial economies with interregional productivity spillovers.

Equilibrium, stability and bifurcation analysis of a many-region trade
model in which regional productivity depends on the whole population
distribution through an externality network.
"""
from .bifurcation import (
    BifurcationDiagram,
    Branch,
    DiagramSpec,
    bifurcation_diagram,
    branch_switch,
    continue_branch,
    fit_pitchfork_exponent,
)
from .dynamics import (
    EquilibriumResult,
    assess_stability,
    dynamics_field,
    find_equilibrium,
    integrate,
    multistart_equilibria,
)
from .errors import AssumptionError, ConvergenceError, InsufficientDataError
from .families import Family, region_symmetries
from .model import (
    MarketState,
    ModelConfig,
    build_externality,
    build_geography,
    market_state,
    productivity,
    trade_flows,
    uniform,
)
from .stability import (
    critical_threshold,
    decompose_net_force,
    gain_function,
    mode_thresholds,
    payoff_jacobian,
    proximity_spectrum,
    stability_grid,
    uniform_stability,
)
from .wages import WageSolution, excess_demand, solve_wages, wage_jacobian

__version__ = "0.1.0"

__all__ = [
    "AssumptionError",
    "BifurcationDiagram",
    "Branch",
    "ConvergenceError",
    "DiagramSpec",
    "EquilibriumResult",
    "Family",
    "InsufficientDataError",
    "MarketState",
    "ModelConfig",
    "WageSolution",
    "assess_stability",
    "bifurcation_diagram",
    "branch_switch",
    "build_externality",
    "build_geography",
    "continue_branch",
    "critical_threshold",
    "decompose_net_force",
    "dynamics_field",
    "excess_demand",
    "find_equilibrium",
    "fit_pitchfork_exponent",
    "gain_function",
    "integrate",
    "market_state",
    "mode_thresholds",
    "multistart_equilibria",
    "payoff_jacobian",
    "productivity",
    "proximity_spectrum",
    "region_symmetries",
    "solve_wages",
    "stability_grid",
    "trade_flows",
    "uniform",
    "uniform_stability",
    "wage_jacobian",
]
