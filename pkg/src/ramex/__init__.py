"""Exchange value and transport cost of branching (ramified) transport networks."""

from .economy import CES, CobbDouglas, Consumer, Economy, Good, Linear, QuantityOnly, demand, demand_profile, expenditure
from .errors import RamexError, SchemaError
from .exchange_value import ValuationResult, all_criteria, total_expenditure
from .h_optimizer import enumerate_topologies, optimize_geometry, optimize_h, sigma_sweep
from .plan_polytope import build_constraints, polytope_dimension_formula, polytope_dimension_rank
from .tolerances import DEFAULT, Tolerances
from .transport_graph import AtomicMeasure, TransportPath, hub_path, m_alpha_cost, route_matrix

__version__ = "0.1.0"

__all__ = [
    "AtomicMeasure",
    "CES",
    "CobbDouglas",
    "Consumer",
    "DEFAULT",
    "Economy",
    "Good",
    "Linear",
    "QuantityOnly",
    "RamexError",
    "SchemaError",
    "Tolerances",
    "TransportPath",
    "ValuationResult",
    "all_criteria",
    "build_constraints",
    "demand",
    "demand_profile",
    "enumerate_topologies",
    "expenditure",
    "hub_path",
    "m_alpha_cost",
    "optimize_geometry",
    "optimize_h",
    "polytope_dimension_formula",
    "polytope_dimension_rank",
    "route_matrix",
    "sigma_sweep",
    "total_expenditure",
]
