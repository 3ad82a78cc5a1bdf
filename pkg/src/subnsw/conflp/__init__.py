"""Configuration LP solvers and pricing."""
from .master import (FractionalSolution, approximation_constant, check_solution,
                     constraint_violation, enumerate_columns, lp_objective, solve_colgen,
                     solve_exact)
from .pricing import (Configuration, DualPrices, PricingResult, certificate_slack,
                      pricing_oracle, submodular_cover_min_cost, submodular_knapsack_max)
from .simplex import LPResult, solve_lp

__all__ = [
    "FractionalSolution", "approximation_constant", "check_solution", "constraint_violation",
    "enumerate_columns", "lp_objective", "solve_colgen", "solve_exact", "Configuration",
    "DualPrices", "PricingResult", "certificate_slack", "pricing_oracle",
    "submodular_cover_min_cost", "submodular_knapsack_max", "LPResult", "solve_lp",
]
