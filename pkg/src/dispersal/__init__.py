"""Equilibria, optimal coverage, price of anarchy, and evolutionary
stability for the one-shot dispersal game under congestion reward
policies."""

from .ess import (
    EssVerdict,
    closed_form_mutant_payoff,
    closed_form_resident_payoff,
    ess_characterization,
    invasion_sweep,
    mixture_payoff,
    mutant_generator,
    project_to_simplex,
)
from .game import (
    CollisionDistribution,
    CongestionPolicy,
    GameInstance,
    Strategy,
    ValidationError,
    ValueProfile,
    collision_distribution,
    congestion_response,
    coverage,
    expected_payoff_profile,
    miss_weight,
    payoff_single,
    site_value,
    site_values,
)
from .montecarlo import SimConfig, SimReport, empirical_site_values, simulate
from .solvers import (
    CoverageOptimum,
    EquilibriumReport,
    SolverError,
    WelfareOptimum,
    coverage_grid_oracle,
    coverage_optimum,
    solve_ifd,
    symmetric_payoff,
    symmetric_price_of_anarchy,
    verify_ifd,
    welfare_optimum,
)

__version__ = "0.1.0"

__all__ = [
    "CollisionDistribution",
    "CongestionPolicy",
    "CoverageOptimum",
    "EquilibriumReport",
    "EssVerdict",
    "GameInstance",
    "SimConfig",
    "SimReport",
    "SolverError",
    "Strategy",
    "ValidationError",
    "ValueProfile",
    "WelfareOptimum",
    "closed_form_mutant_payoff",
    "closed_form_resident_payoff",
    "collision_distribution",
    "congestion_response",
    "coverage",
    "coverage_grid_oracle",
    "coverage_optimum",
    "empirical_site_values",
    "ess_characterization",
    "expected_payoff_profile",
    "invasion_sweep",
    "miss_weight",
    "mixture_payoff",
    "mutant_generator",
    "payoff_single",
    "project_to_simplex",
    "simulate",
    "site_value",
    "site_values",
    "solve_ifd",
    "symmetric_payoff",
    "symmetric_price_of_anarchy",
    "verify_ifd",
    "welfare_optimum",
]
