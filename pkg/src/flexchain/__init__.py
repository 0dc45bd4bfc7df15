"""Time-expanded planning model for electrified supply chains.

Jointly sizes and schedules an electric truck fleet, electrified
manufacturing, and storage against renewable availability, and compares
the supply chain's demand flexibility with a stationary battery.
"""

from flexchain.scenario import (
    CostBook,
    ExogenousSeries,
    Horizon,
    Location,
    Path,
    ProcessSpec,
    Scenario,
    ScenarioError,
    TruckSpec,
    carbon_tax_to_penalty,
    levelize,
    load_scenario,
    save_scenario,
    scenario_hash,
)
from flexchain.model import LinearProgram, build_lp, validate_solution
from flexchain.solve import PlanSolution, SolverConfig, solve, solve_scenario

__all__ = [
    "CostBook",
    "ExogenousSeries",
    "Horizon",
    "LinearProgram",
    "Location",
    "Path",
    "PlanSolution",
    "ProcessSpec",
    "Scenario",
    "ScenarioError",
    "SolverConfig",
    "TruckSpec",
    "build_lp",
    "carbon_tax_to_penalty",
    "levelize",
    "load_scenario",
    "save_scenario",
    "scenario_hash",
    "solve",
    "solve_scenario",
    "validate_solution",
]

__version__ = "0.1.0"
