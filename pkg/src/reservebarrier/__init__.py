"""Optimal two-sided barrier policy for a bank's excess reserves.

Closed-form barrier and value functions (:mod:`.barrier_solver`), the discrete
two-sided reflection map (:mod:`.skorokhod_engine`) and seeded Monte Carlo
checks (:mod:`.monte_carlo`).
"""
__version__ = "0.1.0"

from .model_core import ModelParams, RootSet, ValidatedParams, compute_roots, validate_params
from .barrier_solver import (
    PolicySolution,
    cost_analytic,
    gain_analytic,
    solve_barrier,
    verify_conditions,
)

__all__ = [
    "ModelParams",
    "RootSet",
    "ValidatedParams",
    "PolicySolution",
    "compute_roots",
    "cost_analytic",
    "gain_analytic",
    "solve_barrier",
    "validate_params",
    "verify_conditions",
]
