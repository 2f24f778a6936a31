"""Neyman-Pearson tests for convex expectations on finite sample spaces."""

from .hedging import MarketSpec, solve_shortfall
from .measure import Density, RandomVariable, SampleSpace, make_space
from .np_solver import NPSolver, ProblemSpec, Solution, SolverOptions, solve, verify_solution
from .risk_models import Entropic, FinitelyGenerated, Linear

__version__ = "0.1.0"
__all__ = [
    "Density",
    "Entropic",
    "FinitelyGenerated",
    "Linear",
    "MarketSpec",
    "NPSolver",
    "ProblemSpec",
    "RandomVariable",
    "SampleSpace",
    "Solution",
    "SolverOptions",
    "make_space",
    "solve",
    "solve_shortfall",
    "verify_solution",
]
