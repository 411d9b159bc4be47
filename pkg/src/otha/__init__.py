"""Numerical laboratory for the harmonic approximation of quadratic optimal transport."""

from .errors import DegenerateInputError, InfeasibleInputError, OutOfDomainError
from .measures import Ball, Coupling, DiscreteMeasure, marginals, restrict, uniform_disc
from .ot import OtSolution, check_monotone, solve_quadratic, w2_sorted_1d, wasserstein2

__all__ = [
    "Ball",
    "Coupling",
    "DegenerateInputError",
    "DiscreteMeasure",
    "InfeasibleInputError",
    "OtSolution",
    "OutOfDomainError",
    "check_monotone",
    "marginals",
    "restrict",
    "solve_quadratic",
    "uniform_disc",
    "w2_sorted_1d",
    "wasserstein2",
]

__version__ = "0.1.0"
