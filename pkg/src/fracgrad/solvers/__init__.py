"""Linear, truncation, fixed-point, reaction and Newton solvers."""

from .admissible import AdmissibilityCertificate, check_admissible, standard_trial_family
from .fixed_point import FixedPointConfig, bisect_threshold, solve_fixed_point
from .linear import solve_linear
from .monotone import MonotoneSchedule, solve_monotone, solve_reaction, solve_regularized
from .newton import solve_newton
from .report import SolveReport

__all__ = [
    "AdmissibilityCertificate",
    "FixedPointConfig",
    "MonotoneSchedule",
    "SolveReport",
    "bisect_threshold",
    "check_admissible",
    "solve_fixed_point",
    "solve_linear",
    "solve_monotone",
    "solve_newton",
    "solve_reaction",
    "solve_regularized",
    "standard_trial_family",
]
