"""Inverse robust optimisation: largest scenario sets a decision can cover.

Given an uncertain problem ``min f_u(x) s.t. g_u(x) <= 0`` and a nominal
scenario, find a decision ``x`` and a set ``W`` of scenarios as large as
possible (by volume, probability or distance) such that every scenario in
``W`` stays feasible and within a budget of the nominal optimal value.
"""

from .box import Box
from .design import Ball, BoxFamily, Interval1D, ScaledSet, contains, inner_max, make_family
from .errors import (
    ContractViolation,
    DomainError,
    EvaluationError,
    InfeasibleProblemError,
    InvRobError,
    NonConvergenceError,
    SpecError,
    UnsupportedError,
    UsageError,
)
from .measures import MeasureSpec, measure, std_normal_cdf
from .model import (
    IDENTITY,
    NOMINAL_ONLY,
    BudgetSpec,
    Selector,
    UncertainProblem,
    check_point_feasible,
    evaluate_constraint,
    evaluate_objective,
)
from .radii import RadiusResult, radius_of_robust_feasibility, resilience_radius, stability_radius
from .solver import SolveResult, SolverConfig, solve, solve_grid, verify

__version__ = "0.1.0"
