"""Bi-criteria example with a Gaussian scenario and an interval design.

Nominal problem::

    min_x { f1 = -x + u,  f2 = 2x - u }   s.t.  g = x (u - 1) + exp(u) - 1 <= 0

with nominal scenario ``ū = 0``, Pareto point ``f* = (-2, 4)`` (attained by
``x = 2``), ``u ~ N(0, 1)`` and ``W(d) = [d1, d2]``.  All three functions
are convex in ``u``, so the worst case over an interval sits at an end
point and the inverse robust problem collapses to three variables:

    max  Psi(d2) - Psi(d1)
    s.t. -x + d2 <= -2 + eps1,   2x - d1 <= 4 + eps2,
         x (d2 - 1) + exp(d2) - 1 <= 0,   d1 <= 0 <= d2.

Everything in this module besides :func:`solve_example` works on that
reduced problem and serves as an independent reference for the solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .box import Box
from .design import Interval1D
from .errors import DomainError, UsageError
from .measures import MeasureSpec
from .model import IDENTITY, BudgetSpec, UncertainProblem
from .solver import SolverConfig, solve, solve_grid

BUILTIN_NAME = "bicriteria-normal"

F_STAR = (-2.0, 4.0)
X_NOMINAL = 2.0
# decision box: wide enough for every eps2 <= 30 (x* <= 2 + eps2 / 2)
DECISION_BOX = (-1.0, 21.0)
# open end d2 < 1 stored as a closed bound
D2_CAP = 1.0 - 1e-12

SOURCES = {
    "objectives": ["-x[0] + u[0]", "2*x[0] - u[0]"],
    "constraints": ["x[0]*(u[0] - 1) + exp(u[0]) - 1"],
}


def _f1(x, u):
    return -x[0] + u[0]


def _f2(x, u):
    return 2.0 * x[0] - u[0]


def _g(x, u):
    return x[0] * (u[0] - 1.0) + math.exp(u[0]) - 1.0


def bicriteria_problem(margin=12.0):
    """The uncertain problem with native callables (expression sources attached)."""
    return UncertainProblem(
        objectives=(_f1, _f2),
        constraints=(_g,),
        uncertainty_box=Box([-np.inf], [np.inf]),
        nominal_scenarios=[[0.0]],
        decision_box=Box([DECISION_BOX[0]], [DECISION_BOX[1]]),
        objective_flags=("convex-in-u", "convex-in-u"),
        constraint_flags=("convex-in-u",),
        margin=margin,
        name=BUILTIN_NAME,
        sources=SOURCES,
    )


def _eps(eps):
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    if eps.shape != (2,) or not (eps >= 0).all():
        raise UsageError(f"eps must be two nonnegative numbers, got {eps}")
    return eps


def example_budget(eps):
    return BudgetSpec.additive(F_STAR, _eps(eps))


def example_measure():
    return MeasureSpec.gaussian([0.0], [1.0])


def helper_m(d2):
    """``m(t) = (exp(t) - 1) / (1 - t)`` on ``[0, 1)``; strictly increasing."""
    d2 = float(d2)
    if not 0.0 <= d2 < 1.0:
        raise DomainError(f"m is defined on [0, 1), got {d2}")
    return math.expm1(d2) / (1.0 - d2)


def helper_m_inverse(y, rtol=1e-12):
    """Solve ``m(t) = y`` for ``t in [0, 1)`` by bisection.

    Values beyond ``m(1 - 1e-15)`` saturate at that end point.
    """
    y = float(y)
    if not y >= 0:
        raise DomainError(f"m^-1 needs y >= 0, got {y}")
    if y == 0.0:
        return 0.0
    lo, hi = 0.0, 1.0 - 1e-15
    if helper_m(hi) <= y:
        return hi
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        val = helper_m(mid)
        if abs(val - y) <= rtol * y:
            return mid
        if val < y:
            lo = mid
        else:
            hi = mid
    return lo if abs(helper_m(lo) - y) <= abs(helper_m(hi) - y) else hi


def feasible_point(eps):
    """Explicit feasible point ``(x, d1, d2)`` of the reduced problem."""
    e1, e2 = _eps(eps)
    x = e2 / 4.0 + 2.0
    return x, -e2 / 2.0, min(e2 / 4.0 + e1, helper_m_inverse(x))


def reduced_constraints(eps, x, d1, d2):
    """Left minus right hand sides of the reduced constraints (feasible iff all ``<= 0``)."""
    e1, e2 = _eps(eps)
    return np.array([
        -x + d2 + 2.0 - e1,
        2.0 * x - d1 - 4.0 - e2,
        x * (d2 - 1.0) + math.exp(d2) - 1.0,
        d1,
        -d2,
    ])


@dataclass(frozen=True)
class Bounds:
    """Compact box containing every feasible ``(x, d1, d2)`` of the reduced problem."""

    x: tuple
    d1: tuple
    d2: tuple

    def contains(self, x, d1, d2, tol=1e-9):
        return all(lo - tol <= v <= hi + tol for v, (lo, hi) in zip((x, d1, d2), (self.x, self.d1, self.d2)))


def analytic_bounds(eps):
    """``[max(2 - eps1, 0), 2 + eps2/2] x [-4 - eps2, 0] x [0, min(eps1 + eps2/2, 1)]``."""
    e1, e2 = _eps(eps)
    return Bounds(
        x=(max(2.0 - e1, 0.0), 2.0 + e2 / 2.0),
        d1=(-4.0 - e2, 0.0),
        d2=(0.0, min(e1 + e2 / 2.0, D2_CAP)),
    )


def brute_force_reduced(eps, grid_n=2000, chunk=250):
    """Dense scan of the reduced problem over ``(d1, d2)``.

    ``x`` is eliminated by ``x = (d1 + eps2) / 2 + 2``, which makes the
    second budget row active and is the best choice for every other row.
    Returns ``(V, x, d1, d2)`` of the best feasible grid point.
    """
    if grid_n < 100:
        raise UsageError("grid_n must be >= 100")
    e1, e2 = _eps(eps)
    b = analytic_bounds(eps)
    d1s = np.linspace(b.d1[0], b.d1[1], grid_n)
    d2s = np.linspace(b.d2[0], b.d2[1], grid_n)
    psi2 = ndtr(d2s)
    ex2 = np.expm1(d2s)
    best = (-math.inf, None, None, None)
    for start in range(0, grid_n, chunk):
        d1 = d1s[start:start + chunk, None]
        x = (d1 + e2) / 2.0 + 2.0
        ok = (-x + d2s + 2.0 - e1 <= 1e-12) & (x * (d2s - 1.0) + ex2 <= 1e-12)
        val = np.where(ok, psi2 - ndtr(d1), -np.inf)
        k = np.unravel_index(int(np.argmax(val)), val.shape)
        if val[k] > best[0]:
            best = (float(val[k]), float(x[k[0], 0]), float(d1[k[0], 0]), float(d2s[k[1]]))
    return best


def solve_example(eps, cfg=None, seed=True):
    """Solve the inverse robust example for one budget vector."""
    prob = bicriteria_problem()
    seeds = [seed_point(eps)] if seed else ()
    return solve(prob, example_budget(eps), (IDENTITY, IDENTITY), Interval1D(), example_measure(), cfg, seeds)


def seed_point(eps):
    x, d1, d2 = feasible_point(eps)
    return np.array([x]), np.array([d1, d2])


def solve_example_grid(eps_grid, cfg=None, workers=None):
    """Grid sweep; result order equals ``eps_grid`` order."""
    cfg = cfg or SolverConfig()
    prob = bicriteria_problem()
    return solve_grid(
        prob, example_budget((0.0, 0.0)), Interval1D(), example_measure(), cfg, eps_grid,
        seed_fn=lambda e: [seed_point(e)], workers=workers,
    )


def budget_grid(step=0.5, stop=5.0):
    """Row-major ``(eps1, eps2)`` grid with ``eps1`` as the slow index."""
    axis = np.round(np.arange(0.0, stop + step / 2, step), 12)
    return [(a, b) for a in axis for b in axis]


@dataclass(frozen=True)
class LimitReport:
    eps2: tuple
    x: tuple
    d1: tuple
    d2: tuple
    V: tuple
    x_increasing: bool
    d1_decreasing: bool
    d2_increasing: bool
    V_increasing: bool
    d2_gap_to_one: tuple


def limit_checks(eps2_sequence, eps1=0.0, cfg=None):
    """Solve along increasing ``eps2`` and report the monotone trends."""
    seq = [float(e) for e in eps2_sequence]
    if any(b <= a for a, b in zip(seq, seq[1:])):
        raise UsageError("eps2 sequence must be strictly increasing")
    rs = [solve_example((eps1, e), cfg) for e in seq]
    x = tuple(float(r.x_star[0]) for r in rs)
    d1 = tuple(float(r.d_star[0]) for r in rs)
    d2 = tuple(float(r.d_star[1]) for r in rs)
    V = tuple(r.V_star for r in rs)

    def up(v):
        return all(b > a for a, b in zip(v, v[1:]))

    return LimitReport(
        eps2=tuple(seq), x=x, d1=d1, d2=d2, V=V,
        x_increasing=up(x), d1_decreasing=up([-v for v in d1]), d2_increasing=up(d2),
        V_increasing=up(V), d2_gap_to_one=tuple(1.0 - v for v in d2),
    )


def builtin_instance(name=BUILTIN_NAME, eps=(0.0, 0.0), margin=12.0):
    """Everything needed to solve a named built-in instance."""
    if name != BUILTIN_NAME:
        raise UsageError(f"unknown builtin instance {name!r}")
    return {
        "problem": bicriteria_problem(margin),
        "budget": example_budget(eps),
        "selectors": (IDENTITY, IDENTITY),
        "family": Interval1D(),
        "measure": example_measure(),
    }
