"""Stability radius, resilience radius and radius of robust feasibility.

The latter two are posed as inverse robust problems with a one-parameter
design family (a ball around the nominal scenario, or a scaled polytope)
and handed to :func:`invrob.solver.solve`.  The stability radius keeps the
decision fixed, so it is computed by bisection on the radius with a nested
min-max check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .box import Box
from .design import Ball, ScaledSet
from .errors import InfeasibleProblemError, NonConvergenceError, UsageError
from .local import feasibility_key, pattern_search, start_points
from .measures import MeasureSpec
from .model import IDENTITY, BudgetSpec, UncertainProblem, as_vector
from .solver import SolverConfig, solve

#: Budget level standing in for an infinite budget.
INFINITE_BUDGET = 1e12

RADIUS_TOL = 1e-6
# slack on the epsilon-optimality gap, absorbs rounding in the inner minimum
GAP_TOL = 1e-14


@dataclass
class RadiusResult:
    """Radius with its certifying decision and worst-case scenario.

    ``comparison`` is the competitor decision that binds at ``witness``
    (stability radius only).  ``truncated`` means the radius reached the
    finite search bound and the true value may be larger.
    """

    kind: str
    radius: float
    x: np.ndarray
    witness: np.ndarray | None
    comparison: np.ndarray | None = None
    truncated: bool = False
    bracket: tuple = ()

    def to_json(self):
        out = {
            "kind": self.kind,
            "radius": self.radius,
            "x": self.x.tolist(),
            "witness": None if self.witness is None else self.witness.tolist(),
            "truncated": self.truncated,
        }
        if self.comparison is not None:
            out["comparison"] = self.comparison.tolist()
        return out


def _minimize_over_x(fun, decision_box, constraints, cfg):
    """Multistart coordinate search for ``min fun(x)`` on ``X̄``.

    Returns ``(value, x)``; raises ``NonConvergenceError`` when no start
    reaches a point satisfying ``constraints``.
    """
    lo, hi = decision_box.lo, decision_box.hi
    tol = cfg.feasibility_tol

    def key(x):
        viol = max((float(c(x)) for c in constraints), default=-math.inf)
        return feasibility_key(viol, -float(fun(x)), tol)

    pts = start_points(lo, hi, cfg.multistart_grid, cfg.max_starts)
    keys = [key(p) for p in pts]
    order = np.argsort([k[1] for k in keys], kind="stable")
    order = sorted(order, key=lambda i: keys[i][0] > 0)
    best_x, best_k = None, None
    for i in order[: cfg.local_starts]:
        x, k = pattern_search(key, pts[i], lo, hi, cfg.step_fraction, cfg.step_shrink, cfg.step_tol)
        if best_k is None or k < best_k:
            best_x, best_k = x, k
    if best_k[0] > 0:
        raise NonConvergenceError(
            f"no feasible competitor found in X̄ (violation {best_k[0]:.3g})", best=best_x, violation=best_k[0]
        )
    return best_k[1], best_x


def stability_radius(prob, x_bar, eps, constraints=(), cfg=None, objective=0, ubar=None):
    """Largest ``rho`` with ``f_u(x̄) <= f_u(x) + eps`` for all ``x in X̄`` and ``u in B_rho(ū)``.

    Parameters
    ----------
    prob : UncertainProblem
        Supplies the objective, the uncertainty box and the decision box
        ``X̄``.  Its own constraints are ignored.
    x_bar : array_like
        Decision whose optimality is tested.
    eps : float
        Allowed optimality gap, ``>= 0``.
    constraints : sequence of callables ``c(x) <= 0``
        Scenario-independent constraints cutting ``X̄`` out of the decision box.
    ubar : array_like, optional
        Centre of the balls; defaults to the first nominal scenario.
    """
    cfg = cfg or SolverConfig()
    eps = float(eps)
    if not eps >= 0:
        raise UsageError(f"eps must be >= 0, got {eps}")
    x_bar = as_vector(x_bar, prob.n, "decision")
    xbox = prob.decision_search_box
    if not xbox.contains(x_bar, 1e-12) or any(float(c(x_bar)) > cfg.feasibility_tol for c in constraints):
        raise UsageError("x_bar must lie in X̄")
    ubar = prob.nominal_scenarios[0] if ubar is None else as_vector(ubar, prob.m, "scenario")
    f = prob.objectives[objective]
    fam = Ball(ubar)
    box = prob.search_box
    rho_max = float(fam.design_bounds(box)[1][0])
    competitor = {}

    def gap(u):
        best, x = _minimize_over_x(lambda x: f(x, u), xbox, constraints, cfg)
        competitor[u.tobytes()] = x
        return float(f(x_bar, u)) - best - eps

    def worst(rho):
        res = fam.maximize(np.array([rho]), gap, "general", box, cfg.inner_grid)
        return res.value, res.witness

    g0 = gap(ubar)
    if g0 > GAP_TOL:
        raise InfeasibleProblemError(
            f"x_bar is not eps-optimal at the nominal scenario (gap {g0:.3g})", violation=g0, x=x_bar
        )
    v, w = worst(rho_max)
    if v <= GAP_TOL:
        return RadiusResult("stability", rho_max, x_bar, w, competitor.get(w.tobytes()), True, (rho_max, rho_max))
    lo, hi, w_hi = 0.0, rho_max, w
    while hi - lo > RADIUS_TOL:
        mid = 0.5 * (lo + hi)
        # the last failing witness pulled onto the smaller ball often fails too
        w = ubar + (mid / hi) * (w_hi - ubar)
        v = gap(w)
        if v <= GAP_TOL:
            v, w = worst(mid)
        if v <= GAP_TOL:
            lo = mid
        else:
            hi, w_hi = mid, w
    return RadiusResult("stability", lo, x_bar, w_hi, competitor.get(w_hi.tobytes()), False, (lo, hi))


def _level(B, p):
    B = np.atleast_1d(np.asarray(B, dtype=float))
    if B.size == 1:
        B = np.full(p, B[0])
    if B.size != p:
        raise UsageError(f"budget level has {B.size} components, problem has {p} objectives")
    return B


def _radius_result(kind, res):
    witness = res.active_set[0].witness if res.active_set else None
    return RadiusResult(kind, float(res.d_star[0]), res.x_star, witness, None, res.truncated)


def resilience_radius(prob, B, cfg=None, ubar=None):
    """Largest ball ``B_rho(ū)`` on which some decision keeps every objective ``<= B``.

    The decision may be re-chosen; ``prob``'s constraints must also hold on
    the whole ball.
    """
    cfg = cfg or SolverConfig()
    ubar = prob.nominal_scenarios[0] if ubar is None else as_vector(ubar, prob.m, "scenario")
    inst = replace(prob, nominal_scenarios=[ubar])
    budget = BudgetSpec.fixed_level(_level(B, prob.p))
    res = solve(inst, budget, (IDENTITY, IDENTITY), Ball(ubar), MeasureSpec("radius"), cfg)
    return _radius_result("resilience", res)


def rrf_problem(A_bar, b_bar, Z, decision_box, margin=12.0):
    """Robust linear system ``(ā_j + δ_a)·x <= b̄_j + δ_b`` as an uncertain problem.

    The perturbation ``δ = (δ_a, δ_b)`` ranges over ``alpha Z``.  Each row
    is maximised over ``δ`` on its own, so sharing one ``δ`` across rows is
    the same as giving every row its own copy of ``Z``.
    """
    A_bar = np.atleast_2d(np.asarray(A_bar, dtype=float))
    b_bar = np.atleast_1d(np.asarray(b_bar, dtype=float))
    p, n = A_bar.shape
    if b_bar.size != p:
        raise UsageError(f"b_bar has {b_bar.size} entries, A_bar has {p} rows")
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[1] != n + 1:
        raise UsageError(f"Z must live in R^{n + 1}, got dimension {Z.shape[1]}")

    def row(j):
        a, b = A_bar[j], b_bar[j]
        return lambda x, u: float((a + u[:n]) @ x - (b + u[n]))

    if not isinstance(decision_box, Box):
        decision_box = Box(*decision_box)
    prob = UncertainProblem(
        objectives=(lambda x, u: 0.0,),
        constraints=tuple(row(j) for j in range(p)),
        uncertainty_box=Box(np.full(n + 1, -np.inf), np.full(n + 1, np.inf)),
        nominal_scenarios=[np.zeros(n + 1)],
        decision_box=decision_box,
        objective_flags=("convex-in-u",),
        constraint_flags=("convex-in-u",) * p,
        margin=margin,
        name="rrf",
    )
    return prob, ScaledSet(np.zeros(n + 1), Z)


def radius_of_robust_feasibility(A_bar, b_bar, Z, decision_box, cfg=None, margin=12.0):
    """Largest ``alpha`` such that ``a_j·x <= b_j`` for all ``(a_j, b_j) in (ā_j, b̄_j) + alpha Z`` is solvable."""
    cfg = cfg or SolverConfig()
    prob, fam = rrf_problem(A_bar, b_bar, Z, decision_box, margin)
    budget = BudgetSpec.fixed_level([INFINITE_BUDGET])
    res = solve(prob, budget, (IDENTITY, IDENTITY), fam, MeasureSpec("radius"), cfg)
    slack = [a.slack for a in res.active_set if a.name.startswith("budget")]
    assert not slack, "surrogate infinite budget became active"
    out = _radius_result("rrf", res)
    feas = [a for a in res.active_set if a.name.startswith("feasibility")]
    if feas:
        out.witness = feas[0].witness
    return out
