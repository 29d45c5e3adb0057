"""Parametric problem vocabulary: problems, budgets, scenario selectors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .box import DEFAULT_MARGIN, Box
from .design import DEFAULT_GRID, FLAGS
from .errors import ContractViolation, EvaluationError, UsageError

ScalarFn = Callable[[np.ndarray, np.ndarray], float]


def as_vector(v, dim, what):
    v = np.atleast_1d(np.asarray(v, dtype=float)).reshape(-1)
    if v.size != dim:
        raise UsageError(f"{what} must have dimension {dim}, got {v.size}")
    if not np.isfinite(v).all():
        raise UsageError(f"{what} must be finite, got {v}")
    return v


@dataclass(frozen=True)
class UncertainProblem:
    """``min f_u(x) s.t. g_u(x) <= 0`` with ``u`` ranging over an uncertainty box.

    Objectives and constraints are callables ``fn(x, u) -> float`` on numpy
    vectors.  Convexity flags declare how each function behaves in ``u``
    and decide whether inner maximisation may look at vertices only.
    """

    objectives: Sequence[ScalarFn]
    constraints: Sequence[ScalarFn]
    uncertainty_box: Box
    nominal_scenarios: np.ndarray
    decision_box: Box
    objective_flags: Sequence[str] | None = None
    constraint_flags: Sequence[str] | None = None
    margin: float = DEFAULT_MARGIN
    name: str = "problem"
    sources: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.objectives) < 1:
            raise UsageError("problem needs at least one objective")
        nominal = np.atleast_2d(np.asarray(self.nominal_scenarios, dtype=float))
        if nominal.shape[0] < 1 or nominal.shape[1] != self.uncertainty_box.dim:
            raise UsageError(
                f"nominal scenarios must be a nonempty list of {self.uncertainty_box.dim}-vectors"
            )
        for ubar in nominal:
            if not self.uncertainty_box.contains(ubar):
                raise UsageError(f"nominal scenario {ubar} lies outside the uncertainty box")
        nominal.setflags(write=False)
        object.__setattr__(self, "nominal_scenarios", nominal)
        object.__setattr__(self, "objectives", tuple(self.objectives))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        for attr, fns in (("objective_flags", self.objectives), ("constraint_flags", self.constraints)):
            flags = getattr(self, attr)
            flags = tuple(flags) if flags is not None else ("general",) * len(fns)
            if len(flags) != len(fns):
                raise UsageError(f"{attr} needs one flag per function")
            for f in flags:
                if f not in FLAGS:
                    raise UsageError(f"unknown convexity flag {f!r}")
            object.__setattr__(self, attr, flags)

    @property
    def n(self):
        return self.decision_box.dim

    @property
    def m(self):
        return self.uncertainty_box.dim

    @property
    def p(self):
        return len(self.objectives)

    @property
    def q(self):
        return len(self.constraints)

    @property
    def search_box(self):
        """Uncertainty box with unbounded axes cut at ``+-margin``."""
        return self.uncertainty_box.bounded(self.margin)

    @property
    def decision_search_box(self):
        return self.decision_box.bounded(self.margin)

    def with_margin(self, margin):
        return replace(self, margin=float(margin))


def _evaluate(fns, kind, i, x, u, prob):
    if not 0 <= i < len(fns):
        raise UsageError(f"{kind} index {i} out of range (have {len(fns)})")
    x = as_vector(x, prob.n, "decision")
    u = as_vector(u, prob.m, "scenario")
    try:
        val = float(fns[i](x, u))
    except (ArithmeticError, ValueError) as exc:
        raise EvaluationError(f"{kind} {i} failed at x={x}, u={u}: {exc}", i, x, u) from exc
    if not math.isfinite(val):
        raise EvaluationError(f"{kind} {i} is not finite at x={x}, u={u}", i, x, u)
    return val


def evaluate_objective(prob, i, x, u):
    """``f_{i,u}(x)``."""
    return _evaluate(prob.objectives, "objective", i, x, u, prob)


def evaluate_constraint(prob, j, x, u):
    """``g_{j,u}(x)``; feasible iff ``<= 0``."""
    return _evaluate(prob.constraints, "constraint", j, x, u, prob)


@dataclass(frozen=True)
class BudgetSpec:
    """Right-hand side of the budget constraints ``f_{i,u}(x) <= rhs_i``.

    ``mode="additive"``: ``rhs_i = f*_i + eps_i(x, u)`` where ``epsilon`` is
    a constant vector or a callable ``(x, u) -> vector``.
    ``mode="fixed-level"``: ``rhs_i = level_i``; ``nominal_value`` and
    ``epsilon`` are ignored.
    """

    nominal_value: np.ndarray | None = None
    epsilon: np.ndarray | Callable | None = None
    mode: str = "additive"
    level: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in ("additive", "fixed-level"):
            raise UsageError(f"unknown budget mode {self.mode!r}")
        if self.mode == "fixed-level":
            if self.level is None:
                raise UsageError("fixed-level budget needs a level vector")
            object.__setattr__(self, "level", np.atleast_1d(np.asarray(self.level, dtype=float)))
            return
        if self.nominal_value is None:
            raise UsageError("additive budget needs nominal_value")
        fstar = np.atleast_1d(np.asarray(self.nominal_value, dtype=float))
        object.__setattr__(self, "nominal_value", fstar)
        eps = self.epsilon if self.epsilon is not None else np.zeros_like(fstar)
        if not callable(eps):
            eps = np.atleast_1d(np.asarray(eps, dtype=float))
            if eps.shape != fstar.shape:
                raise UsageError(f"epsilon has length {eps.size}, nominal value has {fstar.size}")
            if not (eps >= 0).all():
                raise UsageError(f"constant epsilon must be >= 0, got {eps}")
        object.__setattr__(self, "epsilon", eps)

    @classmethod
    def additive(cls, f_star, epsilon):
        return cls(nominal_value=f_star, epsilon=epsilon, mode="additive")

    @classmethod
    def fixed_level(cls, level):
        return cls(mode="fixed-level", level=level)

    @property
    def p(self):
        return (self.level if self.mode == "fixed-level" else self.nominal_value).size

    @property
    def varies_with_u(self):
        return self.mode == "additive" and callable(self.epsilon)

    def with_epsilon(self, epsilon):
        return replace(self, epsilon=epsilon)


def budget_rhs(budget, i, x, u):
    """Right-hand side of budget row ``i`` at ``(x, u)``."""
    if not 0 <= i < budget.p:
        raise UsageError(f"budget index {i} out of range (p={budget.p})")
    if budget.mode == "fixed-level":
        return float(budget.level[i])
    eps = budget.epsilon
    if callable(eps):
        vals = np.atleast_1d(np.asarray(eps(x, u), dtype=float))
        if vals.size != budget.p:
            raise ContractViolation(f"epsilon function returned {vals.size} values, expected {budget.p}")
        if (vals < 0).any() or not np.isfinite(vals).all():
            raise ContractViolation(f"epsilon function returned {vals} at x={x}, u={u}")
        e = float(vals[i])
    else:
        e = float(eps[i])
    return float(budget.nominal_value[i]) + e


SELECTOR_KINDS = ("nominal-only", "identity", "custom")


@dataclass(frozen=True)
class Selector:
    """Scenario selection ``Phi(x, W)``.

    ``nominal-only`` returns the nominal scenarios, ``identity`` returns
    ``W`` itself.  ``custom`` wraps a pure function ``fn(x, fam, d) -> d'``
    returning a design point of the same family with ``W(d') ⊆ W(d)``.
    """

    kind: str = "identity"
    fn: Callable | None = None
    name: str | None = None

    def __post_init__(self):
        if self.kind not in SELECTOR_KINDS:
            raise UsageError(f"unknown selector kind {self.kind!r}")
        if self.kind == "custom" and self.fn is None:
            raise UsageError("custom selector needs a function")

    def select(self, x, fam, d):
        """Design point of the selected sub-family, or ``None`` for nominal-only."""
        if self.kind == "nominal-only":
            return None
        if self.kind == "identity":
            return d
        return fam.check(self.fn(x, fam, d))

    def sample(self, x, fam, d, nominal, n, rng):
        """Draw ``n`` scenarios from ``Phi(x, W(d))``."""
        sub = self.select(x, fam, d)
        if sub is None:
            nominal = np.atleast_2d(nominal)
            return nominal[rng.integers(0, len(nominal), size=n)]
        return fam.sample(sub, n, rng)

    def contains(self, x, fam, d, nominal, u):
        sub = self.select(x, fam, d)
        if sub is None:
            return any(np.array_equal(u, ubar) for ubar in np.atleast_2d(nominal))
        return fam.contains(sub, u, 1e-12)


NOMINAL_ONLY = Selector("nominal-only")
IDENTITY = Selector("identity")


@dataclass(frozen=True)
class ConstraintRow:
    """One semi-infinite constraint class ``phi(u) <= 0`` for fixed ``x``."""

    name: str
    phi: Callable
    flag: str
    selector: Selector | None  # None: evaluated at the nominal scenarios only


def constraint_rows(prob, budget, selectors, x):
    """All constraint classes of the extended problem for a fixed decision."""
    if budget.p != prob.p:
        raise UsageError(f"budget has {budget.p} components, problem has {prob.p} objectives")
    phi1, phi2 = selectors
    rows = []
    budget_flag_general = budget.varies_with_u
    for i, f in enumerate(prob.objectives):
        def budget_row(u, i=i, f=f):
            return _eval_at(f, "objective", i, x, u) - budget_rhs(budget, i, x, u)

        flag = "general" if budget_flag_general else prob.objective_flags[i]
        rows.append(ConstraintRow(f"budget[{i}]", budget_row, flag, phi1))
    for j, g in enumerate(prob.constraints):
        def feas_row(u, j=j, g=g):
            return _eval_at(g, "constraint", j, x, u)

        rows.append(ConstraintRow(f"feasibility[{j}]", feas_row, prob.constraint_flags[j], phi2))
    return rows


def _eval_at(fn, kind, i, x, u):
    try:
        val = float(fn(x, u))
    except (ArithmeticError, ValueError) as exc:
        raise EvaluationError(f"{kind} {i} failed at x={x}, u={u}: {exc}", i, x, u) from exc
    if not math.isfinite(val):
        raise EvaluationError(f"{kind} {i} is not finite at x={x}, u={u}", i, x, u)
    return val


@dataclass(frozen=True)
class Violation:
    """Largest violation of one constraint class and where it happens."""

    cls: str
    name: str
    value: float
    witness: np.ndarray
    reference: np.ndarray | None = None


@dataclass(frozen=True)
class FeasibilityReport:
    entries: tuple
    tol: float

    @property
    def max_violation(self):
        return max((v.value for v in self.entries), default=-math.inf)

    @property
    def feasible(self):
        return self.max_violation <= self.tol

    def by_class(self, cls):
        return [v for v in self.entries if v.cls == cls]


def row_violations(rows, x, fam, d, nominal, box, grid=DEFAULT_GRID):
    """Maximal violation of every row over its selected set and over ``Ū``."""
    out = []
    for row in rows:
        cls = "budget" if row.name.startswith("budget") else "feasibility"
        sub = row.selector.select(x, fam, d) if row.selector is not None else None
        if sub is None:
            vals = [(row.phi(ubar), ubar) for ubar in nominal]
            val, wit = max(vals, key=lambda p: p[0])
            out.append(Violation(f"{cls}-selected", row.name, val, wit))
        else:
            res = fam.maximize(sub, row.phi, row.flag, box, grid)
            out.append(Violation(f"{cls}-selected", row.name, res.value, res.witness, res.reference))
        vals = [(row.phi(ubar), ubar) for ubar in nominal]
        val, wit = max(vals, key=lambda p: p[0])
        out.append(Violation(f"{cls}-nominal", row.name, val, wit))
    return out


def check_point_feasible(prob, budget, phi1, phi2, x, fam, d, tol=1e-8, grid=DEFAULT_GRID):
    """Feasibility of ``(x, W(d))`` for the extended problem.

    Reports, for each budget and feasibility row, the maximal violation over
    ``Phi(x, W(d))`` and over the nominal set, with witnesses.  Coverage of
    the nominal set itself is reported under class ``"nominal-coverage"``.
    """
    if not tol > 0:
        raise UsageError("tol must be > 0")
    x = as_vector(x, prob.n, "decision")
    d = fam.check(d)
    if fam.m != prob.m:
        raise UsageError(f"family has dimension {fam.m}, problem has {prob.m}")
    rows = constraint_rows(prob, budget, (phi1, phi2), x)
    entries = row_violations(rows, x, fam, d, prob.nominal_scenarios, prob.search_box, grid)
    cover = [(fam.delta(d, ubar), ubar) for ubar in prob.nominal_scenarios]
    val, wit = max(cover, key=lambda p: p[0])
    entries.append(Violation("nominal-coverage", "nominal-in-W", val, wit))
    return FeasibilityReport(tuple(entries), tol)
