import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from invrob.bicriteria import bicriteria_problem, example_budget
from invrob.box import Box
from invrob.design import Ball, Interval1D
from invrob.errors import ContractViolation, EvaluationError, UsageError
from invrob.model import (
    IDENTITY,
    NOMINAL_ONLY,
    BudgetSpec,
    Selector,
    UncertainProblem,
    budget_rhs,
    check_point_feasible,
    evaluate_constraint,
    evaluate_objective,
)

PROB = bicriteria_problem()


# -- evaluation ---------------------------------------------------------

@pytest.mark.parametrize("i,x,u,expected", [(0, 2.0, 0.0, -2.0), (1, 2.0, 0.0, 4.0), (0, 0.0, 0.0, 0.0)])
def test_evaluate_objective(i, x, u, expected):
    assert evaluate_objective(PROB, i, [x], [u]) == expected


@pytest.mark.parametrize("x,u,expected", [(2.0, 0.0, -2.0), (0.0, 0.0, 0.0), (0.0, 1.0, math.e - 1.0)])
def test_evaluate_constraint(x, u, expected):
    assert evaluate_constraint(PROB, 0, [x], [u]) == pytest.approx(expected, abs=1e-15)


def test_evaluate_dimension_and_index_errors():
    with pytest.raises(UsageError):
        evaluate_objective(PROB, 0, [1.0, 2.0], [0.0])
    with pytest.raises(UsageError):
        evaluate_objective(PROB, 2, [1.0], [0.0])


def test_non_finite_value_carries_location():
    prob = UncertainProblem(
        [lambda x, u: math.log(u[0])], [], Box([-1.0], [1.0]), [[0.5]], Box([0.0], [1.0])
    )
    with pytest.raises(EvaluationError) as info:
        evaluate_objective(prob, 0, [0.3], [-0.5])
    assert info.value.index == 0 and info.value.u[0] == -0.5


def test_problem_validation():
    with pytest.raises(UsageError):
        UncertainProblem([lambda x, u: 0.0], [], Box([-1.0], [1.0]), [[2.0]], Box([0.0], [1.0]))
    with pytest.raises(UsageError):
        UncertainProblem([lambda x, u: 0.0], [], Box([-1.0], [1.0]), [[0.0]], Box([0.0], [1.0]), ["concave"])
    with pytest.raises(UsageError):
        UncertainProblem([], [], Box([-1.0], [1.0]), [[0.0]], Box([0.0], [1.0]))


# -- budgets -------------------------------------------------------------

def test_budget_rhs_examples():
    assert budget_rhs(example_budget((0, 0)), 0, [2.0], [0.0]) == -2.0
    assert budget_rhs(example_budget((1, 2)), 1, [2.0], [0.0]) == 6.0
    fixed = BudgetSpec.fixed_level([5.0])
    assert budget_rhs(fixed, 0, [123.0], [-4.0]) == 5.0


def test_fixed_level_ignores_nominal_value():
    b = BudgetSpec(nominal_value=np.array([100.0]), mode="fixed-level", level=np.array([5.0]))
    assert budget_rhs(b, 0, [0.0], [0.0]) == 5.0


def test_budget_function_and_negative_value():
    b = BudgetSpec.additive([1.0], lambda x, u: [abs(u[0])])
    assert b.varies_with_u
    assert budget_rhs(b, 0, [0.0], [-3.0]) == 4.0
    bad = BudgetSpec.additive([1.0], lambda x, u: [u[0]])
    with pytest.raises(ContractViolation):
        budget_rhs(bad, 0, [0.0], [-1.0])


def test_negative_constant_epsilon_rejected():
    with pytest.raises(UsageError):
        BudgetSpec.additive([0.0, 0.0], [1.0, -0.1])


@given(st.lists(st.floats(0, 10), min_size=2, max_size=2), st.lists(st.floats(0, 10), min_size=2, max_size=2))
def test_budget_rhs_affine_in_eps(e1, e2):
    a = example_budget(e1)
    b = example_budget(np.add(e1, e2))
    for i in range(2):
        diff = budget_rhs(b, i, [0.0], [0.0]) - budget_rhs(a, i, [0.0], [0.0])
        assert diff == pytest.approx(e2[i], abs=1e-12)


# -- feasibility reports -------------------------------------------------

def test_point_feasible_at_degenerate_interval():
    rep = check_point_feasible(PROB, example_budget((0, 0)), IDENTITY, IDENTITY, [2.0], Interval1D(), [0.0, 0.0])
    assert rep.feasible and rep.max_violation <= 0.0


def test_point_infeasible_budget_one():
    rep = check_point_feasible(PROB, example_budget((0, 0)), IDENTITY, IDENTITY, [2.0], Interval1D(), [0.0, 0.5])
    assert not rep.feasible
    worst = max(rep.entries, key=lambda v: v.value)
    assert worst.name == "budget[0]" and worst.cls == "budget-selected"
    assert worst.value == pytest.approx(0.5) and worst.witness[0] == 0.5


def test_nominal_only_reduces_to_pointwise_check():
    budget = example_budget((0.3, 0.1))
    d = [-1.0, 0.7]
    rep = check_point_feasible(PROB, budget, NOMINAL_ONLY, NOMINAL_ONLY, [2.1], Interval1D(), d)
    for cls, nom in (("budget-selected", "budget-nominal"), ("feasibility-selected", "feasibility-nominal")):
        a = {v.name: v.value for v in rep.by_class(cls)}
        b = {v.name: v.value for v in rep.by_class(nom)}
        assert a == b
    assert rep.by_class("budget-selected")[0].value == evaluate_objective(PROB, 0, [2.1], [0.0]) - (-2.0 + 0.3)


def test_report_flags_uncovered_nominal():
    rep = check_point_feasible(PROB, example_budget((5, 5)), IDENTITY, IDENTITY, [2.0], Interval1D(), [0.2, 0.4])
    cover = rep.by_class("nominal-coverage")[0]
    assert cover.value == pytest.approx(0.2) and not rep.feasible


def test_check_point_feasible_needs_positive_tol():
    with pytest.raises(UsageError):
        check_point_feasible(PROB, example_budget((0, 0)), IDENTITY, IDENTITY, [2.0], Interval1D(), [0, 0], tol=0)


# -- selectors -----------------------------------------------------------

def shrink_half(x, fam, d):
    # custom selector: the left half of the interval
    return np.array([d[0], 0.5 * (d[0] + d[1])])


SELECTORS = [IDENTITY, NOMINAL_ONLY, Selector("custom", shrink_half)]
intervals = st.tuples(st.floats(-5, 0), st.floats(0, 5))


@given(intervals, st.integers(0, 2**32 - 1))
def test_selector_closure(d, seed):
    rng = np.random.default_rng(seed)
    fam = Interval1D()
    nominal = np.array([[0.0]])
    for sel in SELECTORS:
        for u in sel.sample([1.0], fam, np.array(d), nominal, 200, rng):
            assert fam.contains(d, u, 1e-12)


@given(intervals, st.floats(0, 3), st.floats(0, 3), st.integers(0, 2**32 - 1))
def test_selector_transitivity(d, gl, gr, seed):
    rng = np.random.default_rng(seed)
    fam = Interval1D()
    nominal = np.array([[0.0]])
    d1 = np.array(d)
    d2 = d1 + np.array([-gl, gr])
    for sel in (IDENTITY, NOMINAL_ONLY):
        for u in sel.sample([1.0], fam, d1, nominal, 100, rng):
            assert sel.contains([1.0], fam, d2, nominal, u)


def test_ball_selector_closure():
    rng = np.random.default_rng(3)
    fam = Ball([0.5, -1.0])
    for u in IDENTITY.sample([0.0], fam, np.array([0.8]), np.array([[0.5, -1.0]]), 200, rng):
        assert fam.contains([0.8], u, 1e-12)


def test_custom_selector_needs_function():
    with pytest.raises(UsageError):
        Selector("custom")
    with pytest.raises(UsageError):
        Selector("everything")
