import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq
from scipy.special import ndtr

from invrob.bicriteria import (
    analytic_bounds,
    bicriteria_problem,
    brute_force_reduced,
    builtin_instance,
    example_budget,
    feasible_point,
    helper_m,
    helper_m_inverse,
    limit_checks,
    budget_grid,
    reduced_constraints,
    solve_example,
)
from invrob.design import Interval1D
from invrob.errors import DomainError, UsageError
from invrob.model import IDENTITY, check_point_feasible, evaluate_constraint, evaluate_objective

PROB = bicriteria_problem()


# -- helper m and its inverse ----------------------------------------------

def test_helper_m_examples():
    assert helper_m(0.0) == 0.0
    assert helper_m(0.5) == pytest.approx((math.exp(0.5) - 1) / 0.5, rel=1e-15)
    assert helper_m(0.5) == pytest.approx(1.29744, abs=1e-5)


@given(st.floats(0, 0.999), st.floats(1e-6, 1))
def test_helper_m_strictly_increasing(a, frac):
    b = a + frac * (0.9999 - a)
    if b > a:
        assert helper_m(b) > helper_m(a)


def test_helper_m_domain():
    for bad in (1.0, 1.5, -0.1):
        with pytest.raises(DomainError):
            helper_m(bad)
    with pytest.raises(DomainError):
        helper_m_inverse(-1.0)


def test_helper_m_inverse_examples():
    assert helper_m_inverse(0.0) == 0.0
    assert abs(helper_m_inverse(helper_m(0.7)) - 0.7) <= 1e-10
    # independent root finder on the defining equation
    ref = brentq(lambda t: math.expm1(t) - 2.0 * (1.0 - t), 0.0, 1.0, xtol=1e-15)
    assert abs(helper_m_inverse(2.0) - ref) <= 1e-10


@given(st.floats(0, 0.99))
def test_helper_m_round_trip(t):
    assert abs(helper_m_inverse(helper_m(t)) - t) <= 1e-10


# -- feasible point and bounds ---------------------------------------------

def test_feasible_point_examples():
    assert feasible_point((0, 0)) == (2.0, 0.0, 0.0)
    x, d1, d2 = feasible_point((0, 4))
    assert (x, d1) == (3.0, -2.0) and d2 == helper_m_inverse(3.0) and d2 < 1.0
    x, d1, d2 = feasible_point((5, 0))
    assert (x, d1) == (2.0, 0.0) and d2 == helper_m_inverse(2.0)


@given(st.floats(0, 10), st.floats(0, 10))
def test_feasible_point_is_feasible(e1, e2):
    x, d1, d2 = feasible_point((e1, e2))
    assert (reduced_constraints((e1, e2), x, d1, d2) <= 1e-9).all()
    rep = check_point_feasible(PROB, example_budget((e1, e2)), IDENTITY, IDENTITY, [x], Interval1D(), [d1, d2],
                               tol=1e-9)
    assert rep.feasible


def test_analytic_bounds_examples():
    b = analytic_bounds((0, 0))
    assert b.x == (2.0, 2.0) and b.d1 == (-4.0, 0.0) and b.d2 == (0.0, 0.0)
    assert analytic_bounds((1, 2)).d2 == (0.0, 1.0 - 1e-12)
    assert analytic_bounds((0, 4)).d1 == (-8.0, 0.0)


@pytest.mark.parametrize("eps", [(0, 1), (0.5, 3), (2, 6), (4, 0.5)])
def test_solver_output_inside_analytic_bounds(eps):
    r = solve_example(eps)
    x, (d1, d2) = r.x_star[0], r.d_star
    assert analytic_bounds(eps).contains(x, d1, d2, 1e-8)
    assert (reduced_constraints(eps, x, d1, d2) <= 1e-8).all()


# -- brute force -------------------------------------------------------------

def test_brute_force_at_zero_budget():
    V, x, d1, d2 = brute_force_reduced((0, 0), grid_n=200)
    assert V == 0.0 and (x, d1, d2) == (2.0, 0.0, 0.0)


def test_brute_force_rejects_small_grid():
    with pytest.raises(UsageError):
        brute_force_reduced((0, 0), grid_n=50)


def test_brute_force_matches_solver_at_eps_0_10():
    V, x, d1, d2 = brute_force_reduced((0, 10))
    r = solve_example((0, 10))
    assert abs(V - r.V_star) <= 1e-3 and V <= r.V_star + 1e-12
    assert abs(d2 - helper_m_inverse(x)) <= 2e-3
    assert V < 0.8414


# -- nominal Pareto check ----------------------------------------------------

def test_nominal_pareto_point():
    # at u = 0 the image of x >= 0 is {(-x, 2x)} = {t(-1, 2) : t >= 0}; all of it is Pareto optimal
    for x in np.linspace(0, 5, 11):
        f = (evaluate_objective(PROB, 0, [x], [0.0]), evaluate_objective(PROB, 1, [x], [0.0]))
        assert f[1] == pytest.approx(-2 * f[0])
    assert evaluate_objective(PROB, 0, [2.0], [0.0]) == -2.0
    assert evaluate_objective(PROB, 1, [2.0], [0.0]) == 4.0
    assert evaluate_constraint(PROB, 0, [2.0], [0.0]) <= 0.0


# -- limits, grid helpers and builtin ----------------------------------------

def test_limit_trends():
    rep = limit_checks([0, 5, 10, 20])
    assert rep.x_increasing and rep.d1_decreasing and rep.d2_increasing and rep.V_increasing
    assert all(v < 0.8414 for v in rep.V)
    gaps = rep.d2_gap_to_one
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_limit_checks_needs_increasing_sequence():
    with pytest.raises(UsageError):
        limit_checks([0, 5, 5])


def test_budget_grid_shape_and_order():
    g = budget_grid()
    assert len(g) == 121 and g[0] == (0.0, 0.0) and g[1] == (0.0, 0.5) and g[-1] == (5.0, 5.0)


def test_value_is_gaussian_mass_of_interval():
    r = solve_example((1, 2))
    assert r.V_star == pytest.approx(ndtr(r.d_star[1]) - ndtr(r.d_star[0]), abs=1e-14)


def test_builtin_instance_lookup():
    inst = builtin_instance(eps=(1, 1))
    assert set(inst) == {"problem", "budget", "selectors", "family", "measure"}
    with pytest.raises(UsageError):
        builtin_instance("nope")
