import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats
from scipy.special import ndtr

from invrob.box import Box
from invrob.design import Ball, BoxFamily, Interval1D, ScaledSet
from invrob.errors import UnsupportedError, UsageError
from invrob.measures import MeasureSpec, measure, std_normal_cdf

mpmath.mp.dps = 40

G = MeasureSpec.gaussian([0.0], [1.0])
VOL = MeasureSpec("volume")


def mp_cdf(t):
    return float(mpmath.ncdf(mpmath.mpf(t)))


# -- normal distribution function -----------------------------------------

def test_cdf_at_zero_is_exactly_half():
    assert std_normal_cdf(0.0) == 0.5


def test_cdf_at_one_against_quadrature():
    # independent route: integrate the density with mpmath quadrature
    oracle = 0.5 + mpmath.quad(lambda s: mpmath.exp(-s * s / 2) / mpmath.sqrt(2 * mpmath.pi), [0, 1])
    assert abs(std_normal_cdf(1.0) - float(oracle)) <= 1e-15
    assert abs(std_normal_cdf(1.0) - 0.841344746) <= 1e-9


def test_cdf_reflection_at_1_7():
    assert abs(std_normal_cdf(-1.7) - (1.0 - std_normal_cdf(1.7))) <= 1e-15


@given(st.floats(-40, 40, allow_nan=False))
def test_cdf_matches_high_precision(t):
    assert abs(std_normal_cdf(t) - mp_cdf(t)) <= 1e-15


@given(st.floats(-8, 8, allow_nan=False))
def test_cdf_reflection(t):
    assert abs(std_normal_cdf(t) + std_normal_cdf(-t) - 1.0) <= 1e-12


@given(st.floats(-10, 10), st.floats(0, 1e-3))
def test_cdf_monotone(t, h):
    assert std_normal_cdf(t) <= std_normal_cdf(t + h)


def test_cdf_tail_relative_accuracy():
    for t in (-5.0, -8.0, -12.0, -20.0):
        assert std_normal_cdf(t) == pytest.approx(mp_cdf(t), rel=1e-13)


def test_cdf_rejects_nan():
    with pytest.raises(UsageError):
        std_normal_cdf(float("nan"))


# -- gaussian measure -----------------------------------------------------

def test_gaussian_degenerate_interval_is_zero():
    assert measure(G, Interval1D(), [0.0, 0.0]) == 0.0


def test_gaussian_clipped_interval_is_psi_one():
    v = measure(G, Interval1D(), [-12.0, 1.0], Box([-12.0], [12.0]))
    assert abs(v - 0.841344746068543) < 1e-12


def test_volume_of_interval():
    assert measure(VOL, Interval1D(), [-1.0, 0.5]) == 1.5


@given(st.floats(-6, 6), st.floats(0, 6), st.floats(-2, 2), st.floats(0.2, 3))
def test_gaussian_interval_matches_ndtr(lo, w, mu, sigma):
    spec = MeasureSpec.gaussian([mu], [sigma])
    v = measure(spec, Interval1D(), [lo, lo + w])
    ref = ndtr((lo + w - mu) / sigma) - ndtr((lo - mu) / sigma)
    assert abs(v - ref) < 1e-14


def test_gaussian_interval_matches_monte_carlo():
    rng = np.random.default_rng(7)
    u = rng.standard_normal(10**6)
    for _ in range(20):
        lo, hi = np.sort(rng.uniform(-3, 3, 2))
        p_hat = float(np.mean((u >= lo) & (u <= hi)))
        se = math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / u.size)
        assert abs(measure(G, Interval1D(), [lo, hi]) - p_hat) <= 3 * se + 1e-12


def test_gaussian_box_is_product():
    spec = MeasureSpec.gaussian([0.0, 1.0], [1.0, 2.0])
    v = measure(spec, BoxFamily(2), [-1.0, 0.0, 0.5, 3.0])
    ref = (ndtr(0.5) - ndtr(-1.0)) * (ndtr(1.0) - ndtr(-0.5))
    assert abs(v - ref) < 1e-14


@pytest.mark.parametrize("rho", [0.3, 1.0, 2.5])
def test_gaussian_centred_disc_matches_chi2(rho):
    spec = MeasureSpec.gaussian([0.0, 0.0], [1.0, 1.0])
    v = measure(spec, Ball([0.0, 0.0]), [rho])
    assert v == pytest.approx(stats.chi2.cdf(rho**2, 2), rel=1e-6)


@pytest.mark.parametrize("rho", [0.5, 1.5])
def test_gaussian_centred_ball_3d_matches_chi2(rho):
    spec = MeasureSpec.gaussian([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
    v = measure(spec, Ball([0.0, 0.0, 0.0]), [rho])
    assert v == pytest.approx(stats.chi2.cdf(rho**2, 3), rel=1e-6)


def test_gaussian_offset_disc_matches_dblquad():
    spec = MeasureSpec.gaussian([0.4, -0.2], [1.0, 0.7])
    c, rho = np.array([1.0, 0.5]), 0.8
    dens = lambda y, x: stats.norm.pdf(x, 0.4, 1.0) * stats.norm.pdf(y, -0.2, 0.7)
    ref, _ = integrate.dblquad(
        dens, c[0] - rho, c[0] + rho,
        lambda x: c[1] - math.sqrt(max(rho**2 - (x - c[0]) ** 2, 0.0)),
        lambda x: c[1] + math.sqrt(max(rho**2 - (x - c[0]) ** 2, 0.0)),
        epsabs=1e-13, epsrel=1e-12,
    )
    assert measure(spec, Ball(c), [rho]) == pytest.approx(ref, rel=1e-6)


def test_gaussian_square_polytope_matches_box():
    spec = MeasureSpec.gaussian([0.0, 0.0], [1.0, 1.0])
    fam = ScaledSet([0.2, -0.1], [[-1, -1], [1, -1], [1, 1], [-1, 1]])
    v = measure(spec, fam, [0.9])
    ref = (ndtr(1.1) - ndtr(-0.7)) * (ndtr(0.8) - ndtr(-1.0))
    assert v == pytest.approx(ref, rel=1e-6)


def test_gaussian_cube_polytope_matches_box():
    spec = MeasureSpec.gaussian([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
    verts = [[a, b, c] for a in (-1, 1) for b in (-1, 1) for c in (-1, 1)]
    v = measure(spec, ScaledSet([0.0, 0.0, 0.0], verts), [0.7])
    assert v == pytest.approx((ndtr(0.7) - ndtr(-0.7)) ** 3, rel=1e-6)


# -- geometry and distances -----------------------------------------------

@given(st.floats(0.01, 3))
def test_polytope_volume_scales_as_alpha_to_m(alpha):
    fam = ScaledSet([0.0, 0.0, 0.0], [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    assert measure(VOL, fam, [2 * alpha]) / measure(VOL, fam, [alpha]) == pytest.approx(8.0, rel=1e-14)


def test_ball_volume_closed_form():
    assert measure(VOL, Ball([0.0, 0.0]), [2.0]) == pytest.approx(4 * math.pi)
    assert measure(VOL, Ball([0.0, 0.0, 0.0]), [1.0]) == pytest.approx(4 * math.pi / 3)


def test_min_and_max_distance_to_bad_points():
    spec_min = MeasureSpec("min-dist-to-bad", bad_points=[[3.0]])
    spec_max = MeasureSpec("max-dist-to-bad", bad_points=[[3.0]])
    assert measure(spec_min, Interval1D(), [-1.0, 1.0]) == pytest.approx(2.0, abs=1e-9)
    assert measure(spec_max, Interval1D(), [-1.0, 1.0]) == pytest.approx(4.0, abs=1e-9)


def test_max_distance_to_bad_box_uses_vertices():
    spec = MeasureSpec("max-dist-to-bad", bad_box=Box([2.0, 2.0], [3.0, 3.0]))
    assert measure(spec, BoxFamily(2), [0.0, 0.0, 1.0, 1.0]) == pytest.approx(2 * math.sqrt(2))


@given(st.floats(-3, 0), st.floats(0, 3), st.floats(0, 2), st.floats(0, 2))
def test_measures_monotone_under_inclusion(lo, hi, gl, gr):
    d1 = [lo, hi]
    d2 = [lo - gl, hi + gr]
    bad = [[5.0]]
    for spec in (VOL, G, MeasureSpec("max-dist-to-bad", bad_points=bad)):
        assert measure(spec, Interval1D(), d1) <= measure(spec, Interval1D(), d2) + 1e-12
    spec = MeasureSpec("min-dist-to-bad", bad_points=bad)
    assert measure(spec, Interval1D(), d1) >= measure(spec, Interval1D(), d2) - 1e-9


def test_measure_spec_validation():
    with pytest.raises(UsageError):
        MeasureSpec.gaussian([0.0], [0.0])
    with pytest.raises(UsageError):
        MeasureSpec("min-dist-to-bad")
    with pytest.raises(UsageError):
        MeasureSpec("entropy")


def test_radius_measure_needs_one_parameter_family():
    with pytest.raises(UnsupportedError):
        measure(MeasureSpec("radius"), Interval1D(), [0.0, 1.0])
    assert measure(MeasureSpec("radius"), Ball([0.0]), [0.7]) == 0.7
