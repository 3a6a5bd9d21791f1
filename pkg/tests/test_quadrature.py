import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stein_audit.errors import NonFiniteEvaluation
from stein_audit.quadrature import (GAUSS_WEIGHTS, KRONROD_WEIGHTS, NODES, REAL_LINE, Interval, Piece,
                                    Tolerances, expectation, integrate, integrate_batch, supremum)
from stein_audit.densities import Beta, Exponential, Gaussian

TIGHT = Tolerances(abs_tol=1e-13, rel_tol=1e-12)


@pytest.mark.parametrize("weights,degree", [(KRONROD_WEIGHTS, 31), (GAUSS_WEIGHTS, 19)])
def test_rule_exactness(weights, degree):
    for k in range(degree + 1):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert abs(np.dot(weights, NODES ** k) - exact) < 1e-14
    # one degree beyond is no longer exact
    k = degree + 1
    assert abs(np.dot(weights, NODES ** k) - 2.0 / (k + 1)) > 1e-12


def test_interval_invariants():
    iv = Interval(0.0, math.inf, lower_open=False)
    assert iv.upper_open and not iv.lower_open
    assert iv.contains(0.0) and not iv.interior(0.0)
    with pytest.raises(ValueError):
        Interval(1.0, 1.0)
    assert Interval(0.2, 0.5).issubset(Interval(0.0, 1.0))
    assert not REAL_LINE.issubset(iv)


def test_polynomial_on_unit_interval():
    res = integrate(lambda x: x ** 2, Interval(0.0, 1.0))
    assert res.converged
    assert abs(res.value - 1 / 3) < 1e-14


def test_gaussian_normalization_on_real_line():
    res = integrate(lambda x: np.exp(-x ** 2 / 2) / math.sqrt(2 * math.pi), REAL_LINE)
    assert abs(res.value - 1.0) < 1e-12


def test_exponential_tail_transform():
    res = integrate(lambda x: np.exp(-x), Interval(0.0, math.inf))
    assert abs(res.value - 1.0) < 1e-12


def test_endpoint_singularity_with_hint():
    # arcsine density integrates to one despite 1/sqrt singularities at both ends
    f = lambda x: 1.0 / (math.pi * np.sqrt(x * (1 - x)))
    res = integrate(f, Interval(0.0, 1.0), TIGHT, singular=True)
    assert abs(res.value - 1.0) < 1e-10


def test_budget_exhaustion_reports_nonconvergence():
    res = integrate(lambda x: 1.0 / x, Interval(0.0, 1.0), Tolerances(max_panels=64))
    assert not res.converged


def test_nan_integrand_raises():
    with pytest.raises(NonFiniteEvaluation):
        integrate(lambda x: np.where(x > 0.5, np.nan, x), Interval(0.0, 1.0))


def test_expectation_moment_oracles():
    assert abs(expectation(Gaussian(0, 1), lambda x: x ** 2).value - 1.0) < 1e-9
    assert abs(expectation(Exponential(1.0), lambda x: x).value - 1.0) < 1e-9
    assert abs(expectation(Beta(2, 3), lambda x: x).value - 2 / 5) < 1e-9


def test_expectation_never_evaluates_outside_support():
    seen = []

    def g(x):
        seen.append(np.min(x))
        return np.ones_like(x)

    expectation(Exponential(1.0), g)
    assert min(seen) >= 0.0


def test_batch_matches_scalar_calls():
    pieces = [Piece(0.0, 1.0), Piece(-math.inf, 0.0), Piece(2.0, math.inf, scale=2.0)]
    res = integrate_batch(lambda x, i: np.exp(-np.abs(x)), pieces, TIGHT)
    assert abs(res[0].value - (1 - math.exp(-1))) < 1e-13
    assert abs(res[1].value - 1.0) < 1e-12
    assert abs(res[2].value - math.exp(-2)) < 1e-13


def test_supremum_of_normal_pdf():
    arg, val = supremum(lambda x: np.exp(-x ** 2 / 2) / math.sqrt(2 * math.pi), REAL_LINE)
    assert abs(arg) < 1e-6
    assert abs(val - 1 / math.sqrt(2 * math.pi)) < 1e-12


def test_supremum_of_concave_vertex():
    arg, val = supremum(lambda x: -x ** 2, Interval(-1.0, 1.0, False, False))
    assert abs(arg) < 1e-9 and abs(val) < 1e-15


def test_supremum_of_cdf_gap_at_crossing():
    ndtr = lambda x: 0.5 * (1 + np.vectorize(math.erf)(np.asarray(x) / math.sqrt(2)))
    arg, val = supremum(lambda x: np.abs(ndtr(x) - ndtr(x - 1)), REAL_LINE, window=(-10, 10))
    oracle = 2 * 0.5 * (1 + math.erf(0.5 / math.sqrt(2))) - 1
    assert abs(arg - 0.5) < 1e-6
    assert abs(val - oracle) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=20),
       st.floats(-5, 5), st.floats(0.1, 5))
def test_polynomial_exactness(coeffs, a, width):
    b = a + width
    poly = np.polynomial.Polynomial(coeffs)
    exact = poly.integ()(b) - poly.integ()(a)
    res = integrate(poly, Interval(a, b))
    m = max(1.0, abs(a), abs(b))
    scale = sum(abs(c) * m ** (k + 1) for k, c in enumerate(coeffs))
    assert abs(res.value - exact) <= 1e-12 * (1.0 + scale)


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.2, 3))
def test_linearity(alpha, beta, k):
    f = lambda x: np.exp(-x ** 2) * np.cos(k * x)
    g = lambda x: 1 / (1 + x ** 4)
    lhs = integrate(lambda x: alpha * f(x) + beta * g(x), REAL_LINE, TIGHT)
    rhs = alpha * integrate(f, REAL_LINE, TIGHT).value + beta * integrate(g, REAL_LINE, TIGHT).value
    assert abs(lhs.value - rhs) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(st.floats(-4, 4))
def test_interval_additivity(c):
    # the kink at 0.3 is declared, as the error estimates assume smooth pieces
    f = lambda x: np.exp(-np.abs(x - 0.3)) * (1 + np.sin(x))
    whole = integrate(f, REAL_LINE, TIGHT, points=[0.3])
    left = integrate(f, Interval(-math.inf, c), TIGHT, points=[0.3])
    right = integrate(f, Interval(c, math.inf), TIGHT, points=[0.3])
    tol = whole.abs_error_estimate + left.abs_error_estimate + right.abs_error_estimate + 1e-12
    assert abs(whole.value - left.value - right.value) <= tol


def test_truncation_stability():
    # an integral over [c, inf) barely moves when c goes deeper into the tail
    f = lambda x: np.exp(-x ** 2 / 2)
    a = integrate(f, Interval(-40.0, 40.0), TIGHT).value
    b = integrate(f, Interval(-60.0, 60.0), TIGHT).value
    assert abs(a - b) < 1e-10


@pytest.mark.parametrize("b", [0.51, 0.5625, 0.7])
def test_expectation_near_singular_end_matches_weighted_reference(b):
    # scipy's algebraic-weight rule integrates the (1 - x)^(b - 1) factor exactly
    from scipy.integrate import quad
    ref = quad(lambda t: b * np.cos(t), 0.0, 1.0, weight="alg", wvar=(0.0, b - 1.0), epsabs=1e-16, epsrel=1e-13)[0]
    got = expectation(Beta(1.0, b), np.cos, TIGHT).value
    assert abs(got - ref) < 1e-13
