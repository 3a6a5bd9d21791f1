import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stein_audit.densities import (Beta, CallableDensity, Exponential, Gaussian, GaussianScaleMixture, Logistic,
                                   PowerExponential, make_density, validate_class_G)
from stein_audit.errors import InvalidParams
from stein_audit.quadrature import Interval, integrate

ALL = [
    Gaussian(0, 1), Gaussian(-1.5, 3.0), Exponential(1.0), Exponential(2.5), Beta(2, 3), Beta(0.5, 0.7),
    PowerExponential(2.0, 0.5), PowerExponential(1.5, 1.0), PowerExponential(3.0, 1.0),
    PowerExponential(1.0, 1.0), PowerExponential(2.0, 1.0, "positive_half"),
    PowerExponential(1.5, 0.7, "negative_half"), Logistic(0.3, 0.8),
    GaussianScaleMixture((0.9, 1.1), (0.5, 0.5)),
]


@pytest.mark.parametrize("p", ALL, ids=repr)
def test_every_family_is_in_class_G(p):
    diag = validate_class_G(p)
    assert diag.normalization_defect <= 1e-9
    assert diag.positivity_violations == 0
    assert diag.score_mismatch <= 1e-5
    assert diag.passed


@pytest.mark.parametrize("p", ALL, ids=repr)
def test_cdf_limits_and_monotonicity(p):
    lo, hi = p.window(1e-12)
    x = np.linspace(lo, hi, 401)
    c = p.cdf(x)
    assert np.all(np.diff(c) >= -1e-15)
    assert c[0] < 1e-6 and c[-1] > 1 - 1e-6
    assert np.allclose(p.cdf(x) + p.sf(x), 1.0, atol=1e-14)


def test_power_exponential_recovers_standard_gaussian():
    p = make_density("power_exponential", alpha=2.0, d=0.5, support_kind="full_line")
    assert abs(p.c - 1 / math.sqrt(2 * math.pi)) < 1e-15
    x = np.linspace(-5, 5, 11)
    assert np.allclose(p.pdf(x), Gaussian(0, 1).pdf(x), rtol=1e-14)


def test_power_exponential_half_line_exponential():
    p = make_density("power_exponential", alpha=1.0, d=1.0, support_kind="positive_half")
    assert abs(p.c - 1.0) < 1e-15
    assert p.kink_points == ()


def test_laplace_carries_kink_and_piecewise_flag():
    p = make_density("power_exponential", alpha=1.0, d=1.0, support_kind="full_line")
    assert abs(p.c - 0.5) < 1e-15
    assert p.kink_points == (0.0,)
    assert p.piecewise_G


def test_score_conventions():
    assert Gaussian(0, 1).score(np.array([1.5]))[0] == -1.5
    # off-support score is zero
    assert Exponential(1.0).score(np.array([-1.0]))[0] == 0.0
    assert Beta(2, 3).score(np.array([1.5]))[0] == 0.0
    # Laplace takes the right limit at its kink
    lap = make_density("laplace", d=1.0)
    assert lap.score(np.array([0.0]))[0] == -1.0
    assert lap.score(np.array([-0.5]))[0] == 1.0


def test_beta_score_oracle():
    a, b, x = 2.0, 3.0, 0.3
    assert abs(Beta(a, b).score(np.array([x]))[0] - ((a - 1) / x - (b - 1) / (1 - x))) < 1e-14


@pytest.mark.parametrize("family,params", [
    ("gaussian", {"mu": 0.0, "var": -1.0}),
    ("exponential", {"rate": 0.0}),
    ("beta", {"a": 0.0, "b": 1.0}),
    ("power_exponential", {"alpha": 0.5, "d": 1.0}),
    ("power_exponential", {"alpha": 2.0, "d": 1.0, "support_kind": "upper"}),
    ("logistic", {"loc": 0.0, "s": -2.0}),
    ("scale_mixture", {"scales": [1.0, -1.0], "weights": [0.5, 0.5]}),
    ("nope", {}),
    ("gaussian", {"sigma": 1.0}),
])
def test_invalid_parameters_rejected(family, params):
    with pytest.raises(InvalidParams):
        make_density(family, **params)


def test_power_exponential_log_tails_do_not_underflow():
    p = PowerExponential(3.0, 1.0)
    v = p.log_sf(np.array([20.0]))[0]
    assert math.isfinite(v) and v < -7000
    assert abs(p.log_cdf(np.array([-20.0]))[0] - v) < 1e-9 * abs(v)


def test_moments_by_quadrature_match_closed_forms():
    p = PowerExponential(2.0, 0.5)
    assert abs(p.mean) < 1e-12
    assert abs(p.variance - 1.0) < 1e-10
    lap = make_density("laplace", d=1.0)
    assert abs(lap.variance - 2.0) < 1e-10


def test_callable_density_falls_back_to_quadrature():
    q = CallableDensity(lambda x: -x ** 2 / 2 - 0.5 * math.log(2 * math.pi), lambda x: -x, name="phi")
    z = np.array([-1.0, 0.0, 0.7])
    assert np.allclose(q.cdf(z), Gaussian(0, 1).cdf(z), atol=1e-10)
    assert abs(q.variance - 1.0) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([1.0, 1.5, 2.0, 3.0]), st.floats(0.3, 3.0),
       st.sampled_from(["full_line", "positive_half", "negative_half"]))
def test_power_exponential_normalization(alpha, d, kind):
    p = PowerExponential(alpha, d, kind)
    mass = integrate(p.pdf, p.support, points=p.kink_points, scale=p.scale).value
    assert abs(mass - 1.0) < 1e-9


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(0.25, 4.0), st.floats(0.01, 0.99))
def test_gaussian_ppf_inverts_cdf(mu, var, u):
    p = Gaussian(mu, var)
    assert abs(p.cdf(p.ppf(np.array([u])))[0] - u) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(0.6, 5.0), st.floats(0.6, 5.0), st.floats(0.02, 0.98))
def test_beta_ppf_and_cdf(a, b, u):
    p = Beta(a, b)
    x = p.ppf(np.array([u]))
    assert abs(p.cdf(x)[0] - u) < 1e-10
