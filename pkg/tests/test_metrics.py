import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats
from scipy.optimize import minimize_scalar

from stein_audit.densities import Beta, CallableDensity, Exponential, Gaussian, Logistic, PowerExponential, make_density
from stein_audit.errors import DecompositionMismatch, InvalidMixing, InvalidParams, NonFiniteDistance, SupportMismatch
from stein_audit.metrics import (classical_distance, density_crossings, fisher_information, gaussian_decomposition,
                                 gaussian_fisher_distance, generalized_fisher_distance, kl_divergence,
                                 parse_mixing, scale_mixture_fisher)


def Phi(x):
    return 0.5 * (1 + math.erf(x / math.sqrt(2)))


def laplace(loc=0.0):
    return make_density("laplace", d=1.0, loc=loc)


def test_tv_of_unit_shift_matches_crossing_oracle():
    # densities cross at 1/2, so tv = Phi(1/2) - Phi(-1/2)
    assert abs(classical_distance("tv", Gaussian(0, 1), Gaussian(1, 1)) - (2 * Phi(0.5) - 1)) < 1e-12
    assert abs(2 * Phi(0.5) - 1 - 0.382925) < 1e-6


def test_crossings_of_unit_shift():
    xs = density_crossings(Gaussian(0, 1), Gaussian(1, 1))
    assert len(xs) == 1 and abs(xs[0] - 0.5) < 1e-10


def test_wasserstein_of_location_shift():
    assert abs(classical_distance("wass", Gaussian(0, 1), Gaussian(1, 1)) - 1.0) < 1e-9
    assert abs(classical_distance("wasserstein", laplace(), laplace(0.7)) - 0.7) < 1e-9


def test_wasserstein_needs_finite_means():
    cauchy = CallableDensity(log_pdf_fn=lambda x: -np.log(np.pi * (1 + x ** 2)),
                             score_fn=lambda x: -2 * x / (1 + x ** 2), name="cauchy")
    with pytest.raises(NonFiniteDistance):
        classical_distance("wasserstein", Gaussian(0, 1), cauchy)


def test_kolmogorov_of_scale_change():
    # cdf gap of N(0,1) vs N(0,4) peaks where the densities cross, x^2 = 8 ln 2 / 3
    x = math.sqrt(8 * math.log(2) / 3)
    want = Phi(x) - Phi(x / 2)
    assert abs(classical_distance("kol", Gaussian(0, 1), Gaussian(0, 4)) - want) < 1e-12


def test_sup_distance_of_unit_shift():
    # |phi(x) - phi(x - 1)| peaks left of 0, not at the crossing
    gap = lambda x: -abs(stats.norm.pdf(x) - stats.norm.pdf(x - 1))
    best = minimize_scalar(gap, bounds=(-2, 0.5), method="bounded", options={"xatol": 1e-12})
    assert abs(classical_distance("sup", Gaussian(0, 1), Gaussian(1, 1)) + best.fun) < 1e-10
    assert abs(-best.fun - 0.222943) < 1e-6


def test_unknown_metric():
    with pytest.raises(InvalidParams):
        classical_distance("hellinger", Gaussian(0, 1), Gaussian(1, 1))


@pytest.mark.parametrize("p", [Gaussian(0.3, 2.0), Exponential(1.5), Beta(2, 3), laplace(), Logistic(0, 1)], ids=repr)
def test_distances_vanish_for_identical_laws(p):
    for m in ("tv", "kolmogorov", "wasserstein", "l1", "sup"):
        assert classical_distance(m, p, p) <= 1e-9
    assert kl_divergence(p, p) <= 1e-9
    assert generalized_fisher_distance(p, p) <= 1e-9


def test_kl_oracles():
    assert abs(kl_divergence(Gaussian(0, 1), Gaussian(1, 1)) - 0.5) < 1e-10
    assert kl_divergence(Exponential(1.0), Gaussian(0, 1)) == math.inf


def test_fisher_information_oracles():
    assert abs(fisher_information(Gaussian(0.4, 2.5)) - 1 / 2.5) < 1e-10
    assert abs(fisher_information(Gaussian(0, 1)) - 1.0) < 1e-10
    assert abs(fisher_information(laplace()) - 1.0) < 1e-10


def test_fisher_information_cramer_rao():
    for q in (Logistic(0, 1), PowerExponential(4.0, 1.0), Beta(3, 4)):
        assert fisher_information(q) >= 1 / q.variance - 1e-6


def test_generalized_fisher_distance_oracles():
    assert abs(generalized_fisher_distance(Gaussian(0, 1), Gaussian(1, 1)) - 1.0) < 1e-10
    # score difference is -2 on (0, 1) and 0 elsewhere
    want = 4 * (0.5 - 0.5 * math.exp(-1))
    assert abs(want - 1.264241) < 1e-6
    assert abs(generalized_fisher_distance(laplace(), laplace(1.0)) - want) < 1e-9


def test_generalized_fisher_distance_support_precondition():
    with pytest.raises(SupportMismatch):
        generalized_fisher_distance(Exponential(1.0), Gaussian(0, 1))


@pytest.mark.parametrize("q,want", [
    (Gaussian(0, 1), (0.0, 1.0, 0.0, 0.0)),
    (Gaussian(1, 1), (1.0, 1.0, 1.0, 0.0)),
    (Gaussian(0, 4), (2.25, 0.25, 3.0, -0.75)),
], ids=repr)
def test_gaussian_decomposition_examples(q, want):
    ff = gaussian_decomposition(0.0, 1.0, q)
    assert np.allclose((ff.J, ff.I, ff.Psi, ff.Gamma), want, atol=1e-9)


def test_decomposition_holds_for_non_gaussian_q():
    for q in (PowerExponential(4.0, 1.0), Logistic(0.5, 0.7), laplace(0.3)):
        ff = gaussian_decomposition(0.2, 1.3, q)
        assert abs(ff.J - (ff.Gamma + ff.Psi)) < 1e-8


def test_decomposition_mismatch_is_reported():
    # an impossible check tolerance turns rounding differences into a mismatch
    with pytest.raises(DecompositionMismatch):
        gaussian_decomposition(0.0, 1.0, Logistic(0.3, 0.8), check_tol=-1.0)


def test_scale_mixture_examples():
    s, i = scale_mixture_fisher({1.0: 1.0})
    assert s == 1.0 and abs(i - 1.0) < 1e-10
    s, i = scale_mixture_fisher({0.9: 0.5, 1.1: 0.5})
    assert abs(s - (1 / 0.81 + 1 / 1.21) / 2) < 1e-15
    assert abs(s - 1.030507) < 1e-6
    assert i <= s + 1e-8
    s, i = scale_mixture_fisher([(2.0, 1.0)])
    assert s == 0.25 and abs(i - 0.25) < 1e-10


@pytest.mark.parametrize("bad", [{}, {0.0: 1.0}, {1.0: 0.4, 2.0: 0.4}, {1.0: 1.2, 2.0: -0.2}, "oops"])
def test_invalid_mixing(bad):
    with pytest.raises(InvalidMixing):
        parse_mixing(bad)


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(0.3, 3.0))
def test_metric_relations_for_gaussian_pairs(mu, var):
    p, q = Gaussian(0, 1), Gaussian(mu, var)
    tv = classical_distance("tv", p, q)
    assert tv == 0.5 * classical_distance("l1", p, q)
    assert classical_distance("kolmogorov", p, q) <= tv + 1e-12
    assert tv <= math.sqrt(kl_divergence(p, q) / 2) + 1e-9
    J = generalized_fisher_distance(p, q)
    assert classical_distance("l1", p, q) <= math.sqrt(2) * math.sqrt(J) + 1e-9


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(0.25, 4.0), st.floats(-2, 2), st.floats(0.25, 4.0))
def test_gaussian_fisher_distance_closed_form(mu0, var0, mu1, var1):
    J = generalized_fisher_distance(Gaussian(mu0, var0), Gaussian(mu1, var1))
    assert abs(J - gaussian_fisher_distance(mu0, var0, mu1, var1)) <= 1e-8 * max(1.0, J)
