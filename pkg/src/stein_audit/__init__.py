"""Stein operators, Stein-equation solutions, Fisher information distances and bound audits
for univariate densities."""

__version__ = "0.1.0"

from .bounds import (BoundReport, kappa_empirical, kappa_gaussian_lookup, kappa_power_exponential,
                     make_report, power_exponential_distance_bounds, gaussian_target_bounds, rms_bound_audit,
                     scale_mixture_tv_bound, sup_norm_constant)
from .densities import DensityModel, make_density, validate_class_G
from .metrics import (FisherFunctionals, classical_distance, fisher_information, gaussian_decomposition,
                      generalized_fisher_distance, kl_divergence, scale_mixture_fisher)
from .quadrature import Interval, QuadratureResult, Tolerances, expectation, integrate, supremum
from .stein import (SteinSolution, TestFunction, apply_operator, bounded_solution_zero_mean,
                    characterization_residual, check_membership_F, fundamental_identity_residual,
                    score_difference, solve_halfline_indicator, solve_stein_equation, stein_identity_residual)

__all__ = [
    "BoundReport", "DensityModel", "FisherFunctionals", "Interval", "QuadratureResult", "SteinSolution",
    "TestFunction", "Tolerances", "apply_operator", "bounded_solution_zero_mean", "characterization_residual",
    "check_membership_F", "classical_distance", "expectation", "fisher_information",
    "fundamental_identity_residual", "gaussian_decomposition", "gaussian_target_bounds",
    "generalized_fisher_distance", "integrate", "kappa_empirical", "kappa_gaussian_lookup",
    "kappa_power_exponential", "kl_divergence", "make_density", "make_report",
    "power_exponential_distance_bounds", "rms_bound_audit", "scale_mixture_fisher", "scale_mixture_tv_bound",
    "score_difference", "solve_halfline_indicator", "solve_stein_equation", "stein_identity_residual",
    "sup_norm_constant", "supremum", "validate_class_G",
]
