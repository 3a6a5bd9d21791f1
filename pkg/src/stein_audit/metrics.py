"""Classical probability metrics and Fisher-type functionals between two densities."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

from .densities import DensityModel, Gaussian, GaussianScaleMixture
from .errors import (DecompositionMismatch, InvalidMixing, InvalidParams, NonFiniteDistance, NonFiniteEvaluation,
                     NonFiniteMoments)
from .quadrature import Interval, Tolerances, expectation, integrate, supremum
from .stein import check_support_inclusion, score_difference

METRIC_TOL = Tolerances(abs_tol=1e-12, rel_tol=1e-10, max_panels=4096)
METRICS = ("tv", "kolmogorov", "wasserstein", "l1", "sup")
_ALIASES = {"kol": "kolmogorov", "wass": "wasserstein", "w1": "wasserstein"}


# ---------------------------------------------------------------------------
# helpers shared by the metrics

def _one(fn, x: float) -> float:
    return float(np.asarray(fn(np.array([x], dtype=float)))[0])


def _cdf(p: DensityModel, x: float) -> float:
    if x == -math.inf or x <= p.support.lower:
        return 0.0
    if x == math.inf or x >= p.support.upper:
        return 1.0
    return _one(p.cdf, x)


def _sf(p: DensityModel, x: float) -> float:
    if x == math.inf or x >= p.support.upper:
        return 0.0
    if x == -math.inf or x <= p.support.lower:
        return 1.0
    return _one(p.sf, x)


def _cdf_gap(p: DensityModel, q: DensityModel, x: float) -> float:
    """P(x) - Q(x), via survival functions on the right of both medians."""
    if x > max(p.median, q.median):
        return _sf(q, x) - _sf(p, x)
    return _cdf(p, x) - _cdf(q, x)


def _cdf_gap_array(p: DensityModel, q: DensityModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    right = x > max(p.median, q.median)
    with np.errstate(invalid="ignore"):
        out = np.where(right, q.sf(x) - p.sf(x), p.cdf(x) - q.cdf(x))
    return out


def _mass(p: DensityModel, u: float, v: float) -> float:
    if v <= p.median:
        return _cdf(p, v) - _cdf(p, u)
    return _sf(p, u) - _sf(p, v)


def union_window(p: DensityModel, q: DensityModel, eps: float = 1e-16) -> tuple[float, float]:
    """Smallest interval outside which both densities are below eps times their peaks."""
    a, b = p.window(eps)
    c, d = q.window(eps)
    return min(a, c), max(b, d)


def hull(p: DensityModel, q: DensityModel) -> Interval:
    return p.support.hull(q.support)


def breakpoints(p: DensityModel, q: DensityModel) -> list[float]:
    """Finite support ends and kinks of either density."""
    pts = {p.support.lower, p.support.upper, q.support.lower, q.support.upper, *p.kink_points, *q.kink_points}
    return sorted(float(v) for v in pts if math.isfinite(v))


def _grid(p: DensityModel, q: DensityModel, n: int) -> np.ndarray:
    lo, hi = union_window(p, q)
    u = np.linspace(1e-4, 1 - 1e-4, 201)
    pieces = [np.linspace(lo, hi, n), p.ppf(u), q.ppf(u), np.array(breakpoints(p, q))]
    g = np.unique(np.concatenate(pieces))
    return g[np.isfinite(g)]


def _log_gap(p: DensityModel, q: DensityModel, x):
    """A finite, sign-faithful transform of log p - log q (zero where both vanish)."""
    with np.errstate(invalid="ignore"):
        d = np.arctan(p.log_pdf(x) - q.log_pdf(x))
    return np.nan_to_num(d, nan=0.0)


def _roots(fn, grid: np.ndarray, avoid: Sequence[float]) -> list[float]:
    vals = fn(grid)
    roots = []
    avoid = set(avoid)
    for i in np.flatnonzero(vals[:-1] * vals[1:] < 0):
        lo, hi = float(grid[i]), float(grid[i + 1])
        if lo in avoid or hi in avoid:
            # a jump of a density at a support end is not a crossing; look inside only
            w = hi - lo
            lo2, hi2 = lo + 1e-9 * w, hi - 1e-9 * w
            f_lo, f_hi = _one(fn, lo2), _one(fn, hi2)
            if f_lo * f_hi >= 0:
                continue
            lo, hi = lo2, hi2
        roots.append(brentq(lambda t: _one(fn, t), lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps))
    # exact zeros count only where the sign changes across them (not on flat zero stretches)
    for i in np.flatnonzero(vals[1:-1] == 0) + 1:
        if vals[i - 1] * vals[i + 1] < 0:
            roots.append(float(grid[i]))
    return sorted(set(roots))


def density_crossings(p: DensityModel, q: DensityModel, n: int = 4001) -> list[float]:
    """Points where p - q changes sign (stationary points of P - Q)."""
    bps = breakpoints(p, q)
    return _roots(lambda x: _log_gap(p, q, x), _grid(p, q, n), bps)


# ---------------------------------------------------------------------------
# classical distances

def l1_distance(p: DensityModel, q: DensityModel) -> float:
    """int |p - q|, summed from exact masses between consecutive sign changes of p - q."""
    cuts = sorted(set(density_crossings(p, q)) | set(breakpoints(p, q)))
    edges = [-math.inf, *cuts, math.inf]
    return float(sum(abs(_mass(p, u, v) - _mass(q, u, v)) for u, v in zip(edges[:-1], edges[1:]) if u < v))


def kolmogorov_distance(p: DensityModel, q: DensityModel) -> float:
    lo, hi = union_window(p, q)
    cands = [*density_crossings(p, q), *breakpoints(p, q), lo, hi]
    return float(max(abs(_cdf_gap(p, q, z)) for z in cands))


def wasserstein_distance(p: DensityModel, q: DensityModel, tol: Tolerances = METRIC_TOL) -> float:
    """int |P - Q| dx; requires finite first moments."""
    try:
        means = (p.mean, q.mean)
    except NonFiniteMoments as exc:
        raise NonFiniteDistance(f"wasserstein distance needs finite means: {exc}") from None
    if not all(math.isfinite(m) for m in means):
        raise NonFiniteDistance("wasserstein distance needs finite means")
    dom = hull(p, q)
    bps = breakpoints(p, q)
    grid = _grid(p, q, 2001)
    gap = lambda x: _cdf_gap_array(p, q, x)
    cuts = _roots(gap, grid, ())
    res = integrate(lambda x: np.abs(gap(x)), dom, tol, points=[*cuts, *bps],
                    center=0.5 * (p.median + q.median), scale=max(p.scale, q.scale))
    if not res.converged or not math.isfinite(res.value):
        raise NonFiniteDistance(f"wasserstein integral did not converge ({res.value})")
    return res.value


def sup_distance(p: DensityModel, q: DensityModel) -> float:
    """sup_x |p(x) - q(x)|."""
    if not (math.isfinite(p.log_peak) and math.isfinite(q.log_peak)):
        return math.inf
    dom = hull(p, q)
    bps = breakpoints(p, q)
    extra = [v for b in bps for v in (b, b + 1e-12 * max(1.0, abs(b)), b - 1e-12 * max(1.0, abs(b)))]
    lo, hi = union_window(p, q)
    res = supremum(lambda x: np.abs(p.pdf(x) - q.pdf(x)), dom, 2001, window=(lo, hi), points=extra, refine=4)
    return res.sup


def classical_distance(metric: str, p: DensityModel, q: DensityModel, tol: Tolerances = METRIC_TOL) -> float:
    """One of tv, kolmogorov (kol), wasserstein (wass), l1, sup."""
    m = _ALIASES.get(metric, metric)
    if m == "tv":
        return 0.5 * l1_distance(p, q)
    if m == "l1":
        return l1_distance(p, q)
    if m == "kolmogorov":
        return kolmogorov_distance(p, q)
    if m == "wasserstein":
        return wasserstein_distance(p, q, tol)
    if m == "sup":
        return sup_distance(p, q)
    raise InvalidParams(f"unknown metric {metric!r}; known: {METRICS}")


# ---------------------------------------------------------------------------
# information functionals

def kl_divergence(p: DensityModel, q: DensityModel, tol: Tolerances = METRIC_TOL) -> float:
    """E_q[log(q/p)]; +inf when the support of q is not inside that of p."""
    if not q.support.issubset(p.support):
        return math.inf
    try:
        res = expectation(q, lambda x: q.log_pdf(x) - p.log_pdf(x), tol, points=p.kink_points)
    except NonFiniteEvaluation:
        return math.inf
    if not res.converged:
        return math.inf
    return max(res.value, 0.0)


def _square_mean(q: DensityModel, fn, tol: Tolerances, points=()) -> float:
    try:
        res = expectation(q, lambda x: fn(x) ** 2, tol, points=points)
    except NonFiniteEvaluation:
        return math.inf
    if not res.converged or not math.isfinite(res.value):
        return math.inf
    return res.value


def fisher_information(q: DensityModel, tol: Tolerances = METRIC_TOL) -> float:
    """E_q[(q'/q)^2]; +inf when the quadrature diverges."""
    return _square_mean(q, q.score, tol)


def generalized_fisher_distance(p: DensityModel, q: DensityModel, tol: Tolerances = METRIC_TOL) -> float:
    """J(p, q) = E_q[(p'/p - q'/q)^2]; +inf when the quadrature diverges."""
    check_support_inclusion(p, q)
    return _square_mean(q, lambda x: score_difference(p, q, x), tol, points=p.kink_points)


def gaussian_fisher_distance(mu0: float, var0: float, mu1: float, var1: float) -> float:
    """Closed form of J between a Gaussian target (mu0, var0) and a Gaussian q (mu1, var1)."""
    return var1 * (1.0 / var1 - 1.0 / var0) ** 2 + (mu1 - mu0) ** 2 / var0 ** 2


@dataclass(frozen=True)
class FisherFunctionals:
    J: float
    I: float
    Psi: float
    Gamma: float


def gaussian_decomposition(mu0: float, var0: float, q: DensityModel, tol: Tolerances = METRIC_TOL,
                           check_tol: float = 1e-8) -> FisherFunctionals:
    """J against a Gaussian target split as the Cramer-Rao excess plus a moment penalty.

    Psi = (mu - mu0)^2 / var0^2 + (var / var0 - 1) / var0 and Gamma = I - 1/var0.
    Raises :class:`DecompositionMismatch` when quadrature J and Gamma + Psi differ.
    """
    if not var0 > 0:
        raise InvalidParams(f"target variance must be positive, got {var0}")
    mu, var = q.mean, q.variance
    if not (math.isfinite(mu) and math.isfinite(var)):
        raise NonFiniteMoments(f"{q!r} has non-finite moments")
    info = fisher_information(q, tol)
    psi = (mu - mu0) ** 2 / var0 ** 2 + (var / var0 - 1.0) / var0
    gamma = info - 1.0 / var0
    J = generalized_fisher_distance(Gaussian(mu0, var0), q, tol)
    if math.isfinite(J) and math.isfinite(info):
        if abs(J - (gamma + psi)) > check_tol * max(1.0, abs(J)):
            raise DecompositionMismatch(f"J={J!r} but Gamma+Psi={gamma + psi!r}")
    return FisherFunctionals(J, info, psi, gamma)


# ---------------------------------------------------------------------------
# Gaussian scale mixtures

def parse_mixing(mixing) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Accept {value: prob}, {"values": [...], "probs": [...]}, or a sequence of (value, prob)."""
    try:
        if isinstance(mixing, Mapping) and "values" in mixing:
            vals, probs = list(mixing["values"]), list(mixing.get("probs", mixing.get("weights")))
        elif isinstance(mixing, Mapping):
            vals, probs = list(mixing.keys()), list(mixing.values())
        else:
            vals, probs = zip(*mixing)
        vals = tuple(float(v) for v in vals)
        probs = tuple(float(w) for w in probs)
    except (TypeError, ValueError) as exc:
        raise InvalidMixing(f"cannot read mixing distribution: {exc}") from None
    if not vals or len(vals) != len(probs):
        raise InvalidMixing("mixing distribution needs matching nonempty values and probabilities")
    if any(not (v > 0 and math.isfinite(v)) for v in vals):
        raise InvalidMixing(f"mixing values must be positive and finite, got {vals}")
    if any(w < 0 for w in probs) or abs(sum(probs) - 1.0) > 1e-12:
        raise InvalidMixing(f"mixing probabilities must be nonnegative and sum to 1, got {probs}")
    return vals, probs


def mixture_density(mixing) -> GaussianScaleMixture:
    vals, probs = parse_mixing(mixing)
    return GaussianScaleMixture(vals, probs)


def scale_mixture_fisher(mixing, tol: Tolerances = METRIC_TOL) -> tuple[float, float]:
    """(E[1/Y^2], Fisher information of the law of Y Z)."""
    vals, probs = parse_mixing(mixing)
    surrogate = float(sum(w / v ** 2 for v, w in zip(vals, probs)))
    return surrogate, fisher_information(GaussianScaleMixture(vals, probs), tol)
