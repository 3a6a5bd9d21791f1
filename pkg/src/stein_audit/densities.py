"""Univariate density models with interval support.

Every model exposes vectorized ``pdf``, ``log_pdf``, ``score`` (p'/p, zero off
the support), ``cdf``/``sf`` and their logarithms, a quantile function and
the metadata the integrators need (``center``, ``scale``, kink points,
whether the endpoints carry integrable singularities).  Models are frozen;
moments that have no closed form are computed once by quadrature and cached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping

import numpy as np
from scipy import special
from scipy.optimize import brentq

from .errors import InvalidParams, NonFiniteMoments
from .quadrature import REAL_LINE, DEFAULT_TOL, Interval, Tolerances, expectation, integrate

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _arr(x):
    return np.asarray(x, dtype=float)


def _log_upper_gamma_reg(s, y):
    """log Q(s, y), the regularized upper incomplete gamma, without underflow."""
    y = _arr(y)
    with np.errstate(divide="ignore"):
        direct = np.log(special.gammaincc(s, y))
    # asymptotic series for very large y, where gammaincc underflows
    big = ~np.isfinite(direct) & (y > 0)
    if np.any(big):
        yb = y[big]
        series = 1.0 + (s - 1.0) / yb + (s - 1.0) * (s - 2.0) / yb**2 + (s - 1.0) * (s - 2.0) * (s - 3.0) / yb**3
        direct = np.array(direct, dtype=float)
        direct[big] = (s - 1.0) * np.log(yb) - yb + np.log(series) - special.gammaln(s)
    return direct


class DensityModel:
    """Base class; subclasses are frozen dataclasses."""

    family: str = "abstract"
    support: Interval = REAL_LINE

    # -- to be provided by subclasses -------------------------------------
    def log_pdf(self, x):
        raise NotImplementedError

    def score(self, x):
        raise NotImplementedError

    @property
    def params(self) -> dict:
        raise NotImplementedError

    @property
    def mode(self) -> float:
        raise NotImplementedError

    @property
    def scale(self) -> float:
        """A characteristic length used by the tail maps and probe grids."""
        return 1.0

    # -- defaults ----------------------------------------------------------
    kink_points: tuple = ()
    singular_endpoints: bool = False

    @property
    def piecewise_G(self) -> bool:
        return bool(self.kink_points)

    @property
    def center(self) -> float:
        return self.mode

    @cached_property
    def log_peak(self) -> float:
        return float(self.log_pdf(np.array([self.mode]))[0])

    def pdf(self, x):
        x = _arr(x)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = np.exp(self.log_pdf(x))
        return np.where(self.support.contains(x), out, 0.0)

    def cdf(self, x):
        x = _arr(x)
        lo = self.support.lower
        out = np.empty(x.shape)
        for i, xi in np.ndenumerate(x):
            if xi <= lo:
                out[i] = 0.0
            elif xi >= self.support.upper:
                out[i] = 1.0
            else:
                out[i] = integrate(self.pdf, Interval(lo, xi), scale=self.scale,
                                   points=self.kink_points, singular=self.singular_endpoints).value
        return np.clip(out, 0.0, 1.0)

    def sf(self, x):
        return 1.0 - self.cdf(x)

    def log_cdf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self.cdf(x))

    def log_sf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self.sf(x))

    def ppf(self, u):
        u = _arr(u)
        out = np.empty(u.shape)
        lo, hi = self.window(1e-300)
        for i, ui in np.ndenumerate(u):
            out[i] = brentq(lambda t: float(self.cdf(t)) - ui, lo, hi, xtol=1e-14)
        return out

    @cached_property
    def median(self) -> float:
        return float(self.ppf(0.5))

    @cached_property
    def _moments(self):
        m1 = expectation(self, lambda x: x)
        if not m1.converged:
            raise NonFiniteMoments(f"mean of {self!r} did not converge")
        mu = m1.value
        m2 = expectation(self, lambda x: (x - mu) ** 2)
        if not m2.converged:
            raise NonFiniteMoments(f"variance of {self!r} did not converge")
        return mu, m2.value

    @property
    def mean(self) -> float:
        return self._moments[0]

    @property
    def variance(self) -> float:
        return self._moments[1]

    def window(self, eps: float = 1e-16) -> tuple[float, float]:
        """Interval on which pdf >= eps * peak (support ends where finite)."""
        target = self.log_peak + math.log(eps)
        m = self.mode
        out = []
        for side, bound in ((-1.0, self.support.lower), (1.0, self.support.upper)):
            if math.isfinite(bound):
                out.append(bound)
                continue
            step = self.scale
            x_in = m
            x_out = m + side * step
            while float(self.log_pdf(np.array([x_out]))[0]) > target:
                x_in = x_out
                step *= 2.0
                x_out = m + side * step
            out.append(brentq(lambda t: float(self.log_pdf(np.array([t]))[0]) - target,
                              min(x_in, x_out), max(x_in, x_out), xtol=1e-12 * self.scale))
        return out[0], out[1]

    def describe(self) -> dict:
        return {"family": self.family, "params": dict(self.params)}

    def __repr__(self):
        inner = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{self.family}({inner})"


@dataclass(frozen=True, repr=False)
class Gaussian(DensityModel):
    mu: float = 0.0
    var: float = 1.0
    family = "gaussian"

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.var > 0 and math.isfinite(self.var)):
            raise InvalidParams(f"gaussian needs finite mu and var > 0, got mu={self.mu}, var={self.var}")

    @property
    def sigma(self):
        return math.sqrt(self.var)

    @property
    def params(self):
        return {"mu": self.mu, "var": self.var}

    @property
    def mode(self):
        return self.mu

    @property
    def scale(self):
        return self.sigma

    @property
    def mean(self):
        return self.mu

    @property
    def variance(self):
        return self.var

    @property
    def median(self):
        return self.mu

    def _z(self, x):
        return (_arr(x) - self.mu) / self.sigma

    def log_pdf(self, x):
        z = self._z(x)
        return -0.5 * z * z - _LOG_SQRT_2PI - 0.5 * math.log(self.var)

    def score(self, x):
        return -(_arr(x) - self.mu) / self.var

    def cdf(self, x):
        return special.ndtr(self._z(x))

    def sf(self, x):
        return special.ndtr(-self._z(x))

    def log_cdf(self, x):
        return special.log_ndtr(self._z(x))

    def log_sf(self, x):
        return special.log_ndtr(-self._z(x))

    def ppf(self, u):
        return self.mu + self.sigma * special.ndtri(_arr(u))


@dataclass(frozen=True, repr=False)
class Exponential(DensityModel):
    rate: float = 1.0
    family = "exponential"
    support = Interval(0.0, math.inf, lower_open=False)

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise InvalidParams(f"exponential needs rate > 0, got {self.rate}")

    @property
    def params(self):
        return {"rate": self.rate}

    @property
    def mode(self):
        return 0.0

    @property
    def center(self):
        return 0.0

    @property
    def scale(self):
        return 1.0 / self.rate

    @property
    def mean(self):
        return 1.0 / self.rate

    @property
    def variance(self):
        return 1.0 / self.rate**2

    @property
    def median(self):
        return math.log(2.0) / self.rate

    def log_pdf(self, x):
        x = _arr(x)
        with np.errstate(divide="ignore"):
            return np.where(x >= 0, math.log(self.rate) - self.rate * x, -np.inf)

    def score(self, x):
        return np.where(_arr(x) >= 0, -self.rate, 0.0)

    def cdf(self, x):
        return -np.expm1(-self.rate * np.maximum(_arr(x), 0.0))

    def sf(self, x):
        return np.exp(-self.rate * np.maximum(_arr(x), 0.0))

    def log_cdf(self, x):
        x = _arr(x)
        with np.errstate(divide="ignore"):
            return np.where(x > 0, np.log(-np.expm1(-self.rate * np.maximum(x, 0.0))), -np.inf)

    def log_sf(self, x):
        return -self.rate * np.maximum(_arr(x), 0.0)

    def ppf(self, u):
        return -np.log1p(-_arr(u)) / self.rate


@dataclass(frozen=True, repr=False)
class Beta(DensityModel):
    a: float = 2.0
    b: float = 3.0
    family = "beta"
    support = Interval(0.0, 1.0)

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and math.isfinite(self.a) and math.isfinite(self.b)):
            raise InvalidParams(f"beta needs a, b > 0, got a={self.a}, b={self.b}")

    @property
    def params(self):
        return {"a": self.a, "b": self.b}

    @property
    def singular_endpoints(self):
        # the sin^2 map also smooths non-integer powers at the ends
        return True

    @property
    def mode(self):
        if self.a > 1 and self.b > 1:
            return (self.a - 1) / (self.a + self.b - 2)
        return 0.5

    @property
    def scale(self):
        return math.sqrt(self.variance)

    @property
    def mean(self):
        return self.a / (self.a + self.b)

    @property
    def variance(self):
        s = self.a + self.b
        return self.a * self.b / (s * s * (s + 1))

    @cached_property
    def log_peak(self):
        if self.a < 1 or self.b < 1:
            return math.inf
        return float(self.log_pdf(np.array([self.mode]))[0])

    def log_pdf(self, x):
        x = _arr(x)
        inside = (x > 0) & (x < 1)
        xs = np.where(inside, x, 0.5)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = special.xlogy(self.a - 1, xs) + special.xlog1py(self.b - 1, -xs) - special.betaln(self.a, self.b)
        return np.where(inside, val, -np.inf)

    def score(self, x):
        x = _arr(x)
        inside = (x > 0) & (x < 1)
        xs = np.where(inside, x, 0.5)
        with np.errstate(over="ignore", divide="ignore"):
            return np.where(inside, (self.a - 1) / xs - (self.b - 1) / (1 - xs), 0.0)

    def cdf(self, x):
        return special.betainc(self.a, self.b, np.clip(_arr(x), 0.0, 1.0))

    def sf(self, x):
        return special.betainc(self.b, self.a, np.clip(1.0 - _arr(x), 0.0, 1.0))

    def ppf(self, u):
        return special.betaincinv(self.a, self.b, _arr(u))

    def window(self, eps=1e-16):
        return 0.0, 1.0


SUPPORT_KINDS = ("full_line", "positive_half", "negative_half")


@dataclass(frozen=True, repr=False)
class PowerExponential(DensityModel):
    """c * exp(-d |x - loc|^alpha) on a scale-invariant set (shifted by ``loc``).

    ``loc`` is zero for every target; nonzero values serve as comparison
    densities (e.g. a shifted Laplace law).
    """

    alpha: float = 2.0
    d: float = 0.5
    support_kind: str = "full_line"
    loc: float = 0.0
    family = "power_exponential"

    def __post_init__(self):
        if not (self.alpha >= 1 and math.isfinite(self.alpha)):
            raise InvalidParams(f"power_exponential needs alpha >= 1, got {self.alpha}")
        if not (self.d > 0 and math.isfinite(self.d)):
            raise InvalidParams(f"power_exponential needs d > 0, got {self.d}")
        if self.support_kind not in SUPPORT_KINDS:
            raise InvalidParams(f"support_kind must be one of {SUPPORT_KINDS}, got {self.support_kind!r}")
        if not math.isfinite(self.loc):
            raise InvalidParams("loc must be finite")
        if self.support_kind == "full_line":
            sup = REAL_LINE
        elif self.support_kind == "positive_half":
            sup = Interval(self.loc, math.inf, lower_open=False)
        else:
            sup = Interval(-math.inf, self.loc, upper_open=False)
        object.__setattr__(self, "support", sup)
        # closed form cross-checked against quadrature of the unnormalized kernel
        c_quad = 1.0 / integrate(lambda x: np.exp(-self.d * np.abs(x - self.loc) ** self.alpha), sup,
                                 Tolerances(abs_tol=1e-14, rel_tol=1e-12), center=self.loc, scale=self.scale,
                                 points=self.kink_points).value
        if abs(c_quad / self.c - 1.0) > 1e-10:
            raise ArithmeticError(f"normalizing constant mismatch: closed {self.c!r} vs quadrature {c_quad!r}")

    @property
    def params(self):
        out = {"alpha": self.alpha, "d": self.d, "support_kind": self.support_kind}
        if self.loc != 0.0:
            out["loc"] = self.loc
        return out

    @property
    def c(self) -> float:
        half = self.alpha * self.d ** (1.0 / self.alpha) / math.gamma(1.0 / self.alpha)
        return 0.5 * half if self.support_kind == "full_line" else half

    @property
    def kink_points(self):
        if self.alpha == 1 and self.support_kind == "full_line":
            return (self.loc,)
        return ()

    @property
    def mode(self):
        return self.loc

    @property
    def scale(self):
        return self.d ** (-1.0 / self.alpha)

    @property
    def log_peak(self):
        return math.log(self.c)

    @property
    def median(self):
        if self.support_kind == "full_line":
            return self.loc
        return float(self.ppf(0.5))

    @cached_property
    def _moments(self):
        a = self.alpha
        s = self.d ** (-1.0 / a)
        g1 = math.gamma(1.0 / a)
        m1 = s * math.gamma(2.0 / a) / g1
        m2 = s * s * math.gamma(3.0 / a) / g1
        if self.support_kind == "full_line":
            return self.loc, m2
        sign = 1.0 if self.support_kind == "positive_half" else -1.0
        return self.loc + sign * m1, m2 - m1 * m1

    def _u(self, x):
        return _arr(x) - self.loc

    def log_pdf(self, x):
        u = self._u(x)
        val = math.log(self.c) - self.d * np.abs(u) ** self.alpha
        return np.where(self.support.contains(x), val, -np.inf)

    def score(self, x):
        u = self._u(x)
        a = self.alpha
        # right-limit convention at the kink: sign(0) taken as +1
        sgn = np.where(u >= 0, 1.0, -1.0)
        if self.support_kind == "negative_half":
            sgn = np.where(u > 0, 1.0, -1.0)
        val = -self.d * a * np.abs(u) ** (a - 1.0) * sgn
        return np.where(self.support.contains(x), val, 0.0)

    def _tails(self, x):
        """(lower tail mass, upper tail mass) of |u| beyond the point, as logs."""
        u = self._u(x)
        y = self.d * np.abs(u) ** self.alpha
        s = 1.0 / self.alpha
        with np.errstate(divide="ignore"):
            log_q = _log_upper_gamma_reg(s, y)          # mass beyond |u| on one side, normalized per side
            log_p = np.log(special.gammainc(s, y))      # mass between 0 and |u|
        return u, log_q, log_p

    def log_cdf(self, x):
        u, log_q, log_p = self._tails(x)
        kind = self.support_kind
        with np.errstate(divide="ignore"):
            if kind == "full_line":
                # u<0: Q/2 ; u>=0: 1 - Q/2
                return np.where(u < 0, log_q - math.log(2.0), np.log1p(-0.5 * np.exp(log_q)))
            if kind == "positive_half":
                return np.where(u <= 0, -np.inf, log_p)
            return np.where(u >= 0, 0.0, log_q)

    def log_sf(self, x):
        u, log_q, log_p = self._tails(x)
        kind = self.support_kind
        with np.errstate(divide="ignore"):
            if kind == "full_line":
                return np.where(u > 0, log_q - math.log(2.0), np.log1p(-0.5 * np.exp(log_q)))
            if kind == "positive_half":
                return np.where(u <= 0, 0.0, log_q)
            return np.where(u >= 0, -np.inf, log_p)

    def cdf(self, x):
        return np.exp(self.log_cdf(x))

    def sf(self, x):
        return np.exp(self.log_sf(x))

    def ppf(self, u):
        u = _arr(u)
        s = 1.0 / self.alpha
        sc = self.scale
        kind = self.support_kind
        if kind == "full_line":
            tail = np.where(u < 0.5, 2.0 * u, 2.0 * (1.0 - u))
            r = sc * special.gammainccinv(s, tail) ** s
            return self.loc + np.where(u < 0.5, -r, r)
        if kind == "positive_half":
            return self.loc + sc * special.gammaincinv(s, u) ** s
        return self.loc - sc * special.gammainccinv(s, u) ** s


@dataclass(frozen=True, repr=False)
class Logistic(DensityModel):
    loc: float = 0.0
    s: float = 1.0
    family = "logistic"

    def __post_init__(self):
        if not (self.s > 0 and math.isfinite(self.s) and math.isfinite(self.loc)):
            raise InvalidParams(f"logistic needs finite loc and s > 0, got loc={self.loc}, s={self.s}")

    @property
    def params(self):
        return {"loc": self.loc, "s": self.s}

    @property
    def mode(self):
        return self.loc

    @property
    def median(self):
        return self.loc

    @property
    def scale(self):
        return self.s

    @property
    def mean(self):
        return self.loc

    @property
    def variance(self):
        return (math.pi * self.s) ** 2 / 3.0

    def log_pdf(self, x):
        z = np.abs((_arr(x) - self.loc) / self.s)
        return -z - 2.0 * np.log1p(np.exp(-z)) - math.log(self.s)

    def score(self, x):
        return -np.tanh(0.5 * (_arr(x) - self.loc) / self.s) / self.s

    def cdf(self, x):
        return special.expit((_arr(x) - self.loc) / self.s)

    def sf(self, x):
        return special.expit(-(_arr(x) - self.loc) / self.s)

    def log_cdf(self, x):
        return special.log_expit((_arr(x) - self.loc) / self.s)

    def log_sf(self, x):
        return special.log_expit(-(_arr(x) - self.loc) / self.s)

    def ppf(self, u):
        return self.loc + self.s * special.logit(_arr(u))


@dataclass(frozen=True, repr=False)
class GaussianScaleMixture(DensityModel):
    """Law of Y * Z with Z standard normal and Y discrete, positive, independent."""

    scales: tuple = (1.0,)
    weights: tuple = (1.0,)
    family = "scale_mixture"

    def __post_init__(self):
        sc = tuple(float(v) for v in self.scales)
        w = tuple(float(v) for v in self.weights)
        if len(sc) == 0 or len(sc) != len(w):
            raise InvalidParams("scales and weights must be nonempty and of equal length")
        if any(not (v > 0 and math.isfinite(v)) for v in sc):
            raise InvalidParams(f"mixing values must be positive, got {sc}")
        if any(v < 0 for v in w) or abs(sum(w) - 1.0) > 1e-12:
            raise InvalidParams(f"mixing weights must be nonnegative and sum to 1, got {w}")
        object.__setattr__(self, "scales", sc)
        object.__setattr__(self, "weights", w)

    @property
    def params(self):
        return {"scales": list(self.scales), "weights": list(self.weights)}

    @property
    def mode(self):
        return 0.0

    @property
    def median(self):
        return 0.0

    @property
    def scale(self):
        return math.sqrt(self.variance)

    @property
    def mean(self):
        return 0.0

    @property
    def variance(self):
        return float(sum(w * s * s for s, w in zip(self.scales, self.weights)))

    def _component_logs(self, x):
        x = _arr(x)[..., None]
        sc = np.array(self.scales)
        with np.errstate(divide="ignore"):
            lw = np.log(np.array(self.weights))
        return lw - 0.5 * (x / sc) ** 2 - np.log(sc) - _LOG_SQRT_2PI

    def log_pdf(self, x):
        return special.logsumexp(self._component_logs(x), axis=-1)

    def score(self, x):
        comp = self._component_logs(x)
        post = np.exp(comp - special.logsumexp(comp, axis=-1, keepdims=True))
        return -_arr(x) * (post / np.array(self.scales) ** 2).sum(axis=-1)

    def cdf(self, x):
        return sum(w * special.ndtr(_arr(x) / s) for s, w in zip(self.scales, self.weights))

    def sf(self, x):
        return sum(w * special.ndtr(-_arr(x) / s) for s, w in zip(self.scales, self.weights))

    def log_cdf(self, x):
        with np.errstate(divide="ignore"):
            lw = np.log(np.array(self.weights))
        terms = lw + special.log_ndtr(_arr(x)[..., None] / np.array(self.scales))
        return special.logsumexp(terms, axis=-1)

    def log_sf(self, x):
        return self.log_cdf(-_arr(x))

    def ppf(self, u):
        u = _arr(u)
        out = np.empty(u.shape)
        hi = 40.0 * max(self.scales)
        for i, ui in np.ndenumerate(u):
            out[i] = brentq(lambda t: float(self.cdf(t)) - ui, -hi, hi, xtol=1e-14)
        return out


@dataclass(frozen=True, repr=False, eq=False)
class CallableDensity(DensityModel):
    """A density given directly by callables; cdf and moments fall back to quadrature."""

    log_pdf_fn: Callable = None
    score_fn: Callable = None
    support: Interval = REAL_LINE
    mode_at: float = 0.0
    length: float = 1.0
    kinks: tuple = ()
    name: str = "custom"
    family = "custom"

    @property
    def params(self):
        return {"name": self.name}

    @property
    def mode(self):
        return self.mode_at

    @property
    def scale(self):
        return self.length

    @property
    def kink_points(self):
        return tuple(self.kinks)

    def log_pdf(self, x):
        x = _arr(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.asarray(self.log_pdf_fn(x), dtype=float)
        return np.where(self.support.contains(x), val, -np.inf)

    def score(self, x):
        x = _arr(x)
        return np.where(self.support.contains(x), np.asarray(self.score_fn(x), dtype=float), 0.0)


# ---------------------------------------------------------------------------
# construction and validation

FAMILIES: Mapping[str, dict] = {
    "gaussian": {"cls": Gaussian, "params": {"mu": "real", "var": "real > 0"}},
    "exponential": {"cls": Exponential, "params": {"rate": "real > 0"}},
    "beta": {"cls": Beta, "params": {"a": "real > 0", "b": "real > 0"}},
    "power_exponential": {"cls": PowerExponential,
                          "params": {"alpha": "real >= 1", "d": "real > 0",
                                     "support_kind": "full_line | positive_half | negative_half",
                                     "loc": "real (default 0; targets use 0)"}},
    "laplace": {"cls": None, "params": {"d": "real > 0 (default 1)", "loc": "real (default 0)"}},
    "logistic": {"cls": Logistic, "params": {"loc": "real", "s": "real > 0"}},
    "scale_mixture": {"cls": GaussianScaleMixture,
                      "params": {"scales": "list of reals > 0", "weights": "list summing to 1"}},
}


def make_density(family: str, **params) -> DensityModel:
    """Build a density model from a family id and its parameters."""
    if family not in FAMILIES:
        raise InvalidParams(f"unknown family {family!r}; known: {sorted(FAMILIES)}")
    try:
        if family == "laplace":
            return PowerExponential(alpha=1.0, d=float(params.pop("d", 1.0)), support_kind="full_line",
                                    loc=float(params.pop("loc", 0.0)), **params)
        if family == "scale_mixture":
            return GaussianScaleMixture(scales=tuple(params["scales"]), weights=tuple(params["weights"]))
        return FAMILIES[family]["cls"](**params)
    except TypeError as exc:
        raise InvalidParams(f"bad parameters for {family}: {exc}") from None
    except KeyError as exc:
        raise InvalidParams(f"missing parameter {exc} for {family}") from None


def score(p: DensityModel, x):
    return p.score(x)


def cdf(p: DensityModel, z):
    return p.cdf(z)


@dataclass(frozen=True)
class ClassGDiagnostics:
    normalization_defect: float
    positivity_violations: int
    score_mismatch: float
    kinks: tuple
    piecewise: bool
    probe_points: int = field(default=0, repr=False)

    @property
    def passed(self) -> bool:
        return self.normalization_defect <= 1e-9 and self.positivity_violations == 0 and self.score_mismatch <= 1e-6


def _probe_grid(p: DensityModel, n: int) -> np.ndarray:
    lo, hi = p.window(1e-12)
    lo = max(lo, p.support.lower)
    hi = min(hi, p.support.upper)
    grid = np.linspace(lo, hi, n + 2)[1:-1]
    return grid


def validate_class_G(p: DensityModel, n_probe: int = 200) -> ClassGDiagnostics:
    """Numerical check of interval support, differentiability and normalization."""
    mass = integrate(p.pdf, p.support, points=p.kink_points, center=p.center, scale=p.scale,
                     singular=p.singular_endpoints).value
    grid = _probe_grid(p, n_probe)
    positivity = int(np.count_nonzero(~(p.pdf(grid) > 0)))
    h = 1e-5 * p.scale
    room = np.minimum(grid - p.support.lower, p.support.upper - grid)
    ok = room > 4 * h
    for k in p.kink_points:
        ok &= np.abs(grid - k) > 4 * h
    g = grid[ok]
    # relative mismatch of d/dx log p, measured against the score's own size
    fd = (p.log_pdf(g + h) - p.log_pdf(g - h)) / (2 * h)
    sc = p.score(g)
    mismatch = float(np.max(np.abs(fd - sc) / np.maximum(1.0, np.abs(sc)))) if g.size else 0.0
    return ClassGDiagnostics(abs(mass - 1.0), positivity, mismatch, tuple(p.kink_points),
                             bool(p.kink_points), int(grid.size))
