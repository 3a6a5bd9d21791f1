"""Catalogs of test functions and right-hand sides used by the checks."""

from __future__ import annotations

import math

import numpy as np

from .densities import DensityModel
from .stein import TestFunction

# (name, g, g') pairs of smooth functions with at most polynomial growth
_SMOOTH = [
    ("one", lambda x: np.ones_like(x), lambda x: np.zeros_like(x)),
    ("x", lambda x: x, lambda x: np.ones_like(x)),
    ("x^2", lambda x: x ** 2, lambda x: 2 * x),
    ("x^3", lambda x: x ** 3, lambda x: 3 * x ** 2),
    ("sin", np.sin, np.cos),
    ("cos", np.cos, lambda x: -np.sin(x)),
    ("sin2x", lambda x: np.sin(2 * x), lambda x: 2 * np.cos(2 * x)),
    ("cos3x", lambda x: np.cos(3 * x), lambda x: -3 * np.sin(3 * x)),
    ("tanh", np.tanh, lambda x: 1 - np.tanh(x) ** 2),
    ("tanh(x-1)", lambda x: np.tanh(x - 1), lambda x: 1 - np.tanh(x - 1) ** 2),
    ("atan", np.arctan, lambda x: 1 / (1 + x ** 2)),
    ("cauchy", lambda x: 1 / (1 + x ** 2), lambda x: -2 * x / (1 + x ** 2) ** 2),
    ("x/(1+x^2)", lambda x: x / (1 + x ** 2), lambda x: (1 - x ** 2) / (1 + x ** 2) ** 2),
    ("bump", lambda x: np.exp(-x ** 2 / 2), lambda x: -x * np.exp(-x ** 2 / 2)),
    ("log(1+x^2)", lambda x: np.log1p(x ** 2), lambda x: 2 * x / (1 + x ** 2)),
    ("x*sin", lambda x: x * np.sin(x), lambda x: np.sin(x) + x * np.cos(x)),
    ("sin*cos2x", lambda x: np.sin(x) * np.cos(2 * x),
     lambda x: np.cos(x) * np.cos(2 * x) - 2 * np.sin(x) * np.sin(2 * x)),
    ("logistic", lambda x: 1 / (1 + np.exp(-x)), lambda x: 0.25 / np.cosh(x / 2) ** 2),
    ("1+x-x^2/4", lambda x: 1 + x - x ** 2 / 4, lambda x: 1 - x / 2),
    ("sqrt(1+x^2)", lambda x: np.sqrt(1 + x ** 2), lambda x: x / np.sqrt(1 + x ** 2)),
]


def smooth_names() -> list[str]:
    return [name for name, _, _ in _SMOOTH]


def _endpoints(*densities: DensityModel) -> list[float]:
    ends = set()
    for p in densities:
        for e in (p.support.lower, p.support.upper):
            if math.isfinite(e):
                ends.add(float(e))
    return sorted(ends)


def member_test_functions(*densities: DensityModel, n: int = 20) -> list[TestFunction]:
    """Smooth functions times prod (x - e) over finite support ends, so f p vanishes there.

    The factor keeps f p zero at closed ends (e.g. the exponential at 0) and
    tames it at singular ends of Beta densities with parameters at least 1.
    """
    ends = _endpoints(*densities)

    def factor(x):
        out = np.ones_like(x)
        for e in ends:
            out = out * (x - e)
        return out

    def dfactor(x):
        total = np.zeros_like(x)
        for i in range(len(ends)):
            term = np.ones_like(x)
            for j, e in enumerate(ends):
                if j != i:
                    term = term * (x - e)
            total = total + term
        return total

    out = []
    for name, g, dg in _SMOOTH[:n]:
        out.append(TestFunction(
            lambda x, g=g: factor(x) * g(x),
            lambda x, g=g, dg=dg: dfactor(x) * g(x) + factor(x) * dg(x),
            name=name if not ends else f"{name}*boundary"))
    return out


def halfline_indicator(z: float) -> TestFunction:
    """l(x) = 1{x <= z}."""
    z = float(z)
    return TestFunction(lambda x: np.where(x <= z, 1.0, 0.0), kinks=(z,), name=f"halfline[{z!r}]",
                        sup_norm=1.0, halfline_at=z)


def halfline_family(p: DensityModel, n: int = 9) -> list[TestFunction]:
    """Half-line indicators at n interior quantiles of p."""
    u = (np.arange(n) + 1.0) / (n + 1.0)
    return [halfline_indicator(z) for z in p.ppf(u)]


def sign_function(at: float = 0.0) -> TestFunction:
    a = float(at)
    return TestFunction(lambda x: np.sign(x - a), kinks=(a,), name="sign" if a == 0 else f"sign[{a!r}]",
                        sup_norm=1.0)


def centered_halfline(z: float = 0.0, level: float = 0.5) -> TestFunction:
    """1{x <= z} - level, for use as a zero-mean right-hand side."""
    z = float(z)
    return TestFunction(lambda x: np.where(x <= z, 1.0, 0.0) - level, kinks=(z,),
                        name=f"halfline[{z!r}]-{level!r}", sup_norm=max(level, 1.0 - level))


def bounded_observables() -> list[TestFunction]:
    """Bounded smooth l's for Stein-equation checks."""
    fns = [
        ("tanh", np.tanh), ("atan", np.arctan), ("sin", np.sin), ("cos", np.cos),
        ("cauchy", lambda x: 1 / (1 + x ** 2)), ("bump", lambda x: np.exp(-x ** 2 / 2)),
        ("logistic", lambda x: 1 / (1 + np.exp(-x))), ("tanh(2x-1)", lambda x: np.tanh(2 * x - 1)),
    ]
    return [TestFunction(f, name=name) for name, f in fns]


def observables(p: DensityModel, n: int = 10) -> list[TestFunction]:
    """Bounded smooth observables followed by half-line indicators at p's quartiles."""
    out = bounded_observables()
    out += [halfline_indicator(z) for z in p.ppf(np.array([0.25, 0.5, 0.75]))]
    return out[:n]
