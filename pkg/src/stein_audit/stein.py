"""Stein operators, score differences, Stein-equation solvers and identity residuals.

The operator of a density p acts as ``T_p f = (f p)' / p`` on the support and
vanishes outside it.  It is evaluated either by the product rule
``f' + (p'/p) f`` when the derivative of ``f`` is known, or by a five-point
difference of ``f p`` taken in log space, so that a tiny ``p`` never gets
divided out explicitly.

Stein-equation solutions ``f(x) = (1/p(x)) int_a^x g p`` are computed from the
nearer end of the support: the left form below the split point and the
negative right-tail form above it.  Both are accumulated over sorted
evaluation points with every segment integral rescaled by ``p`` at the segment
end, which keeps the recurrence bounded far out in the tails.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .densities import DensityModel, Exponential, Gaussian, PowerExponential
from .errors import (MembershipWarning, NonIntegrable, NotCentered, NotPowerExponential, OffSupport,
                     SupportMismatch)
from .quadrature import Piece, Tolerances, end_value, expectation, integrate_batch

IDENTITY_TOL = Tolerances(abs_tol=1e-12, rel_tol=1e-10, max_panels=4096)
_SEGMENT_TOL = Tolerances(abs_tol=1e-300, rel_tol=1e-12, max_panels=4096)
MEMBERSHIP_THRESHOLD = 1e-8


def _arr(x):
    return np.asarray(x, dtype=float)


def _evaluate(fn, x):
    with np.errstate(all="ignore"):
        y = np.asarray(fn(x), dtype=float)
    if y.shape != x.shape:
        y = np.broadcast_to(y, x.shape).astype(float)
    return y


@dataclass(frozen=True, eq=False)
class TestFunction:
    """A vectorized real function with optional derivative and declared kinks.

    ``kinks`` lists points where the function or its derivative may jump;
    stencils and quadrature never straddle them.  ``sup_norm`` may be given
    when it is known in closed form.
    """

    __test__ = False  # not a pytest class

    eval: Callable
    deriv: Callable | None = None
    kinks: tuple = ()
    boundary_claims: tuple | None = None
    name: str = ""
    sup_norm: float | None = None
    halfline_at: float | None = None

    def __call__(self, x):
        return _evaluate(self.eval, _arr(x))

    def derivative(self, x):
        if self.deriv is None:
            raise ValueError(f"{self.name or 'function'} has no derivative")
        return _evaluate(self.deriv, _arr(x))


def as_test_function(f) -> TestFunction:
    if isinstance(f, TestFunction):
        return f
    if isinstance(f, SteinSolution):
        return f.as_test_function()
    return TestFunction(f, name=getattr(f, "__name__", ""))


# ---------------------------------------------------------------------------
# operator

_CENTRAL = (np.array([-2.0, -1.0, 0.0, 1.0, 2.0]), np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0)
_FORWARD = (np.arange(5.0), np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0)
_BACKWARD = (-np.arange(5.0), -_FORWARD[1])


def _stencil(p: DensityModel, f: Callable, x, kinks: Sequence[float], h: float | None, weighted: bool):
    """Five-point derivative of f (weighted: of f p / p(x)) inside the support of p.

    Central stencils are used away from support ends and declared kinks;
    elsewhere a one-sided stencil on the side with room is used (the right
    side at a kink, matching the right-limit convention of ``score``).
    """
    x = _arr(x)
    flat = x.ravel()
    out = np.zeros(flat.shape)
    inside = p.support.contains(flat)
    if not inside.any():
        return out.reshape(x.shape)
    xs = flat[inside]
    h0 = 1e-3 * p.scale if h is None else h
    lo, hi = p.support.lower, p.support.upper
    obst = np.array(sorted({*kinks, *p.kink_points}), dtype=float)
    # room to the left/right before the first obstacle
    dl = np.where(np.isfinite(lo), xs - lo, np.inf)
    dr = np.where(np.isfinite(hi), hi - xs, np.inf)
    on_obst = np.zeros(xs.shape, dtype=bool)
    for o in obst:
        diff = xs - o
        dl = np.where(diff > 0, np.minimum(dl, diff), dl)
        dr = np.where(diff < 0, np.minimum(dr, -diff), dr)
        on_obst |= diff == 0
    central = (~on_obst) & (np.minimum(dl, dr) >= 2.5 * h0)
    forward = (~central) & (dr >= dl)
    off = np.empty((xs.size, 5))
    coef = np.empty((xs.size, 5))
    step = np.empty(xs.size)
    off[central], coef[central], step[central] = _CENTRAL[0], _CENTRAL[1], h0
    fw = forward
    off[fw], coef[fw] = _FORWARD[0], _FORWARD[1]
    step[fw] = np.minimum(h0, dr[fw] / 4.5)
    bw = ~central & ~forward
    off[bw], coef[bw] = _BACKWARD[0], _BACKWARD[1]
    step[bw] = np.minimum(h0, dl[bw] / 4.5)
    pts = xs[:, None] + off * step[:, None]
    fv = _evaluate(f, pts.ravel()).reshape(pts.shape)
    with np.errstate(all="ignore"):
        if weighted:
            fv = fv * np.exp(p.log_pdf(pts) - p.log_pdf(xs)[:, None])
        terms = np.where(coef != 0.0, coef * fv, 0.0)
        val = terms.sum(axis=1) / step
    val = np.where(step > 0, val, 0.0)
    out[inside] = val
    return out.reshape(x.shape)


def product_derivative(p: DensityModel, f: Callable, x, *, kinks: Sequence[float] = (), h: float | None = None):
    """(1/p(x)) d/dy (f(y) p(y)) at y = x, differencing f p in log space."""
    return _stencil(p, f, x, kinks, h, True)


def numeric_derivative(p: DensityModel, f: Callable, x, *, kinks: Sequence[float] = (), h: float | None = None):
    """f'(x) by the same stencils, staying inside the support of p."""
    return _stencil(p, f, x, kinks, h, False)


def apply_operator(p: DensityModel, f, x, *, path: str = "auto"):
    """T_p f at x; zero off the support of p.

    ``path`` is ``"product"`` (needs ``f.deriv``), ``"difference"``
    (derivative of the product f p), ``"numeric"`` (numerical f' plus
    score times f, better conditioned next to singular support ends) or
    ``"auto"`` (product when the derivative is known, else difference).
    """
    f = as_test_function(f)
    x = _arr(x)
    use_product = path == "product" or (path == "auto" and f.deriv is not None)
    if use_product:
        inside = p.support.contains(x)
        with np.errstate(invalid="ignore", over="ignore"):
            return np.where(inside, f.derivative(x) + p.score(x) * f(x), 0.0)
    if path == "numeric":
        with np.errstate(invalid="ignore", over="ignore"):
            return np.where(p.support.contains(x), numeric_derivative(p, f, x, kinks=f.kinks) + p.score(x) * f(x), 0.0)
    if path not in ("auto", "difference"):
        raise ValueError(f"unknown path {path!r}")
    return product_derivative(p, f, x, kinks=f.kinks)


def check_support_inclusion(p: DensityModel, q: DensityModel) -> None:
    if not q.support.issubset(p.support):
        raise SupportMismatch(f"support of {q!r} is not contained in support of {p!r}")


def score_difference(p: DensityModel, q: DensityModel, x):
    """r(p, q)(x) = (p'/p - q'/q) on S_p, with q'/q = 0 off S_q."""
    check_support_inclusion(p, q)
    x = _arr(x)
    with np.errstate(invalid="ignore", over="ignore"):
        return np.where(p.support.contains(x), p.score(x) - q.score(x), 0.0)


# ---------------------------------------------------------------------------
# Stein equation solutions

@dataclass(frozen=True, eq=False)
class SteinSolution:
    """Evaluable solution of T_p f = rhs; zero outside the support of the target."""

    target: DensityModel
    rhs_kind: str
    split_point: float
    rhs: Callable
    kinks: tuple
    _evaluator: Callable = field(repr=False)
    mean_of_l: float = 0.0

    def eval(self, x):
        x = _arr(x)
        out = np.zeros(x.shape)
        inside = self.target.support.contains(x)
        if inside.any():
            out[inside] = self._evaluator(x[inside])
        return out

    __call__ = eval

    def as_test_function(self) -> TestFunction:
        return TestFunction(self.eval, kinks=self.kinks, name=f"stein_solution[{self.rhs_kind}]")

    def residual(self, n_probe: int = 50) -> float:
        """max |T_p f - rhs| over interior probe points, with f' taken numerically."""
        p = self.target
        u = (np.arange(n_probe) + 0.5) / n_probe
        xs = p.ppf(u)
        h = 1e-3 * p.scale
        for k in (*self.kinks, *p.kink_points):
            xs = xs[np.abs(xs - k) > 3 * h]
        lhs = apply_operator(p, self.as_test_function(), xs, path="numeric")
        return float(np.max(np.abs(lhs - _evaluate(self.rhs, xs))))


class _IntegralForm:
    """x -> (1/p(x)) int_a^x g p  (x <= split)  or  -(1/p(x)) int_x^b g p  (x > split)."""

    def __init__(self, p: DensityModel, g: Callable, breaks: Sequence[float], split: float):
        self.p = p
        self.g = g
        lo, hi = p.support.lower, p.support.upper
        self.breaks = np.array(sorted({float(b) for b in (*breaks, *p.kink_points) if lo < b < hi}))
        self.split = split
        self.converged = True

    def __call__(self, x):
        x = _arr(x)
        out = np.zeros(x.shape)
        left = x <= self.split
        if left.any():
            out[left] = self._accumulate(x[left], ascending=True)
        if (~left).any():
            out[~left] = -self._accumulate(x[~left], ascending=False)
        return out

    def _accumulate(self, xs, ascending: bool):
        p = self.p
        u = np.unique(xs)
        if ascending:
            anchor = p.support.lower
            br = self.breaks[self.breaks < u[-1]]
            knots = np.unique(np.concatenate([u, br]))
        else:
            anchor = p.support.upper
            br = self.breaks[self.breaks > u[0]]
            knots = np.unique(np.concatenate([u, br]))[::-1]
        logp = p.log_pdf(knots)
        pieces = []
        empty_first = knots[0] == anchor
        k0 = knots[0]
        g = self.g
        # next to a singular end, integrate (g - g0) p and add g0 times the exact tail mass, with
        # g0 the limit of g at the end when it settles: points within rounding of the end then carry no weight
        g0 = 0.0
        if not empty_first:
            s0 = float(abs(p.score(np.array([k0]))[0]))
            tail_scale = p.scale if s0 == 0 else min(p.scale, 1.0 / s0)
            lo, hi = (anchor, k0) if ascending else (k0, anchor)
            singular = p.singular_endpoints and math.isfinite(anchor)
            pieces.append(Piece(lo, hi, scale=tail_scale, singular=singular))
            if singular:
                g0 = end_value(g, anchor, k0) or float(_evaluate(g, np.array([k0]))[0])
        for j in range(1, knots.size):
            lo, hi = (knots[j - 1], knots[j]) if ascending else (knots[j], knots[j - 1])
            pieces.append(Piece(lo, hi))
        offset = 0 if not empty_first else 1
        ref = logp[np.arange(len(pieces)) + offset]
        shift = np.zeros(len(pieces))
        shift[0] = g0

        def integrand(t, idx):
            with np.errstate(all="ignore"):
                w = np.exp(p.log_pdf(t) - ref[idx])
                return np.where(w > 0, (_evaluate(g, t) - shift[idx]) * w, 0.0)

        res = integrate_batch(integrand, pieces, _SEGMENT_TOL)
        seg = np.array([r.value for r in res])
        ok = [r.converged for r in res]
        if g0 != 0.0:
            log_mass = p.log_cdf(knots[:1]) if ascending else p.log_sf(knots[:1])
            seg[0] += g0 * math.exp(float(log_mass[0]) - logp[0])
            # the remainder only needs accuracy relative to the whole segment
            ok[0] = ok[0] or res[0].abs_error_estimate <= _SEGMENT_TOL.rel_tol * abs(seg[0])
        if not all(ok):
            self.converged = False
        acc = np.empty(knots.size)
        start = 0
        prev = 0.0
        if empty_first:
            acc[0] = 0.0
            start = 1
            prev = 0.0
        for j in range(start, knots.size):
            s = seg[j - offset]
            if j == 0:
                prev = s
            else:
                with np.errstate(over="ignore"):
                    prev = prev * math.exp(logp[j - 1] - logp[j]) + s if prev != 0.0 else s
            acc[j] = prev
        order = np.argsort(knots)
        pos = order[np.searchsorted(knots[order], xs)]
        return acc[pos]


def _mean(p: DensityModel, l: TestFunction) -> float:
    res = expectation(p, l, IDENTITY_TOL, points=l.kinks)
    if not res.converged:
        raise NonIntegrable(f"E_p[l] did not converge for {p!r} (estimate {res.value}, err {res.abs_error_estimate})")
    return res.value


def solve_stein_equation(p: DensityModel, l, *, split: float | None = None) -> SteinSolution:
    """Solution of T_p f = (l - E_p l) on S_p, evaluated stably on both sides of the median.

    Indicators of lower half lines (``l.halfline_at`` set) use the closed form.
    """
    l = as_test_function(l)
    if l.halfline_at is not None and split is None and p.support.interior(l.halfline_at):
        return solve_halfline_indicator(p, l.halfline_at)
    el = _mean(p, l)

    def g(x):
        return l(x) - el

    sp = p.median if split is None else split
    form = _IntegralForm(p, g, l.kinks, sp)
    return SteinSolution(p, "centered_function", sp, lambda x: np.where(p.support.contains(x), g(x), 0.0),
                         tuple(l.kinks), form, el)


def solve_halfline_indicator(p: DensityModel, z: float) -> SteinSolution:
    """Closed-form solution for l_z = (1{x <= z} - P(z)) on S_p."""
    if not p.support.interior(z):
        raise OffSupport(f"z={z} is not interior to the support of {p!r}")
    Pz = float(p.cdf(np.array([z]))[0])
    Sz = float(p.sf(np.array([z]))[0])

    def evaluator(x):
        with np.errstate(all="ignore"):
            lp = p.log_pdf(x)
            below = np.exp(p.log_cdf(x) - lp) * Sz
            above = np.exp(p.log_sf(x) - lp) * Pz
        return np.where(x <= z, below, above)

    def rhs(x):
        x = _arr(x)
        return np.where(p.support.contains(x), np.where(x <= z, 1.0, 0.0) - Pz, 0.0)

    return SteinSolution(p, "halfline_indicator", float(z), rhs, (float(z),), evaluator, Pz)


def as_power_exponential(p: DensityModel) -> PowerExponential:
    """View a target as c exp(-d |x|^alpha) on a scale-invariant set, if it is one."""
    if isinstance(p, PowerExponential):
        if p.loc != 0.0:
            raise NotPowerExponential(f"{p!r} is shifted; targets must be centred at 0")
        return p
    if isinstance(p, Gaussian) and p.mu == 0.0:
        return PowerExponential(2.0, 0.5 / p.var, "full_line")
    if isinstance(p, Exponential):
        return PowerExponential(1.0, p.rate, "positive_half")
    raise NotPowerExponential(f"{p!r} is not of power-exponential form")


def bounded_solution_zero_mean(p: DensityModel, h) -> SteinSolution:
    """The bounded solution of T_p f = h for a p-centred h and power-exponential p.

    The split is at 0: left form for x <= 0, right-tail form for x >= 0.
    A small quadrature drift in E_p[h] (between 1e-9 and 1e-6) is removed.
    """
    pe = as_power_exponential(p)
    h = as_test_function(h)
    eh = _mean(p, h)
    if abs(eh) > 1e-6:
        raise NotCentered(f"E_p[h] = {eh:.3g} is not zero")
    shift = eh if abs(eh) > 1e-9 else 0.0

    def g(x):
        return h(x) - shift

    form = _IntegralForm(p, g, h.kinks, 0.0)
    return SteinSolution(p, "zero_mean_h", 0.0, lambda x: np.where(p.support.contains(x), g(x), 0.0),
                         tuple(h.kinks), form, eh)


# ---------------------------------------------------------------------------
# membership and identities

@dataclass(frozen=True)
class MembershipReport:
    member: bool
    lower_limit: float
    upper_limit: float
    lower_ok: bool
    upper_ok: bool
    differentiable: bool
    declared_kinks: tuple
    undeclared_kinks: tuple
    threshold: float

    @property
    def strict_member(self) -> bool:
        return self.member and not self.declared_kinks


def _fp(p: DensityModel, f: Callable, x):
    fx = _evaluate(f, x)
    with np.errstate(all="ignore"):
        val = np.sign(fx) * np.exp(np.log(np.abs(fx)) + p.log_pdf(x))
    return np.where(np.isnan(val), 0.0, val)


def _endpoint_probes(p: DensityModel, side: int) -> np.ndarray:
    lo_w, hi_w = p.window(1e-16)
    c = p.median
    if side < 0:
        a = p.support.lower
        if math.isfinite(a):
            return a + (c - a) * 10.0 ** -np.arange(1, 13)
        return np.concatenate([c + (lo_w - c) * (1 - 2.0 ** -np.arange(0, 8)),
                               lo_w - p.scale * np.array([0.5, 1.0, 2.0])])
    b = p.support.upper
    if math.isfinite(b):
        return b - (b - c) * 10.0 ** -np.arange(1, 13)
    return np.concatenate([c + (hi_w - c) * (1 - 2.0 ** -np.arange(0, 8)),
                           hi_w + p.scale * np.array([0.5, 1.0, 2.0])])


def _find_kinks(p: DensityModel, f: TestFunction, known: Sequence[float], n: int = 201) -> tuple:
    """Locate jumps in the derivative of f p between grid points, away from known kinks.

    A cell whose derivative change dwarfs its neighbours' is bisected down to
    the jump, which is then confirmed with one-sided differences.
    """
    lo_w, hi_w = p.window(1e-8)
    lo_w, hi_w = max(lo_w, p.support.lower), min(hi_w, p.support.upper)
    grid = np.linspace(lo_w, hi_w, n + 2)[1:-1]
    step = grid[1] - grid[0]
    h = 1e-3 * step

    def deriv(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return (_fp(p, f, x + h) - _fp(p, f, x - h)) / (2 * h)

    d = deriv(grid)
    jump = np.abs(np.diff(d))
    level = max(1.0, float(np.max(np.abs(d))))
    found = []
    for i in range(jump.size):
        a, b = grid[i], grid[i + 1]
        if any(a - step <= k <= b + step for k in known):
            continue
        neigh = max(jump[i - 1] if i > 0 else 0.0, jump[i + 1] if i + 1 < jump.size else 0.0)
        if jump[i] <= 1e-3 * level or jump[i] <= 8.0 * neigh:
            continue
        da, db = d[i], d[i + 1]
        for _ in range(60):
            m = 0.5 * (a + b)
            if b - a <= 1e-9 * step:
                break
            dm = float(deriv(m)[0])
            if abs(dm - da) < abs(dm - db):
                a, da = m, dm
            else:
                b, db = m, dm
        # the bisection is only good to about h, so confirm from beyond 2h
        k = 0.5 * (a + b)
        right = (_fp(p, f, np.array([k + 4 * h])) - _fp(p, f, np.array([k + 2 * h])))[0] / (2 * h)
        left = (_fp(p, f, np.array([k - 2 * h])) - _fp(p, f, np.array([k - 4 * h])))[0] / (2 * h)
        if abs(right - left) > 1e-3 * level:
            found.append(float(k))
    return tuple(found)


def check_membership_F(p: DensityModel, f, threshold: float = MEMBERSHIP_THRESHOLD) -> MembershipReport:
    """Probe f p at both ends of the support and look for undeclared kinks of f p."""
    f = as_test_function(f)
    limits = []
    for side in (-1, 1):
        xs = _endpoint_probes(p, side)
        vals = _fp(p, f, xs)
        bound = p.support.lower if side < 0 else p.support.upper
        limits.append(float(vals[-1]) if math.isfinite(bound) else float(np.max(np.abs(vals[-3:]))))
    lo_ok, hi_ok = abs(limits[0]) <= threshold, abs(limits[1]) <= threshold
    declared = tuple(k for k in f.kinks if p.support.interior(k))
    undeclared = _find_kinks(p, f, (*declared, *p.kink_points))
    member = lo_ok and hi_ok and not undeclared
    return MembershipReport(member, limits[0], limits[1], lo_ok, hi_ok, not undeclared and not declared,
                            declared, undeclared, threshold)


class IdentityTerms(NamedTuple):
    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def _points(*groups) -> list[float]:
    return sorted({float(v) for g in groups for v in g})


def _warn_membership(p, q, f, what):
    for dens in (p, q):
        rep = check_membership_F(dens, f)
        if not rep.member:
            warnings.warn(f"{what}: test function fails F({dens!r}) membership probe "
                          f"(limits {rep.lower_limit:.3g}, {rep.upper_limit:.3g}); computing anyway",
                          MembershipWarning, stacklevel=3)


def stein_identity_terms(p: DensityModel, q: DensityModel, f, *, check_membership: bool = True,
                         tol: Tolerances = IDENTITY_TOL) -> IdentityTerms:
    """(E_q[T_p f], E_q[f r(p, q)])."""
    check_support_inclusion(p, q)
    f = as_test_function(f)
    if check_membership:
        _warn_membership(p, q, f, "stein identity")
    pts = _points(f.kinks, p.kink_points, [p.support.lower, p.support.upper])
    lhs = expectation(q, lambda x: apply_operator(p, f, x), tol, points=pts)
    with np.errstate(invalid="ignore", over="ignore"):
        rhs = expectation(q, lambda x: f(x) * score_difference(p, q, x), tol, points=pts)
    return IdentityTerms(lhs.value, rhs.value)


def stein_identity_residual(p: DensityModel, q: DensityModel, f, **kw) -> float:
    return stein_identity_terms(p, q, f, **kw).residual


def fundamental_identity_terms(p: DensityModel, q: DensityModel, l, *, check_membership: bool = True,
                               tol: Tolerances = IDENTITY_TOL) -> IdentityTerms:
    """(E_q[l] - E_p[l], E_q[f_l r(p, q)]) with f_l the Stein solution for l."""
    check_support_inclusion(p, q)
    l = as_test_function(l)
    sol = solve_stein_equation(p, l)
    if check_membership:
        rep = check_membership_F(q, sol.as_test_function())
        if not rep.member:
            warnings.warn(f"fundamental identity: Stein solution fails F({q!r}) membership probe",
                          MembershipWarning, stacklevel=2)
    pts = _points(l.kinks, p.kink_points, [p.support.lower, p.support.upper])
    eq = expectation(q, l, tol, points=pts)
    lhs = eq.value - sol.mean_of_l
    with np.errstate(invalid="ignore", over="ignore"):
        rhs = expectation(q, lambda x: sol(x) * score_difference(p, q, x), tol, points=pts)
    return IdentityTerms(lhs, rhs.value)


def fundamental_identity_residual(p: DensityModel, q: DensityModel, l, **kw) -> float:
    return fundamental_identity_terms(p, q, l, **kw).residual


class CharacterizationResult(NamedTuple):
    measured: float
    predicted: float

    @property
    def residual(self) -> float:
        return abs(self.measured - self.predicted)


def characterization_residual(p: DensityModel, q: DensityModel, z: float,
                              tol: Tolerances = IDENTITY_TOL) -> CharacterizationResult:
    """E_q[T_p f_z] by quadrature against Q(z) - P(z) Q(b)."""
    sol = solve_halfline_indicator(p, z)
    a, b = p.support.lower, p.support.upper
    qa = float(q.cdf(np.array([a]))[0]) if math.isfinite(a) else 0.0
    qb = float(q.cdf(np.array([b]))[0]) if math.isfinite(b) else 1.0
    Qz = float(q.cdf(np.array([z]))[0]) - qa
    Qb = qb - qa
    Pz = sol.mean_of_l
    predicted = Qz - Pz * Qb
    pts = _points([z], p.kink_points, [a, b])
    measured = expectation(q, lambda x: product_derivative(p, sol.eval, x, kinks=(z,)), tol, points=pts)
    return CharacterizationResult(measured.value, predicted)
