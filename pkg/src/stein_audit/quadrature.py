"""Adaptive Gauss-Kronrod integration and supremum search on the real line.

Integrands are called with 1-d float arrays and must return an array of the
same shape (a scalar is broadcast).  Infinite ends are mapped onto (0, 1) with
``x = c + s * t / (1 - t)``; finite intervals may instead use
``x = a + (b - a) sin^2(theta)``, which removes integrable power singularities
at either endpoint.  Each panel is integrated with the 21-point Kronrod rule
and its embedded 10-point Gauss rule; the worst panels are bisected until the
error estimate meets the tolerance or the panel budget runs out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import NonFiniteEvaluation

# Kronrod abscissae (non-negative half); odd indices are the Gauss points.
_XGK = np.array([
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0,
])
_WGK = np.array([
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077600525452742, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(21)
GAUSS_WEIGHTS[1:10:2] = _WG
GAUSS_WEIGHTS[11:20:2] = _WG[::-1]

_EPS = np.finfo(float).eps

# piece kinds
_FINITE, _RIGHT_TAIL, _LEFT_TAIL, _SIN2 = 0, 1, 2, 3


@dataclass(frozen=True)
class Interval:
    """Real interval with optional infinite ends; infinite ends are always open."""

    lower: float
    upper: float
    lower_open: bool = True
    upper_open: bool = True

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if math.isnan(lo) or math.isnan(hi) or not lo < hi:
            raise ValueError(f"empty interval ({self.lower}, {self.upper})")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if math.isinf(lo):
            object.__setattr__(self, "lower_open", True)
        if math.isinf(hi):
            object.__setattr__(self, "upper_open", True)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lower) and math.isfinite(self.upper)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        lo = x >= self.lower if not self.lower_open else x > self.lower
        hi = x <= self.upper if not self.upper_open else x < self.upper
        return lo & hi

    def interior(self, x):
        x = np.asarray(x, dtype=float)
        return (x > self.lower) & (x < self.upper)

    def issubset(self, other: "Interval") -> bool:
        """Inclusion up to endpoints (endpoints form a null set)."""
        return self.lower >= other.lower and self.upper <= other.upper

    def same_closure(self, other: "Interval") -> bool:
        return self.lower == other.lower and self.upper == other.upper

    def hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.lower, other.lower), max(self.upper, other.upper))


REAL_LINE = Interval(-math.inf, math.inf)


@dataclass(frozen=True)
class Tolerances:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_panels: int = 4096

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("abs_tol and rel_tol must be positive")
        if self.max_panels < 1:
            raise ValueError("max_panels must be >= 1")


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    panels_used: int
    converged: bool

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class Piece:
    """One integration piece for :func:`integrate_batch`.

    ``[c, inf)`` and ``(-inf, c]`` use the tail map with length ``scale``;
    finite pieces use the identity map, or the sin^2 map when ``singular``.
    """

    lower: float
    upper: float
    scale: float = 1.0
    singular: bool = False


def _call(f, x):
    with np.errstate(all="ignore"):
        y = np.asarray(f(x), dtype=float)
    if y.shape != x.shape:
        y = np.broadcast_to(y, x.shape).astype(float)
    return y


def _map_nodes(kind, p0, p1, t):
    """Map t-nodes (panels x 21) to x and the Jacobian dx/dt."""
    x = np.empty_like(t)
    jac = np.empty_like(t)
    k = kind[:, None] + np.zeros_like(t, dtype=int)
    P0 = p0[:, None] + 0.0 * t
    P1 = p1[:, None] + 0.0 * t
    m = k == _FINITE
    x[m] = t[m]
    jac[m] = 1.0
    m = (k == _RIGHT_TAIL) | (k == _LEFT_TAIL)
    if m.any():
        tt = t[m]
        step = P1[m] * tt / (1.0 - tt)
        x[m] = np.where(k[m] == _RIGHT_TAIL, P0[m] + step, P0[m] - step)
        jac[m] = P1[m] / (1.0 - tt) ** 2
    m = k == _SIN2
    if m.any():
        tt = t[m]
        lo, hi = P0[m], P1[m]
        s, c = np.sin(tt), np.cos(tt)
        # near the upper end measure the distance from b to keep precision
        xm = np.where(tt <= math.pi / 4, lo + (hi - lo) * s * s, hi - (hi - lo) * c * c)
        x[m] = xm
        # dx/dt from the rounded x, so that a power singularity in f cancels exactly
        jac[m] = 2.0 * np.sqrt(np.maximum(xm - lo, 0.0) * np.maximum(hi - xm, 0.0))
    return x, jac


def _eval_panels(f, a, b, kind, p0, p1, owner):
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    t = mid[:, None] + half[:, None] * NODES[None, :]
    x, jac = _map_nodes(kind, p0, p1, t)
    grp = np.broadcast_to(owner[:, None], t.shape)
    with np.errstate(all="ignore"):
        fx = np.asarray(f(x.ravel(), grp.ravel()), dtype=float)
    if fx.shape != (x.size,):
        fx = np.broadcast_to(fx, (x.size,)).astype(float)
    fx = fx.reshape(x.shape)
    bad = ~np.isfinite(fx)
    if bad.any():
        i = np.argwhere(bad)[0]
        raise NonFiniteEvaluation(f"integrand returned {fx[tuple(i)]} at x={x[tuple(i)]!r}")
    g = fx * jac
    resk = g @ KRONROD_WEIGHTS * half
    resg = g @ GAUSS_WEIGHTS * half
    resabs = np.abs(g) @ KRONROD_WEIGHTS * np.abs(half)
    mean = resk / np.where(half == 0, 1.0, 2.0 * half)
    resasc = np.abs(g - mean[:, None]) @ KRONROD_WEIGHTS * np.abs(half)
    err = np.abs(resk - resg)
    # QUADPACK scaling, but never below |K - G|: on a panel hiding a kink the
    # Kronrod value is no better than the Gauss one and the scaled figure is optimistic
    scaled = np.where(resasc > 0, resasc * np.minimum(1.0, (200.0 * err / np.where(resasc > 0, resasc, 1.0)) ** 1.5), err)
    err = np.maximum(np.maximum(scaled, err), 50.0 * _EPS * resabs)
    return resk, err, resabs


def _adaptive(f, kind, p0, p1, t0, t1, owner, ngroups, tol: Tolerances, n_init, panel_cap):
    """Run the panel-bisection loop; ``owner`` maps each piece to its tolerance group."""
    kind = np.repeat(kind, n_init)
    p0 = np.repeat(p0, n_init)
    p1 = np.repeat(p1, n_init)
    owner = np.repeat(owner, n_init)
    frac = np.tile(np.arange(n_init), len(t0))
    t0r, t1r = np.repeat(t0, n_init), np.repeat(t1, n_init)
    w = (t1r - t0r) / n_init
    a = t0r + frac * w
    b = np.where(frac == n_init - 1, t1r, a + w)
    val, err, rabs = _eval_panels(f, a, b, kind, p0, p1, owner)
    converged = np.zeros(ngroups, dtype=bool)
    while True:
        gval = np.bincount(owner, val, ngroups)
        gerr = np.bincount(owner, err, ngroups)
        gabs = np.bincount(owner, rabs, ngroups)
        gtol = np.maximum.reduce([np.full(ngroups, tol.abs_tol), tol.rel_tol * np.abs(gval), 100.0 * _EPS * gabs])
        bad = gerr > gtol
        converged = ~bad
        if not bad.any() or len(a) >= panel_cap:
            break
        counts = np.bincount(owner, minlength=ngroups)
        width_ok = (b - a) > 64.0 * _EPS * np.maximum(1.0, np.abs(0.5 * (a + b)))
        split = bad[owner] & (err >= gtol[owner] / (2.0 * counts[owner])) & width_ok
        if not split.any():
            break
        idx = np.flatnonzero(split)
        room = panel_cap - len(a)
        if len(idx) > room:
            idx = idx[np.argsort(err[idx])[::-1][:room]]
        m = 0.5 * (a[idx] + b[idx])
        na = np.concatenate([a[idx], m])
        nb = np.concatenate([m, b[idx]])
        nk = np.concatenate([kind[idx], kind[idx]])
        n0 = np.concatenate([p0[idx], p0[idx]])
        n1 = np.concatenate([p1[idx], p1[idx]])
        no = np.concatenate([owner[idx], owner[idx]])
        nv, ne, nr = _eval_panels(f, na, nb, nk, n0, n1, no)
        keep = np.ones(len(a), dtype=bool)
        keep[idx] = False
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        kind = np.concatenate([kind[keep], nk])
        p0 = np.concatenate([p0[keep], n0])
        p1 = np.concatenate([p1[keep], n1])
        owner = np.concatenate([owner[keep], no])
        val = np.concatenate([val[keep], nv])
        err = np.concatenate([err[keep], ne])
        rabs = np.concatenate([rabs[keep], nr])
    gval = np.bincount(owner, val, ngroups)
    gerr = np.bincount(owner, err, ngroups)
    counts = np.bincount(owner, minlength=ngroups)
    return gval, gerr, counts, converged


def _piece_arrays(pieces: Sequence[Piece]):
    kind, p0, p1, t0, t1 = [], [], [], [], []
    for pc in pieces:
        lo, hi = float(pc.lower), float(pc.upper)
        if not lo < hi:
            raise ValueError(f"empty piece ({lo}, {hi})")
        if math.isinf(lo) and math.isinf(hi):
            raise ValueError("a piece may have at most one infinite end")
        if math.isinf(hi):
            kind.append(_RIGHT_TAIL); p0.append(lo); p1.append(pc.scale); t0.append(0.0); t1.append(1.0)
        elif math.isinf(lo):
            kind.append(_LEFT_TAIL); p0.append(hi); p1.append(pc.scale); t0.append(0.0); t1.append(1.0)
        elif pc.singular:
            kind.append(_SIN2); p0.append(lo); p1.append(hi); t0.append(0.0); t1.append(math.pi / 2)
        else:
            kind.append(_FINITE); p0.append(0.0); p1.append(0.0); t0.append(lo); t1.append(hi)
    return (np.array(kind, dtype=int), np.array(p0, float), np.array(p1, float),
            np.array(t0, float), np.array(t1, float))


def integrate_batch(f: Callable, pieces: Sequence[Piece], tol: Tolerances = DEFAULT_TOL,
                    *, n_init: int = 1) -> list[QuadratureResult]:
    """Integrate ``f(x, i)`` over every piece ``i`` with a separate tolerance per piece.

    All pieces share one vectorized evaluation per refinement round, which is
    what makes thousands of small cumulative-integral segments affordable.
    """
    if not pieces:
        return []
    kind, p0, p1, t0, t1 = _piece_arrays(pieces)
    n = len(pieces)
    owner = np.arange(n)
    cap = max(tol.max_panels, 8 * n * n_init)
    val, err, counts, conv = _adaptive(f, kind, p0, p1, t0, t1, owner, n, tol, n_init, cap)
    return [QuadratureResult(float(v), float(e), int(c), bool(k)) for v, e, c, k in zip(val, err, counts, conv)]


def integrate(f: Callable, domain: Interval, tol: Tolerances = DEFAULT_TOL, *,
              points: Sequence[float] = (), center: float | None = None,
              scale: float = 1.0, singular: bool = False) -> QuadratureResult:
    """Integrate ``f`` over ``domain``.

    ``points`` are interior breakpoints (discontinuities, kinks, crossings);
    a doubly infinite domain without breakpoints is split at ``center``
    (default 0).  ``scale`` sets the length unit of the tail maps and
    ``singular`` switches finite pieces to the sin^2 substitution.

    On an exhausted panel budget the result comes back with
    ``converged=False``; a NaN or infinite integrand value raises
    :class:`NonFiniteEvaluation`.
    """
    lo, hi = domain.lower, domain.upper
    cuts = sorted({float(p) for p in points if lo < p < hi})
    if not cuts and math.isinf(lo) and math.isinf(hi):
        cuts = [0.0 if center is None else float(center)]
    edges = [lo, *cuts, hi]
    pieces = [Piece(edges[i], edges[i + 1], scale=scale, singular=singular) for i in range(len(edges) - 1)]
    kind, p0, p1, t0, t1 = _piece_arrays(pieces)
    owner = np.zeros(len(pieces), dtype=int)
    n_init = 4 if (math.isinf(lo) or math.isinf(hi)) else 2
    val, err, counts, conv = _adaptive(lambda x, _g: f(x), kind, p0, p1, t0, t1, owner, 1, tol,
                                       n_init, max(tol.max_panels, n_init * len(pieces)))
    return QuadratureResult(float(val[0]), float(err[0]), int(counts[0]), bool(conv[0]))


def end_value(g: Callable, end: float, inner: float) -> float:
    """g just inside a finite ``end`` if it has a settled limit there, else 0."""
    if not math.isfinite(end):
        return 0.0
    x = np.array([math.nextafter(end, inner), end + 1e-7 * (inner - end)])
    with np.errstate(all="ignore"):
        v = np.asarray(g(x), dtype=float)
    if not np.all(np.isfinite(v)) or abs(v[0] - v[1]) > 1e-4 * (1.0 + abs(v[0])):
        return 0.0
    return float(v[0])


def expectation(p, g: Callable, tol: Tolerances = DEFAULT_TOL, *, points: Sequence[float] = ()) -> QuadratureResult:
    """E_p[g(X)] over the support of ``p``; ``g`` is only evaluated inside it.

    With singular density ends, g just inside each finite end is subtracted
    on its half of the support and added back times the exact mass there.
    Points within rounding of an end then carry no weight.
    """
    pts = [*p.kink_points, *points]
    lo, hi = p.support.lower, p.support.upper
    c = float(p.center)
    shift = None
    if p.singular_endpoints and lo < c < hi:
        vals = [end_value(g, lo, c), end_value(g, hi, c)]
        if any(vals):
            shift = vals

    def integrand(x):
        px = p.pdf(x)
        gx = np.asarray(g(x), dtype=float)
        if shift is not None:
            gx = gx - np.where(x <= c, shift[0], shift[1])
        return np.where(px > 0, gx * px, 0.0)

    res = integrate(integrand, p.support, tol, points=[*pts, c] if shift else pts, center=p.center,
                    scale=p.scale, singular=p.singular_endpoints)
    if shift is None:
        return res
    below = float(p.cdf(np.array([c]))[0])
    return QuadratureResult(res.value + shift[0] * below + shift[1] * (1.0 - below), res.abs_error_estimate,
                            res.panels_used, res.converged)


class SupremumResult(NamedTuple):
    argsup: float
    sup: float


def supremum(f: Callable, domain: Interval, grid_size: int = 801, *,
             window: tuple[float, float] | None = None, center: float = 0.0,
             scale: float = 1.0, points: Sequence[float] = (), refine: int = 3) -> SupremumResult:
    """Grid search for sup f followed by bounded Brent refinement.

    Infinite domains are searched inside ``window`` when given, otherwise on
    the grid ``center + scale * tan(theta)``.  ``points`` are extra candidate
    locations (e.g. one-sided limits near a jump).
    """
    if window is not None:
        lo, hi = max(window[0], domain.lower), min(window[1], domain.upper)
        grid = np.linspace(lo, hi, grid_size)
    elif domain.bounded:
        grid = np.linspace(domain.lower, domain.upper, grid_size)
    else:
        th = np.linspace(-math.pi / 2, math.pi / 2, grid_size + 2)[1:-1]
        if math.isfinite(domain.lower):
            th = np.linspace(0.0, math.pi / 2, grid_size + 1)[:-1]
            grid = domain.lower + scale * np.tan(th)
        elif math.isfinite(domain.upper):
            th = np.linspace(0.0, math.pi / 2, grid_size + 1)[:-1]
            grid = domain.upper - scale * np.tan(th)[::-1]
        else:
            grid = center + scale * np.tan(th)
    grid = grid[domain.contains(grid)]
    extra = np.asarray([p for p in points if domain.contains(p)], dtype=float)
    grid = np.unique(np.concatenate([grid, extra]))
    if grid.size == 0:
        raise ValueError("empty search grid")
    vals = _call(f, grid)
    if not np.all(np.isfinite(vals)):
        i = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise NonFiniteEvaluation(f"objective returned {vals[i]} at x={grid[i]!r}")
    best_x, best_v = float(grid[np.argmax(vals)]), float(np.max(vals))
    order = np.argsort(vals)[::-1][:refine]
    for i in order:
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, grid.size - 1)]
        if not lo < hi:
            continue
        res = minimize_scalar(lambda t: -float(_call(f, np.array([t]))[0]), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-12 * max(1.0, abs(lo), abs(hi))})
        v = -float(res.fun)
        if not math.isfinite(v):
            raise NonFiniteEvaluation(f"objective returned {v} at x={res.x!r}")
        if v > best_v:
            best_x, best_v = float(res.x), v
    return SupremumResult(best_x, best_v)
