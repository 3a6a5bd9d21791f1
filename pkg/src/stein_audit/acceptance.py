"""Acceptance criteria as plain functions; each returns a :class:`Criterion` with measured details."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds import (GAUSSIAN_L1_CONSTANT, HALFLINE_FACTOR, kappa_empirical, gaussian_target_bounds,
                     power_exponential_l1_constant, rms_bound_audit, scale_mixture_tv_bound, sup_norm_constant)
from .densities import Beta, Exponential, Gaussian, Logistic, PowerExponential, make_density
from .functions import centered_halfline, halfline_family, member_test_functions, observables, sign_function
from .harness import exit_code, load_config, render_csv, run
from .metrics import (classical_distance, gaussian_decomposition, gaussian_fisher_distance,
                      generalized_fisher_distance, kl_divergence)
from .quadrature import expectation
from .stein import (IDENTITY_TOL, apply_operator, bounded_solution_zero_mean, characterization_residual,
                    fundamental_identity_terms, stein_identity_terms)


@dataclass(frozen=True)
class Criterion:
    key: str
    title: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.key:>3} {self.title}: {self.detail}"


def _laplace(loc: float = 0.0) -> PowerExponential:
    return make_density("laplace", d=1.0, loc=loc)


def characterization_targets():
    return [Gaussian(0, 1), Exponential(1.0), Beta(2, 3), PowerExponential(1.5, 1.0), PowerExponential(3.0, 1.0)]


def criterion_1() -> Criterion:
    worst = 0.0
    count = 0
    for p in characterization_targets():
        for f in member_test_functions(p, n=20):
            res = expectation(p, lambda x: apply_operator(p, f, x), IDENTITY_TOL)
            worst = max(worst, abs(res.value))
            count += 1
    return Criterion("1", "E_p[T_p f] = 0 for members of the test class", worst <= 1e-8,
                     f"{count} (p, f) cases, max |E_p[T_p f]| = {worst:.3e} (limit 1e-8)")


def characterization_pairs():
    return [(Gaussian(0, 1), Gaussian(1, 1)), (Exponential(1.0), Beta(2, 2)), (Beta(2, 3), Beta(3, 2)),
            (_laplace(), Logistic(0.3, 1.0)), (PowerExponential(3.0, 1.0), Gaussian(0.5, 0.5))]


def criterion_2() -> Criterion:
    worst = 0.0
    for p, q in characterization_pairs():
        zs = p.ppf((np.arange(21) + 1.0) / 22.0)
        for z in zs:
            worst = max(worst, characterization_residual(p, q, float(z)).residual)
    at0 = characterization_residual(Gaussian(0, 1), Gaussian(1, 1), 0.0)
    oracle = float(Gaussian(0, 1).cdf(np.array([-1.0]))[0]) - 0.5
    ok = worst <= 1e-7 and abs(at0.measured - oracle) <= 1e-7 and abs(at0.measured + 0.341345) <= 1e-6
    return Criterion("2", "E_q[T_p f_z] = Q(z) - P(z) Q(b) on 21-point z grids", ok,
                     f"5 pairs, max residual {worst:.3e} (limit 1e-7); (phi, N(1,1)) at z=0: "
                     f"{at0.measured:.9f} vs Phi(-1)-1/2 = {oracle:.9f}")


def identity_pairs():
    return [(Gaussian(0, 1), Gaussian(1, 1)), (Gaussian(0, 1), Logistic(0.3, 0.8)),
            (Exponential(1.0), Beta(2, 3)), (_laplace(), Gaussian(0.5, 1.0)), (Beta(2, 3), Beta(3, 3))]


def criterion_3() -> Criterion:
    w9 = wf = 0.0
    for p, q in identity_pairs():
        for f in member_test_functions(p, q, n=10):
            w9 = max(w9, stein_identity_terms(p, q, f, check_membership=False).residual)
        for l in observables(p, 10):
            wf = max(wf, fundamental_identity_terms(p, q, l, check_membership=False).residual)
    return Criterion("3", "score-difference and Stein-equation identities", max(w9, wf) <= 1e-6,
                     f"5 pairs x 10 functions each; max residuals {w9:.3e} (test functions), "
                     f"{wf:.3e} (Stein solutions), limit 1e-6")


def decomposition_qs():
    return [Gaussian(0, 1), Gaussian(1, 1), Gaussian(0, 4), Gaussian(-0.7, 0.3), Logistic(0.0, 1.0),
            Logistic(1.0, 0.6), PowerExponential(4.0, 1.0), PowerExponential(1.5, 0.8),
            make_density("scale_mixture", scales=[0.9, 1.1], weights=[0.5, 0.5]), _laplace(0.5)]


def criterion_4() -> Criterion:
    mu0, var0 = 0.3, 1.5
    worst_grid = 0.0
    for mu1 in (-2.0, -1.0, 0.0, 1.0, 2.0):
        for var1 in (0.25, 0.5, 1.0, 2.0, 4.0):
            J = generalized_fisher_distance(Gaussian(mu0, var0), Gaussian(mu1, var1))
            worst_grid = max(worst_grid, abs(J - gaussian_fisher_distance(mu0, var0, mu1, var1)))
    worst_dec = 0.0
    for q in decomposition_qs():
        ff = gaussian_decomposition(0.0, 1.0, q, check_tol=math.inf)
        worst_dec = max(worst_dec, abs(ff.J - (ff.Gamma + ff.Psi)))
    return Criterion("4", "Gaussian J closed form and J = Gamma + Psi", max(worst_grid, worst_dec) <= 1e-8,
                     f"5x5 grid max |J - closed form| = {worst_grid:.3e}; 10 q's max |J - Gamma - Psi| = "
                     f"{worst_dec:.3e} (limit 1e-8)")


def section_qs():
    return [Gaussian(1, 1), Gaussian(0, 4), Gaussian(-0.5, 0.5), Gaussian(2.0, 1.5), Logistic(0.0, 1.0),
            Logistic(1.0, 0.6), PowerExponential(4.0, 1.0), _laplace(0.3),
            make_density("scale_mixture", scales=[0.9, 1.1], weights=[0.5, 0.5]),
            make_density("scale_mixture", scales=[0.5, 2.0], weights=[0.7, 0.3])]


def criterion_5() -> Criterion:
    worst = math.inf
    n = 0
    for q in section_qs():
        for rep in gaussian_target_bounds(0.0, 1.0, q):
            worst = min(worst, rep.slack)
            n += 1
    tv = gaussian_target_bounds(0.0, 1.0, Gaussian(1, 1))[0]
    mix = scale_mixture_tv_bound({0.9: 0.5, 1.1: 0.5})
    ok = (worst >= -1e-9 and abs(tv.lhs - 0.382925) <= 1e-6 and abs(tv.rhs - 0.707107) <= 1e-6
          and abs(mix.rhs - 0.142314) <= 1e-6 and mix.slack >= -1e-9)
    return Criterion("5", "Gaussian-target TV, Kolmogorov, L1 and sup bounds", ok,
                     f"{n} reports over 10 q's, min slack {worst:.4f}; N(1,1) TV {tv.lhs:.6f} <= {tv.rhs:.6f}; "
                     f"mixture TV {mix.lhs:.6f} <= {mix.rhs:.6f}")


def criterion_6() -> Criterion:
    cfg = load_config({"sweep": {"n": 12}, "checks": ["pinsker"],
                       "pairs": [{"id": "phi-N(1,1)", "target": {"family": "gaussian", "params": {}},
                                  "q": {"family": "gaussian", "params": {"mu": 1.0, "var": 1.0}}}]})
    records, summary = run(cfg)
    checked = [r for r in records if r.verdict != "skipped"]
    worst = min(r.slack for r in checked)
    kl = kl_divergence(Gaussian(0, 1), Gaussian(1, 1))
    tv = classical_distance("tv", Gaussian(0, 1), Gaussian(1, 1))
    bound = math.sqrt(kl / 2)
    ok = worst >= -1e-9 and abs(tv - 0.382925) <= 1e-6 and abs(bound - 0.5) <= 1e-9 and tv <= bound
    return Criterion("6", "Pinsker TV <= sqrt(KL/2)", ok,
                     f"{len(checked)} finite-KL pairs, min slack {worst:.4f}; (phi, N(1,1)) {tv:.6f} <= {bound:.6f}")


def sup_constant_cases():
    full = [Gaussian(0.5, 1.0), Logistic(0.0, 1.0), Gaussian(0.0, 0.25)]
    half = [Exponential(0.5), PowerExponential(2.0, 1.0, "positive_half"),
            PowerExponential(1.5, 0.7, "positive_half")]
    targets = [(PowerExponential(2.0, 0.5), full), (_laplace(), full), (PowerExponential(1.5, 1.0), full),
               (PowerExponential(3.0, 1.0), full), (PowerExponential(1.0, 1.0, "positive_half"), half)]
    return [(p, q) for p, qs in targets for q in qs]


def criterion_7() -> Criterion:
    vals = [sup_norm_constant(p, q) for p, q in sup_constant_cases()]
    worst = max(vals)
    return Criterion("7", "sup-norm constant for Dirac right-hand sides <= 1", worst <= 1 + 1e-9,
                     f"15 (target, q) cases, max constant {worst:.6f}")


def criterion_8() -> Criterion:
    a, b = power_exponential_l1_constant(2.0), GAUSSIAN_L1_CONSTANT
    return Criterion("8", "L1 constant at alpha=2 equals the Gaussian L1 constant", a == b,
                     f"2^(1-1/2) = {a!r}, sqrt(2) = {b!r}, identical: {a == b}")


def criterion_9a() -> Criterion:
    p = _laplace()
    sol = bounded_solution_zero_mean(p, sign_function())
    xs = np.array([-30.0, -5.0, -1.0, -1e-6, 0.0, 1e-6, 1.0, 5.0, 30.0])
    dev = float(np.max(np.abs(sol(xs) + 1.0)))
    audit = rms_bound_audit(p, _laplace(1.0), sign_function())
    cfg = load_config({"pairs": [{"id": "laplace", "target": {"family": "laplace", "params": {"d": 1.0}},
                                  "q": {"family": "laplace", "params": {"d": 1.0}}}],
                       "checks": ["eq17_audit"], "h": "sign"})
    _, summary = run(cfg, threads=1)
    t = summary.totals
    ok = (dev <= 1e-9 and abs(audit.measured_rms - 1.0) <= 1e-9 and audit.claimed == 0.5
          and abs(audit.ratio - 2.0) <= 1e-9 and t["audited_violations"] == 1 and exit_code(summary) == 0)
    return Criterion("9a", "RMS claim audit, Laplace target with h = sign", ok,
                     f"max |f + 1| = {dev:.1e}, RMS {audit.measured_rms:.12f} vs claimed {audit.claimed}, "
                     f"ratio {audit.ratio:.12f}; run: audited_violations={t['audited_violations']}, "
                     f"exit code {exit_code(summary)}")


def criterion_9b() -> Criterion:
    p = Gaussian(0, 1)
    audit = rms_bound_audit(p, p, centered_halfline(0.0))
    ok = abs(audit.measured_rms - 0.2136) <= 5e-4 and audit.ratio < 1.0
    return Criterion("9b", "RMS claim audit, Gaussian target with h = 1{x<=0} - 1/2 (expected 0.2136, ratio < 1)",
                     ok, f"measured RMS {audit.measured_rms:.6f} (closed form sqrt(ln 2)/2 = "
                     f"{math.sqrt(math.log(2)) / 2:.6f}), claimed {audit.claimed:.6f}, ratio {audit.ratio:.6f}")


def criterion_10() -> Criterion:
    p = Gaussian(0, 1)
    fam = halfline_family(p, 9)
    qs = [Gaussian(1, 1), Gaussian(0, 4), Gaussian(0, 0.01), Logistic(0.0, 1.0), _laplace()]
    vals = [kappa_empirical(p, q, fam) for q in qs]
    worst = max(vals)
    return Criterion("10", "empirical half-line Stein factor <= sqrt(2 pi)/4", worst <= HALFLINE_FACTOR + 1e-8,
                     f"5 q's, max {worst:.6f} vs {HALFLINE_FACTOR:.6f}")


def criterion_11() -> Criterion:
    data = {"pairs": [{"id": "phi-N(1,1)", "target": {"family": "gaussian", "params": {}},
                       "q": {"family": "gaussian", "params": {"mu": 1.0, "var": 1.0}}}],
            "sweep": {"n": 4}, "checks": ["pinsker", "eq25", "corollary"], "seed": 7}
    a, _ = run(load_config(data), threads=1)
    b, _ = run(load_config(data), threads=4)
    same = render_csv(a) == render_csv(b)
    return Criterion("11", "identical config and seed give identical CSV bodies", same,
                     f"{len(a)} records, serial vs 4 threads byte-identical: {same}")


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8, criterion_9a, criterion_9b, criterion_10, criterion_11)


def run_all() -> list[Criterion]:
    return [c() for c in CRITERIA]
