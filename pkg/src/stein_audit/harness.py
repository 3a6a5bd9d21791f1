"""Config-driven runs of identity checks and bound audits over (target, q) pairs."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from . import __version__
from .bounds import (AUDITED, GAUSSIAN_L1_CONSTANT, SOURCE_UNIT_SUP, SOURCE_PINSKER, SOURCE_POWER_EXP,
                     BoundReport, gaussian_target_bounds, make_report, power_exponential_distance_bounds,
                     rms_bound_audit, scale_mixture_tv_bound, sup_norm_constant)
from .densities import DensityModel, Gaussian, GaussianScaleMixture, make_density
from .errors import (ConfigError, InvalidParams, NonFiniteMoments, NotCentered, NotPowerExponential, OffSupport,
                     SteinAuditError, SupportMismatch)
from .functions import centered_halfline, member_test_functions, observables, sign_function
from .metrics import classical_distance, generalized_fisher_distance, kl_divergence
from .quadrature import Tolerances
from .stein import (IDENTITY_TOL, characterization_residual, check_membership_F, check_support_inclusion,
                    fundamental_identity_terms, stein_identity_terms)

CHECK_ORDER = ("characterization", "eq9", "fundeq", "corollary", "section5", "eq17_audit", "appendix",
               "pinsker", "eq25")
IDENTITY_CHECKS = ("characterization", "eq9", "fundeq")
IDENTITY_LIMITS = {"characterization": 1e-7, "eq9": 1e-6, "fundeq": 1e-6}
DEFAULT_SEED = 12345
SOURCE_TOLERANCE = "tolerance"
COLUMNS = ("pair_id", "check", "metric", "lhs", "kappa", "kappa_source", "sqrtJ", "rhs", "slack", "verdict",
           "flags")

# documented ranges for randomized q's
SWEEP_RANGES = {
    "gaussian": {"mu": (-3.0, 3.0), "var": (0.25, 4.0)},
    "logistic": {"loc": (-3.0, 3.0), "s": (0.5, 2.0)},
    "power_exponential": {"alpha": (1.0, 1.5, 2.0, 3.0), "d": (0.5, 2.0), "loc": (-3.0, 3.0)},
    "laplace": {"d": (0.5, 2.0), "loc": (-3.0, 3.0)},
}


@dataclass(frozen=True)
class Pair:
    pair_id: str
    target: DensityModel
    q: DensityModel
    spec: dict


@dataclass(frozen=True)
class RunConfig:
    pairs: tuple
    checks: tuple
    tolerances: Tolerances = IDENTITY_TOL
    z_points: int = 21
    z_values: tuple | None = None
    n_test_functions: int = 10
    n_observables: int = 10
    h: str = "sign"
    seed: int = DEFAULT_SEED
    output_path: str | None = None
    output_format: str = "csv"
    raw: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class Record:
    pair_id: str
    check: str
    metric: str
    lhs: float
    kappa: float
    kappa_source: str
    sqrtJ: float
    rhs: float
    slack: float
    verdict: str
    flags: tuple = ()

    @property
    def status(self) -> str:
        if self.verdict == "holds":
            return "passed"
        if self.verdict == "violated":
            return "audited_violations" if AUDITED in self.flags else "failed"
        return "skipped"


@dataclass
class RunSummary:
    counts: dict
    worst_residual: dict
    wall_time: float = 0.0

    @property
    def totals(self) -> dict:
        keys = ("passed", "failed", "audited_violations", "skipped")
        return {k: sum(c[k] for c in self.counts.values()) for k in keys}

    def as_dict(self, *, with_time: bool = False) -> dict:
        out = {"checks": self.counts, "totals": self.totals,
               "worst_residual": {k: _num(v) for k, v in self.worst_residual.items()}}
        if with_time:
            out["wall_time"] = self.wall_time
        return out


# ---------------------------------------------------------------------------
# configuration

def _schema() -> dict:
    text = resources.files("stein_audit").joinpath("schema/run_config.schema.json").read_text()
    return json.loads(text)


def _density(spec: dict) -> DensityModel:
    try:
        return make_density(spec["family"], **dict(spec.get("params", {})))
    except (InvalidParams, ValueError, ArithmeticError) as exc:
        raise ConfigError(f"bad density {spec}: {exc}") from None


def _sweep_pairs(sweep: dict, seed: int) -> list[Pair]:
    rng = np.random.default_rng(seed)
    target_spec = sweep.get("target", {"family": "gaussian", "params": {"mu": 0.0, "var": 1.0}})
    target = _density(target_spec)
    families = sweep.get("families", ["gaussian", "logistic", "power_exponential"])
    pairs = []
    for i in range(sweep["n"]):
        fam = families[int(rng.integers(len(families)))]
        ranges = SWEEP_RANGES[fam]
        params = {}
        for key, rg in ranges.items():
            if key == "alpha":
                params[key] = float(rg[int(rng.integers(len(rg)))])
            else:
                params[key] = float(rng.uniform(*rg))
        spec = {"target": target_spec, "q": {"family": fam, "params": params}}
        pairs.append(Pair(f"sweep{i}", target, _density(spec["q"]), spec))
    return pairs


def load_config(data: dict | str | os.PathLike, *, seed: int | None = None, tol: float | None = None) -> RunConfig:
    """Validate a config mapping (or JSON file) and build the run plan."""
    if not isinstance(data, dict):
        try:
            data = json.loads(Path(data).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    try:
        jsonschema.validate(data, _schema())
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message}") from None
    seed = int(data.get("seed", DEFAULT_SEED)) if seed is None else int(seed)
    pairs = []
    for i, spec in enumerate(data.get("pairs", [])):
        pairs.append(Pair(spec.get("id", f"pair{i}"), _density(spec["target"]), _density(spec["q"]), spec))
    if "sweep" in data:
        pairs += _sweep_pairs(data["sweep"], seed)
    if not pairs:
        raise ConfigError("config declares no pairs")
    ids = [p.pair_id for p in pairs]
    if len(set(ids)) != len(ids):
        raise ConfigError("pair ids must be unique")
    t = dict(data.get("tolerances", {}))
    if tol is not None:
        t["abs_tol"] = float(tol)
    try:
        tolerances = Tolerances(**{**asdict(IDENTITY_TOL), **t})
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    z = data.get("z_grid", {})
    lf = data.get("l_family", {})
    out = data.get("output", {})
    checks = tuple(c for c in CHECK_ORDER if c in data["checks"])
    echo = json.loads(json.dumps(data))
    echo["seed"] = seed
    if tol is not None:
        echo.setdefault("tolerances", {})["abs_tol"] = float(tol)
    return RunConfig(tuple(pairs), checks, tolerances, int(z.get("n", 21)),
                     tuple(float(v) for v in z["points"]) if "points" in z else None,
                     int(lf.get("n_test_functions", 10)), int(lf.get("n_observables", 10)),
                     data.get("h", "sign"), seed, out.get("path"), out.get("format", "csv"), echo)


# ---------------------------------------------------------------------------
# checks

def _nan() -> float:
    return math.nan


def _skip(pair: Pair, check: str, reason: str, metric: str = "") -> Record:
    return Record(pair.pair_id, check, metric, _nan(), _nan(), "", _nan(), _nan(), _nan(), "skipped",
                  (f"reason={reason}",))


def _from_report(pair: Pair, check: str, rep: BoundReport, metric: str | None = None) -> Record:
    return Record(pair.pair_id, check, metric or rep.metric_id, rep.lhs, rep.kappa, rep.kappa_source, rep.sqrtJ,
                  rep.rhs, rep.slack, rep.verdict, tuple(rep.flags))


def _identity(pair: Pair, check: str, metric: str, measured: float, predicted: float,
              flags: tuple = ()) -> Record:
    limit = IDENTITY_LIMITS[check]
    rep = make_report(metric, abs(measured - predicted), limit, SOURCE_TOLERANCE, 1.0, flags)
    return _from_report(pair, check, rep)


def _membership_flags(f, *densities) -> tuple:
    for dens in densities:
        if not check_membership_F(dens, f).member:
            return ("membership_warning",)
    return ()


def _check_characterization(pair: Pair, cfg: RunConfig) -> list[Record]:
    p, q = pair.target, pair.q
    if cfg.z_values is not None:
        zs = [z for z in cfg.z_values if p.support.interior(z)]
    else:
        zs = list(p.ppf((np.arange(cfg.z_points) + 1.0) / (cfg.z_points + 1.0)))
    out = []
    for z in zs:
        try:
            res = characterization_residual(p, q, float(z), cfg.tolerances)
        except OffSupport:
            out.append(_skip(pair, "characterization", "z_off_support", f"z={float(z)!r}"))
            continue
        out.append(_identity(pair, "characterization", f"z={float(z)!r}", res.measured, res.predicted))
    return out


def _check_stein_identity(pair: Pair, cfg: RunConfig) -> list[Record]:
    p, q = pair.target, pair.q
    check_support_inclusion(p, q)
    out = []
    for f in member_test_functions(p, q, n=cfg.n_test_functions):
        terms = stein_identity_terms(p, q, f, check_membership=False, tol=cfg.tolerances)
        out.append(_identity(pair, "eq9", f.name, terms.lhs, terms.rhs, _membership_flags(f, p, q)))
    return out


def _check_solution_identity(pair: Pair, cfg: RunConfig) -> list[Record]:
    p, q = pair.target, pair.q
    check_support_inclusion(p, q)
    out = []
    for l in observables(p, cfg.n_observables):
        terms = fundamental_identity_terms(p, q, l, check_membership=False, tol=cfg.tolerances)
        out.append(_identity(pair, "fundeq", l.name, terms.lhs, terms.rhs))
    return out


def _check_distance_bounds(pair: Pair, cfg: RunConfig) -> list[Record]:
    return [_from_report(pair, "corollary", r) for r in power_exponential_distance_bounds(pair.target, pair.q)]


def _check_gaussian_target(pair: Pair, cfg: RunConfig) -> list[Record]:
    p, q = pair.target, pair.q
    if not isinstance(p, Gaussian):
        return [_skip(pair, "section5", "target_not_gaussian")]
    out = [_from_report(pair, "section5", r) for r in gaussian_target_bounds(p.mu, p.var, q)]
    if isinstance(q, GaussianScaleMixture) and p.mu == 0.0 and p.var == 1.0:
        rep = scale_mixture_tv_bound({"values": q.scales, "probs": q.weights})
        out.append(_from_report(pair, "section5", rep, "tv_mixture_surrogate"))
    return out


def _check_rms_audit(pair: Pair, cfg: RunConfig) -> list[Record]:
    p, q = pair.target, pair.q
    h = sign_function() if cfg.h == "sign" else centered_halfline(0.0, float(p.cdf(np.array([0.0]))[0]))
    audit = rms_bound_audit(p, q, h)
    rep = make_report("rms_bound", audit.measured_rms, audit.claimed, SOURCE_POWER_EXP, 1.0,
                      (AUDITED, f"ratio={audit.ratio!r}", f"h={h.name}"))
    return [_from_report(pair, "eq17_audit", rep)]


def _check_sup_constant(pair: Pair, cfg: RunConfig) -> list[Record]:
    value = sup_norm_constant(pair.target, pair.q)
    return [_from_report(pair, "appendix", make_report("sup_norm_constant", value, 1.0, SOURCE_UNIT_SUP, 1.0))]


def _check_pinsker(pair: Pair, cfg: RunConfig) -> list[Record]:
    p, q = pair.target, pair.q
    kl = kl_divergence(p, q)
    if not math.isfinite(kl):
        return [_skip(pair, "pinsker", "infinite_kl", "tv")]
    rep = make_report("tv", classical_distance("tv", p, q), 1.0 / math.sqrt(2.0), SOURCE_PINSKER, math.sqrt(kl),
                      ("sqrtJ=sqrt_kl",))
    return [_from_report(pair, "pinsker", rep)]


def _check_gaussian_l1(pair: Pair, cfg: RunConfig) -> list[Record]:
    p, q = pair.target, pair.q
    if not (isinstance(p, Gaussian) and p.mu == 0.0 and p.var == 1.0):
        return [_skip(pair, "eq25", "target_not_standard_gaussian", "l1")]
    J = generalized_fisher_distance(p, q)
    if not math.isfinite(J):
        return [_skip(pair, "eq25", "infinite_fisher_distance", "l1")]
    rep = make_report("l1", classical_distance("l1", p, q), GAUSSIAN_L1_CONSTANT, SOURCE_POWER_EXP, math.sqrt(J))
    return [_from_report(pair, "eq25", rep)]


_CHECKS = {
    "characterization": _check_characterization, "eq9": _check_stein_identity, "fundeq": _check_solution_identity,
    "corollary": _check_distance_bounds, "section5": _check_gaussian_target, "eq17_audit": _check_rms_audit,
    "appendix": _check_sup_constant, "pinsker": _check_pinsker, "eq25": _check_gaussian_l1,
}

_SKIP_REASONS = (
    (SupportMismatch, "support_mismatch"),
    (NotPowerExponential, "not_power_exponential"),
    (NonFiniteMoments, "non_finite_moments"),
    (NotCentered, "h_not_centered"),
)


def run_check(pair: Pair, check: str, cfg: RunConfig) -> list[Record]:
    """Run one check on one pair; precondition failures become skip records."""
    try:
        return _CHECKS[check](pair, cfg)
    except SteinAuditError as exc:
        for cls, reason in _SKIP_REASONS:
            if isinstance(exc, cls):
                return [_skip(pair, check, reason)]
        return [Record(pair.pair_id, check, "", _nan(), _nan(), "", _nan(), _nan(), _nan(), "violated",
                       (f"error={type(exc).__name__}",))]


# ---------------------------------------------------------------------------
# running and reporting

def thread_count() -> int:
    env = os.environ.get("STEIN_AUDIT_THREADS")
    if env is None:
        return min(4, os.cpu_count() or 1)
    try:
        n = int(env)
    except ValueError:
        raise ConfigError(f"STEIN_AUDIT_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise ConfigError("STEIN_AUDIT_THREADS must be at least 1")
    return n


def summarize(records: list[Record], checks: tuple) -> RunSummary:
    counts = {c: {"passed": 0, "failed": 0, "audited_violations": 0, "skipped": 0} for c in checks}
    worst = {c: 0.0 for c in checks if c in IDENTITY_CHECKS}
    for r in records:
        counts[r.check][r.status] += 1
        if r.check in worst and math.isfinite(r.lhs):
            worst[r.check] = max(worst[r.check], r.lhs)
    return RunSummary(counts, worst)


def run(cfg: RunConfig, threads: int | None = None) -> tuple[list[Record], RunSummary]:
    """Execute every (pair, check) task; records come back in pair order times check order."""
    start = time.perf_counter()
    tasks = [(pair, check) for pair in cfg.pairs for check in cfg.checks]
    n = thread_count() if threads is None else threads
    if n <= 1:
        chunks = [run_check(p, c, cfg) for p, c in tasks]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            chunks = list(pool.map(lambda t: run_check(t[0], t[1], cfg), tasks))
    records = [r for chunk in chunks for r in chunk]
    summary = summarize(records, cfg.checks)
    summary.wall_time = time.perf_counter() - start
    return records, summary


def _num(v: float):
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ";".join(v)
    return str(v)


def render_csv(records: list[Record]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in records:
        w.writerow([_cell(getattr(r, c)) for c in COLUMNS])
    return buf.getvalue()


def render_json(records: list[Record], summary: RunSummary, cfg: RunConfig) -> str:
    recs = []
    for r in records:
        d = {c: getattr(r, c) for c in COLUMNS}
        for c in ("lhs", "kappa", "sqrtJ", "rhs", "slack"):
            d[c] = _num(d[c])
        d["flags"] = list(r.flags)
        recs.append(d)
    doc = {"version": __version__, "config": cfg.raw, "records": recs, "summary": summary.as_dict()}
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_report(records: list[Record], summary: RunSummary, cfg: RunConfig, out_dir: str | os.PathLike,
                fmt: str = "csv") -> Path:
    """Write report.csv or report.json into ``out_dir`` atomically and return its path."""
    if not records:
        raise ValueError("no records to report")
    if fmt == "csv":
        path, text = Path(out_dir) / "report.csv", render_csv(records)
    elif fmt == "json":
        path, text = Path(out_dir) / "report.json", render_json(records, summary, cfg)
    else:
        raise ConfigError(f"unknown format {fmt!r}")
    _atomic_write(path, text)
    return path


def exit_code(summary: RunSummary, strict: bool = False) -> int:
    t = summary.totals
    if t["failed"] or (strict and t["audited_violations"]):
        return 2
    return 0


def demo_config() -> dict[str, Any]:
    """A small config exercising every check."""
    g = {"family": "gaussian", "params": {"mu": 0.0, "var": 1.0}}
    lap = {"family": "laplace", "params": {"d": 1.0}}
    return {
        "pairs": [
            {"id": "phi-N(1,1)", "target": g, "q": {"family": "gaussian", "params": {"mu": 1.0, "var": 1.0}}},
            {"id": "laplace-shift", "target": lap, "q": {"family": "laplace", "params": {"d": 1.0, "loc": 1.0}}},
        ],
        "checks": list(CHECK_ORDER),
        "seed": DEFAULT_SEED,
    }
