import csv
import io
import json
import math

import pytest

from stein_audit.errors import ConfigError
from stein_audit.harness import (CHECK_ORDER, COLUMNS, emit_report, exit_code, load_config, render_csv,
                                 render_json, run, thread_count)

G = {"family": "gaussian", "params": {"mu": 0.0, "var": 1.0}}
G1 = {"family": "gaussian", "params": {"mu": 1.0, "var": 1.0}}
LAP = {"family": "laplace", "params": {"d": 1.0}}


def config(pairs, checks, **extra):
    return load_config({"pairs": pairs, "checks": checks, **extra})


def test_identity_checks_pass_for_gaussian_shift():
    cfg = config([{"id": "phi-N(1,1)", "target": G, "q": G1}], ["eq9", "fundeq"])
    records, summary = run(cfg, threads=1)
    t = summary.totals
    assert t["passed"] == len(records) and t["failed"] == 0
    assert max(summary.worst_residual.values()) <= 1e-7
    assert exit_code(summary) == 0


def test_laplace_sign_audit_is_recorded_not_failed():
    cfg = config([{"id": "lap", "target": LAP, "q": LAP}], ["eq17_audit"], h="sign")
    records, summary = run(cfg, threads=1)
    (rec,) = records
    assert rec.verdict == "violated" and "AUDITED-CLAIM" in rec.flags
    ratio = next(float(f.split("=")[1]) for f in rec.flags if f.startswith("ratio="))
    assert abs(ratio - 2.0) < 1e-9 and abs(rec.lhs - 1.0) < 1e-9
    assert summary.totals["audited_violations"] == 1
    assert exit_code(summary) == 0 and exit_code(summary, strict=True) == 2


@pytest.mark.parametrize("data", [
    {"pairs": [], "checks": ["eq9"]},
    {"pairs": [{"target": G, "q": G1}]},
    {"pairs": [{"target": G, "q": G1}], "checks": ["eq99"]},
    {"pairs": [{"target": {"family": "cauchy"}, "q": G1}], "checks": ["eq9"]},
    {"pairs": [{"target": {"family": "gaussian", "params": {"var": -1.0}}, "q": G1}], "checks": ["eq9"]},
    {"pairs": [{"id": "a", "target": G, "q": G1}, {"id": "a", "target": G, "q": G}], "checks": ["eq9"]},
    {"pairs": [{"target": G, "q": G1}], "checks": ["eq9"], "surprise": 1},
])
def test_invalid_configs_rejected(data):
    with pytest.raises(ConfigError):
        load_config(data)


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_checks_follow_fixed_order():
    cfg = config([{"target": G, "q": G1}], ["pinsker", "eq25", "corollary"])
    assert cfg.checks == tuple(c for c in CHECK_ORDER if c in ("pinsker", "eq25", "corollary"))


def test_skips_carry_reasons():
    exp = {"family": "exponential", "params": {"rate": 1.0}}
    cfg = config([{"id": "exp-phi", "target": exp, "q": G}], ["eq9", "pinsker", "eq25", "section5"])
    records, summary = run(cfg, threads=1)
    reasons = {r.check: r.flags for r in records}
    assert reasons["eq9"] == ("reason=support_mismatch",)
    assert reasons["pinsker"] == ("reason=infinite_kl",)
    assert reasons["eq25"] == ("reason=target_not_standard_gaussian",)
    assert reasons["section5"] == ("reason=target_not_gaussian",)
    assert summary.totals["skipped"] == 4
    for r in records:
        assert r.verdict == "skipped" and r.flags[0].startswith("reason=")


def test_counts_cover_every_record():
    cfg = load_config({"pairs": [{"target": G, "q": G1}], "sweep": {"n": 3}, "checks": ["pinsker", "eq25"]})
    records, summary = run(cfg, threads=2)
    assert sum(summary.totals.values()) == len(records)


def test_sweep_is_seeded():
    data = {"sweep": {"n": 5}, "checks": ["pinsker"]}
    a = [p.spec for p in load_config(data).pairs]
    b = [p.spec for p in load_config(data).pairs]
    c = [p.spec for p in load_config(data, seed=99).pairs]
    assert a == b and a != c


def test_csv_rows_have_exact_slack():
    cfg = config([{"id": "phi-N(1,1)", "target": G, "q": G1}], ["pinsker", "eq25"])
    records, _ = run(cfg, threads=1)
    rows = list(csv.DictReader(io.StringIO(render_csv(records))))
    assert tuple(rows[0].keys()) == COLUMNS and len(rows) == 2
    for row in rows:
        assert float(row["slack"]) == float(row["rhs"]) - float(row["lhs"])
        assert float(row["rhs"]) == float(row["kappa"]) * float(row["sqrtJ"])
    tv = rows[0]
    assert tv["check"] == "pinsker" and tv["kappa_source"] == "pinsker"
    assert math.isclose(float(tv["sqrtJ"]), math.sqrt(0.5), rel_tol=1e-9)


def test_json_report_fields(tmp_path):
    cfg = config([{"target": G, "q": G1}], ["pinsker"])
    records, summary = run(cfg, threads=1)
    doc = json.loads(render_json(records, summary, cfg))
    assert {"config", "records", "summary"} <= set(doc)
    assert doc["config"]["checks"] == ["pinsker"] and doc["records"][0]["flags"] == ["sqrtJ=sqrt_kl"]
    path = emit_report(records, summary, cfg, tmp_path / "out", "json")
    assert path.name == "report.json" and json.loads(path.read_text()) == doc


def test_emit_report_is_deterministic_across_thread_counts(tmp_path):
    data = {"pairs": [{"target": G, "q": G1}], "sweep": {"n": 4}, "checks": ["pinsker", "eq25"], "seed": 3}
    ra, sa = run(load_config(data), threads=1)
    rb, sb = run(load_config(data), threads=3)
    pa = emit_report(ra, sa, load_config(data), tmp_path / "a")
    pb = emit_report(rb, sb, load_config(data), tmp_path / "b")
    assert pa.read_bytes() == pb.read_bytes()


def test_emit_report_rejects_empty_results(tmp_path):
    cfg = config([{"target": G, "q": G1}], ["pinsker"])
    _, summary = run(cfg, threads=1)
    with pytest.raises(ValueError):
        emit_report([], summary, cfg, tmp_path)


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv("STEIN_AUDIT_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("STEIN_AUDIT_THREADS", "zero")
    with pytest.raises(ConfigError):
        thread_count()
    monkeypatch.setenv("STEIN_AUDIT_THREADS", "0")
    with pytest.raises(ConfigError):
        thread_count()


def test_tol_override_is_echoed():
    cfg = load_config({"pairs": [{"target": G, "q": G1}], "checks": ["eq9"]}, tol=1e-11, seed=5)
    assert cfg.tolerances.abs_tol == 1e-11 and cfg.seed == 5
    assert cfg.raw["tolerances"]["abs_tol"] == 1e-11 and cfg.raw["seed"] == 5
