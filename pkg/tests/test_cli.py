import json

from stein_audit.cli import main


def write_config(tmp_path, data):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return str(path)


PAIR = {"id": "phi-N(1,1)", "target": {"family": "gaussian", "params": {}},
        "q": {"family": "gaussian", "params": {"mu": 1.0, "var": 1.0}}}
LAPLACE = {"id": "laplace", "target": {"family": "laplace", "params": {"d": 1.0}},
           "q": {"family": "laplace", "params": {"d": 1.0}}}


def test_run_writes_csv_and_exits_zero(tmp_path, capsys):
    cfg = write_config(tmp_path, {"pairs": [PAIR], "checks": ["pinsker", "eq25"]})
    code = main(["run", "--config", cfg, "--out", str(tmp_path / "out")])
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["totals"]["passed"] == 2 and "wall_time" in summary
    assert (tmp_path / "out" / "report.csv").read_text().startswith("pair_id,check,metric,")


def test_run_json_format(tmp_path):
    cfg = write_config(tmp_path, {"pairs": [PAIR], "checks": ["pinsker"]})
    assert main(["run", "--config", cfg, "--out", str(tmp_path), "--format", "json", "--seed", "4"]) == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["config"]["seed"] == 4


def test_audited_violation_only_fails_with_strict(tmp_path):
    cfg = write_config(tmp_path, {"pairs": [LAPLACE], "checks": ["eq17_audit"], "h": "sign"})
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert main(["run", "--config", cfg, "--out", str(tmp_path), "--strict"]) == 2


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, {"pairs": [], "checks": ["eq9"]})
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 1
    assert "config error" in capsys.readouterr().err


def test_list_families(capsys):
    assert main(["list-families"]) == 0
    out = capsys.readouterr().out
    for name in ("gaussian", "exponential", "beta", "power_exponential", "laplace", "logistic"):
        assert name in out
