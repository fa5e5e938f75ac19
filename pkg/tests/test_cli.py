import csv
import json
import subprocess
import sys

import pytest

from stdmap_lab.cli import main
from stdmap_lab.presets import PRESETS, get_preset, list_presets
from stdmap_lab.results import CSV_COLUMNS, ResultTable, calibrated_envelope, ls_envelope, read_csv
from stdmap_lab.runner import ConfigError, ExperimentConfig, emit_report, run


def write_config(tmp_path, **d):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(d))
    return str(p)


def test_linear_oracle_preset_passes(tmp_path, capsys):
    out = tmp_path / "lin"
    assert main(["run", "--preset", "linear-oracle", "--out", str(out)]) == 0
    assert capsys.readouterr().out.startswith("PASS ")
    man = json.loads((out / "manifest.json").read_text())
    assert man["schema_version"] == 1 and man["summary"]["exit_status"] == 0
    assert man["preset"] == "linear-oracle" and man["wall_time_seconds"] >= 0
    rows = read_csv(out / "results.csv")
    assert rows and all(r["pass"] == "true" for r in rows)


def test_module_entry_point_exit_codes(tmp_path):
    cfg = write_config(tmp_path, experiment="hypotheses", eta=0.4)
    r = subprocess.run([sys.executable, "-m", "stdmap_lab", "run", "--config", cfg],
                       capture_output=True, text=True)
    assert r.returncode == 2
    assert "eta must lie in (1/2, 1)" in r.stderr
    r = subprocess.run([sys.executable, "-m", "stdmap_lab", "run", "--preset", "nope"],
                       capture_output=True, text=True)
    assert r.returncode == 2 and "unknown preset" in r.stderr


@pytest.mark.parametrize("field, value, message", [
    ("eta", 1.0, "eta: eta must lie in (1/2, 1)"),
    ("alpha", 0.0, "alpha: alpha must lie in (0, 1]"),
    ("threads", 0, "threads: positive integer required"),
    ("observables", ["nope"], "observables: unknown id 'nope'"),
    ("bogus", 1, "bogus: unknown field"),
])
def test_config_diagnostics(field, value, message):
    d = {"experiment": "clt", "observables": ["cos2pix"], field: value}
    with pytest.raises(ConfigError) as e:
        ExperimentConfig.from_dict(d)
    assert message in e.value.problems


def test_flags_override_config(tmp_path):
    cfg = write_config(tmp_path, experiment="hypotheses", params={"L_list": [100.0]}, seed=3)
    out = tmp_path / "o"
    assert main(["run", "--config", cfg, "--seed", "9", "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 9 and man["config"]["output"] == str(out)


def test_same_seed_gives_identical_csv(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--preset", "clt-constant-L", "--seed", "5", "--threads", "1", "--out", str(a)]) == 0
    assert main(["run", "--preset", "clt-constant-L", "--seed", "5", "--threads", "2", "--out", str(b)]) == 0
    assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()


def test_list_presets(capsys):
    assert main(["list-presets"]) == 0
    text = capsys.readouterr().out
    for name in ("thmD-finite-mixing", "sigma-tail-square", "coboundary-degenerate"):
        assert name in text
    assert "square of side 0.1" in PRESETS["sigma-tail-square"].provenance
    assert "coboundary" in PRESETS["coboundary-degenerate"].provenance
    assert text == list_presets() + "\n"
    with pytest.raises(KeyError):
        get_preset("missing")


def test_every_preset_builds():
    for p in PRESETS.values():
        cfg = p.build(seed=1)
        assert cfg.seed == 1 and cfg.experiment


def _table(tmp_path, rows, name="r"):
    tab = ResultTable()
    for r in rows:
        tab.add(*r)
    out = tmp_path / name
    out.mkdir()
    tab.write_csv(out / "results.csv")
    (out / "manifest.json").write_text(json.dumps({"summary": {"error": None}, "fitted_constants": {"x": 1.5}}))
    return out


def test_report_pass_fail_and_empty(tmp_path, capsys):
    ok = _table(tmp_path, [("e", "a", {}, 1.0, 0.1, 2.0, 1.0, True), ("e", "b", {}, 1.0, 0.1, 2.0, 1.0, True)], "ok")
    assert emit_report(ok).splitlines()[0] == "PASS 2/2"
    bad = _table(tmp_path, [("e", "a", {}, 1.0, 0.1, 2.0, 1.0, True), ("e", "b/L=10", {}, 5.0, 0.1, 2.0, 1.5, False)], "bad")
    rep = emit_report(bad)
    assert rep.splitlines()[0] == "FAIL 1/2"
    assert "failed e:b/L=10 estimate=5.0" in rep and "theory_shape=2.0" in rep and "fitted_constant=1.5" in rep
    empty = _table(tmp_path, [], "empty")
    assert "no rows" in emit_report(empty)
    with pytest.raises(FileNotFoundError):
        emit_report(tmp_path / "missing")
    assert main(["report", str(tmp_path / "missing")]) == 2
    assert "missing run artifacts" in capsys.readouterr().err


def test_numeric_failure_sets_status(tmp_path):
    cfg = ExperimentConfig.from_dict({"experiment": "clt", "observables": ["cos2pix-cos2piy"],
                                      "schedule": {"kind": "constant", "L": 1e6},
                                      "ensemble": {"samples": 200, "time": 20}})
    status = run(cfg, tmp_path / "num")
    man = json.loads((tmp_path / "num" / "manifest.json").read_text())
    assert status == 1 and man["summary"]["error"]["type"] == "ContractError"
    assert emit_report(tmp_path / "num").startswith("ERROR ContractError")


def test_csv_format(tmp_path):
    tab = ResultTable()
    tab.add("e", "r,1", {"b": 2, "a": "x\"y"}, 0.5, float("nan"), 1.0, 2.0, False)
    tab.write_csv(tmp_path / "t.csv")
    raw = (tmp_path / "t.csv").read_bytes()
    assert raw.startswith(",".join(CSV_COLUMNS).encode() + b"\r\n")
    rows = list(csv.reader(open(tmp_path / "t.csv", newline="")))
    assert rows[1][1] == "r,1"
    assert json.loads(rows[1][2]) == {"a": "x\"y", "b": 2}
    assert rows[1][2].index('"a"') < rows[1][2].index('"b"')
    assert rows[1][4] == "nan" and rows[1][7] == "false"


def test_envelope_rules():
    fit = ls_envelope([1.0, 0.5, 0.0], [0.01, 0.01, 0.01], [1.0, 0.5, 0.25])
    assert fit.constant == pytest.approx(1.0) and fit.all_pass
    fit = ls_envelope([0.001], [0.01], [1.0])
    assert fit.constant == 0.0 and fit.all_pass
    fit = calibrated_envelope([1.0, 0.9], [0.01, 0.01], [1.0, 0.5], [True, False])
    assert fit.constant == 1.0 and list(fit.passed) == [True, False]
