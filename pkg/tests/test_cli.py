import csv
import json
from pathlib import Path

import pytest

from semiflow.cli import RunReport, main, run
from semiflow.exceptions import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def strip_timing(text):
    d = json.loads(text)
    d.pop("timing")
    return d


@pytest.mark.parametrize("name, command, code", [
    ("ctmc_exponential.json", "verify", 0),
    ("diagonal_rapid_exponential.json", "verify", 2),
    ("negative_tolerance.json", "verify", 1),
    ("diagonal_rapid_rapid.json", "verify", 0),
])
def test_example_exit_codes(tmp_path, name, command, code):
    assert main([command, "--config", str(CONFIGS / name), "--output-dir", str(tmp_path)]) == code


def test_negative_tolerance_message(tmp_path, capsys):
    main(["verify", "--config", str(CONFIGS / "negative_tolerance.json"), "--output-dir", str(tmp_path)])
    assert "tolerances must be > 0" in capsys.readouterr().err


@pytest.mark.parametrize("command", ["decompose", "verify", "ledger", "reconstruct", "scan"])
def test_determinism(tmp_path, command):
    cfg = str(CONFIGS / "ctmc_exponential.json")
    run(command, cfg, tmp_path / "a", seed=11)
    run(command, cfg, tmp_path / "b", seed=11)
    a = (tmp_path / "a" / "report.json").read_text()
    b = (tmp_path / "b" / "report.json").read_text()
    assert strip_timing(a) == strip_timing(b)
    for f in (tmp_path / "a").glob("*.csv"):
        assert f.read_text() == (tmp_path / "b" / f.name).read_text()


def test_report_round_trip(tmp_path):
    code, report = run("verify", str(CONFIGS / "ctmc_exponential.json"), tmp_path)
    assert code == 0
    text = (tmp_path / "report.json").read_text()
    again = RunReport.parse(text)
    assert again == report
    assert again.serialize() == text
    assert json.loads(text)["summary"]["passed"] is True


def test_report_schema_version(tmp_path):
    run("scan", str(CONFIGS / "ctmc_exponential.json"), tmp_path)
    d = json.loads((tmp_path / "report.json").read_text())
    d["schema_version"] = 99
    with pytest.raises(ConfigError, match="schema_version"):
        RunReport.parse(json.dumps(d))


def test_csv_format(tmp_path):
    run("verify", str(CONFIGS / "ctmc_exponential.json"), tmp_path)
    files = {f.name for f in tmp_path.glob("*.csv")}
    assert {"scan_c1.csv", "scan_dolgopyat.csv", "decay_probe0.csv"} <= files
    with open(tmp_path / "decay_probe0.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "remainder_norm_A", "bound"]
    for row in rows[1:]:
        for v in row:
            assert float(format(float(v), ".17g")) == float(v)
            assert v == format(float(v), ".17g")


def test_report_has_no_raw_nan(tmp_path):
    run("verify", str(CONFIGS / "diagonal_rapid_exponential.json"), tmp_path)
    text = (tmp_path / "report.json").read_text()
    assert "NaN" not in text and "Infinity" not in text
    assert json.loads(text)["summary"]["failed_checks"]


@pytest.mark.parametrize("patch, match", [
    ({"model": {"type": "nope"}}, ""),
    ({"pipeline": "other"}, ""),
    ({"params": {"lambda": -1.0}}, ""),
    ({"grids": {"t": [1.0]}}, ""),
])
def test_schema_errors(tmp_path, capsys, patch, match):
    cfg = json.loads((CONFIGS / "ctmc_exponential.json").read_text())
    cfg.update(patch)
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(cfg))
    assert main(["scan", "--config", str(p), "--output-dir", str(tmp_path / "o")]) == 1
    assert capsys.readouterr().err.startswith("error:")


def test_missing_and_malformed_config(tmp_path):
    assert main(["scan", "--config", str(tmp_path / "none.json")]) == 1
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["scan", "--config", str(p), "--output-dir", str(tmp_path)]) == 1


def test_bad_seed(tmp_path):
    assert main(["scan", "--config", str(CONFIGS / "ctmc_exponential.json"), "--seed", "-1",
                 "--output-dir", str(tmp_path)]) == 1


def test_stdout_summary(tmp_path, capsys):
    main(["ledger", "--config", str(CONFIGS / "ctmc_exponential.json"), "--output-dir", str(tmp_path)])
    assert capsys.readouterr().out.startswith("ledger: PASS")
