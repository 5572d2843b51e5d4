import csv
import json
import os

import pytest

from gfcalc.cli import CONFIG_SCHEMA, ConfigError, main, parse_config
from gfcalc.battery import BATTERY_VERSION
from gfcalc.report import REPORT_SCHEMA, dumps, fmt


def _config(tmp_path, **over):
    cfg = {
        "schema": CONFIG_SCHEMA,
        "command": "delta-verify",
        "mollifier": "bump",
        "dimension": 1,
        "ladder": {"k_min": 4, "k_max": 10, "base": 2},
        "output": {"dir": str(tmp_path / "out"), "prefix": "run", "figures": False},
    }
    cfg.update(over)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_delta_verify_golden(tmp_path, capsys):
    assert main(["delta-verify", "--config", str(_config(tmp_path))]) == 0
    out = tmp_path / "out"
    rows = _rows(out / "run_residuals.csv")
    assert len(rows) == 7
    assert [r["fitted_order"] for r in rows[:-1]] == [""] * 6
    assert float(rows[-1]["fitted_order"]) == pytest.approx(1.0, abs=0.01)
    assert float(rows[-1]["residual"]) <= 1e-3
    summary = json.loads((out / "run_summary.json").read_text())
    assert summary["schema"] == REPORT_SCHEMA and summary["passed"] is True
    assert not (out / "run_residuals.png").exists()
    assert "PASS" in capsys.readouterr().out


def test_verdict_failure_exit_code(tmp_path):
    path = _config(tmp_path, ladder={"k_min": 4, "k_max": 6})
    assert main(["delta-verify", "--config", str(path)]) == 1
    assert json.loads((tmp_path / "out" / "run_summary.json").read_text())["passed"] is False


def test_flags_override_config_and_write_figures(tmp_path):
    path = _config(tmp_path)
    out = tmp_path / "figs"
    code = main(["delta-verify", "--config", str(path), "--k-min", "4", "--k-max", "6",
                 "--tolerance", "1e-1", "--out", str(out), "--prefix", "f"])
    assert code == 0
    assert len(_rows(out / "f_residuals.csv")) == 3


def test_figures_written_by_default(tmp_path):
    out = tmp_path / "png"
    code = main(["delta-verify", "--mollifier", "bump", "--dimension", "1", "--k-min", "4", "--k-max", "6",
                 "--tolerance", "0.1", "--out", str(out), "--prefix", "p"])
    assert code == 0
    png = out / "p_residuals.png"
    assert png.exists() and png.read_bytes()[:4] == b"\x89PNG"


def test_solve_summary(tmp_path):
    out = tmp_path / "solve"
    code = main(["solve", "--operator", "laplace_1d", "--k-min", "4", "--k-max", "7", "--out", str(out),
                 "--prefix", "s", "--no-figures", "--tolerance", "1e-2"])
    assert code == 0
    s = json.loads((out / "s_summary.json").read_text())
    assert s["verdicts"]["weak"]["fitted_order"] > 1.5
    assert s["verdicts"]["strong"]["fitted_order"] > 1.5
    rows = _rows(out / "s_residuals.csv")
    assert len(rows) == 4 and rows[-1]["weak_fitted_order"] and rows[-1]["strong_fitted_order"]
    assert (out / "s_standard_part.csv").exists()


def test_deterministic_reports(tmp_path):
    texts = []
    out = tmp_path / "det"  # the output directory is part of the recorded config
    for _ in range(2):
        main(["stpart", "--k-min", "4", "--k-max", "6", "--seed", "7", "--out", str(out), "--prefix", "x",
              "--no-figures", "--tolerance", "0.1"])
        texts.append(((out / "x_residuals.csv").read_bytes(), (out / "x_summary.json").read_bytes()))
    assert texts[0] == texts[1]


def test_base_one_is_rejected(tmp_path, capsys):
    assert main(["delta-verify", "--config", str(_config(tmp_path)), "--base", "1"]) == 2
    assert "ladder.base" in capsys.readouterr().err


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"ladder": {"k_min": 4, "k_max": 10, "step": 1}}, "ladder.step"),
        ({"extra": 1}, "extra"),
        ({"mollifier": "triangle"}, "mollifier"),
        ({"command": "solve"}, "operator"),
        ({"ladder": {"k_min": 4, "k_max": 5}}, "ladder"),
        ({"schema": "other/9"}, "schema"),
    ],
)
def test_config_errors_name_the_field(patch, field):
    raw = {"schema": CONFIG_SCHEMA, "command": "delta-verify", "dimension": 1}
    raw.update(patch)
    with pytest.raises(ConfigError) as info:
        parse_config(raw)
    assert field in str(info.value)


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code = main(["delta-verify", "--config", str(_config(tmp_path)), "--out", str(blocker / "sub")])
    assert code == 2
    assert "output.dir" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["delta-verify", "--config", str(tmp_path / "nope.json")]) == 2


@pytest.mark.parametrize("d", [1, 2, 3])
def test_battery_list_json(d, capsys):
    assert main(["battery-list", "--dimension", str(d), "--json"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["version"] == BATTERY_VERSION and len(rec["members"]) == 15


def test_battery_list_text(capsys):
    assert main(["battery-list"]) == 0
    assert BATTERY_VERSION in capsys.readouterr().out


def test_float_format_round_trips():
    for x in (0.1, 1 / 3, 2.0**-40, 1e300):
        assert float(fmt(x)) == x
    assert json.loads(dumps({"a": [1 / 3, None, True]})) == {"a": [1 / 3, None, True]}
