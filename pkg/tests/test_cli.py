from __future__ import annotations

import csv
import json

import pytest

from rollfly.cli import main
from rollfly.sim import ConfigError, parse_config

SHORT_ROLL = {
    "vehicle": {"preset": "titan_table1_roll"},
    "terrain": {"kind": "flat", "rolling_resistance": 0.05},
    "segments": [{"mode": "rolling", "speed_mps": 0.2}],
    "dt_s": 0.01,
    "duration_s": 60.0,
    "initial_speed_mps": 0.2,
    "log_every": 10,
    "settle_s": 20.0,
    "controller": {"integral_limit": 5.0},
}


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_range_curve_outputs(tmp_path):
    out = tmp_path / "roll.csv"
    assert main(["range-curve", "--mode", "roll", "--slope-deg", "0", "--crr", "0.01",
                 "--samples", "30", "--out", str(out)]) == 0
    rows = _rows(out)
    assert rows[0] == ["v_mps", "power_W", "range_km"]
    assert len(rows) == 31
    side = json.loads(out.with_suffix(".json").read_text())
    assert side["v_star_mps"] > 0 and side["range_star_km"] > 0
    assert (tmp_path / "roll.manifest.json").exists()


def test_range_curve_flying_marks_infeasible(tmp_path):
    out = tmp_path / "fly.csv"
    assert main(["range-curve", "--mode", "fly", "--samples", "20", "--out", str(out)]) == 0
    assert any(r[2] == "nan" for r in _rows(out)[1:])


def test_crr_out_of_range_is_usage_error(tmp_path, capsys):
    code = main(["range-curve", "--mode", "roll", "--crr", "1.5", "--out", str(tmp_path / "x.csv")])
    assert code == 2
    assert "crr" in capsys.readouterr().err.lower()


def test_unknown_flag_is_usage_error(capsys):
    assert main(["coverage", "--range-km", "1", "--bogus"]) == 2


def test_infeasible_regime_exit_code(tmp_path):
    code = main(["range-curve", "--mode", "fly", "--v-min", "5", "--v-max", "20", "--samples", "5",
                 "--out", str(tmp_path / "f.csv")])
    assert code == 3


@pytest.mark.parametrize("km, area", [("130", 13273.23), ("260", 53092.92), ("0", 0.0)])
def test_coverage_prints_area(km, area, capsys):
    assert main(["coverage", "--range-km", km]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["area_km2"] == pytest.approx(area, abs=0.01)


def test_coverage_negative_range(capsys):
    assert main(["coverage", "--range-km", "-5"]) == 2


def test_advantage_map_single_cell(tmp_path):
    assert main(["advantage-map", "--resolution", "1", "--out", str(tmp_path)]) == 0
    assert len(_rows(tmp_path / "advantage_map.csv")) == 2
    assert _rows(tmp_path / "crossover.csv") == [["slope_deg", "crr"]]


def test_advantage_map_shape_and_replay(tmp_path):
    out = tmp_path / "map"
    assert main(["advantage-map", "--resolution", "3", "--out", str(out)]) == 0
    assert len(_rows(out / "advantage_map.csv")) == 3 * 3 + 1
    assert main(["replay", str(out / "manifest.json"), "--out", str(tmp_path / "again")]) == 0


def test_simulate_writes_log_and_audit(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(SHORT_ROLL))
    out = tmp_path / "run"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    audit = json.loads((out / "audit.json").read_text())
    assert abs(audit["relative_error"]) < 0.02
    assert audit["energy_audit"]["closure"] < 5e-3
    header = _rows(out / "log.csv")[0]
    assert header[0] == "t_s" and header[-1] == "in_contact" and len(header) == 27
    # the manifest embeds the config, so replay works after the source file is gone
    cfg.unlink()
    assert main(["replay", str(out / "manifest.json"), "--out", str(tmp_path / "again")]) == 0


def test_simulate_zero_duration_is_usage_error(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({**SHORT_ROLL, "duration_s": 0}))
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "duration_s" in capsys.readouterr().err


def test_simulate_missing_config_is_io_error(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 4


def test_config_error_names_field_path():
    bad = {**SHORT_ROLL, "segments": [{"mode": "rolling", "speed_mps": "fast"}]}
    with pytest.raises(ConfigError, match=r"segments\.0\.speed_mps"):
        parse_config(bad)


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="colour"):
        parse_config({**SHORT_ROLL, "colour": "red"})


def test_config_rejects_large_dt():
    with pytest.raises(ConfigError, match="dt_s"):
        parse_config({**SHORT_ROLL, "dt_s": 0.05})
