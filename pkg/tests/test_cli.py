import json
import math

import numpy as np
import pytest

from ncgw import cli, outputs
from ncgw import states as st


def write_config(tmp_path, obj):
    path = tmp_path / "cfg.json"
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(path)


def test_validate_lists_printed_mismatches(capsys):
    assert cli.main(["validate"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert out.count("[mismatch]") >= 3
    assert "quasi_algebra.[H_c,px]" in out
    assert "coeff.alpha" in out


def test_kappa_below_bound_is_config_error(tmp_path, capsys):
    code = cli.main(["validate", "--config", write_config(tmp_path, {"kappa": 0.4})])
    assert code == cli.EXIT_CONFIG
    assert "kappa" in capsys.readouterr().err


def test_zero_eta_is_config_error(tmp_path, capsys):
    code = cli.main(["coeffs", "--config", write_config(tmp_path, {"theta": 0.0, "eta": 0.0})])
    assert code == cli.EXIT_CONFIG
    assert "eta must be positive" in capsys.readouterr().err


def test_json_syntax_error_reports_position(tmp_path, capsys):
    code = cli.main(["coeffs", "--config", write_config(tmp_path, '{"m": 1,\n "g": }')])
    assert code == cli.EXIT_CONFIG
    assert "line 2 column" in capsys.readouterr().err


@pytest.mark.parametrize("obj", [{"m": 1.0, "foo": 2}, {"params": {"m": 1.0}, "grid": {"n": 128}, "bar": 1}])
def test_unknown_key_is_config_error(tmp_path, capsys, obj):
    code = cli.main(["coeffs", "--config", write_config(tmp_path, obj)])
    assert code == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "foo" in err or "bar" in err
    assert "eta" not in err


def test_bad_grid_is_config_error(capsys):
    assert cli.main(["coeffs", "--grid", "100"]) == cli.EXIT_CONFIG
    assert "power of two" in capsys.readouterr().err


def test_flat_config_merges_over_defaults():
    cfg = cli.config_from_text('{"tau": 1.5}')
    assert cfg.params.tau == 1.5
    assert cfg.params.eta == cli.R0["eta"]


def test_nested_config():
    cfg = cli.config_from_text(json.dumps({"params": {"g": 2.0}, "grid": {"n": 64}, "times": {"samples": 33}}))
    assert cfg.params.g == 2.0 and cfg.grid_n == 64 and cfg.samples == 33


def test_config_hash_ignores_output_dir():
    a = cli.config_from_text(json.dumps({"params": {}, "output_dir": "a"}))
    b = cli.config_from_text(json.dumps({"params": {}, "output_dir": "b"}))
    assert a.hash() == b.hash()
    c = cli.config_from_text(json.dumps({"params": {"g": 2.0}}))
    assert c.hash() != a.hash()


def test_coeffs_csv(tmp_path):
    assert cli.main(["coeffs", "--out", str(tmp_path), "--samples", "17"]) == cli.EXIT_OK
    text = (tmp_path / "coeffs.csv").read_text()
    assert text.startswith("# config_sha256=")
    header, rows = outputs.read_csv(tmp_path / "coeffs.csv")
    assert len(header) == 11
    assert len(rows) == 17
    assert all(len(r) == 11 for r in rows)


def test_state_dump(tmp_path, capsys):
    assert cli.main(["state", "--out", str(tmp_path), "--grid", "64", "--t", "1.0"]) == cli.EXIT_OK
    info = json.loads(capsys.readouterr().out)
    w = st.read_dump(info["dump"])
    assert w.grid.n >= 64
    assert info["norm"] == pytest.approx(1.0, abs=1e-8)


def test_evolve_random_mixture(tmp_path, capsys):
    code = cli.main(["evolve", "--out", str(tmp_path), "--random", "--seed", "3", "--t-end", "0.5", "--order", "4"])
    assert code == cli.EXIT_OK
    res = json.loads((tmp_path / "evolve.json").read_text())
    assert res["invariant_drift"] < 1e-6


def test_atomic_write_leaves_no_temporaries(tmp_path):
    outputs.write_csv(tmp_path / "a.csv", ["x"], [[1.0]], "h")
    outputs.write_csv(tmp_path / "a.csv", ["x"], [[2.0]], "h")
    assert [p.name for p in tmp_path.iterdir()] == ["a.csv"]
    assert outputs.read_csv(tmp_path / "a.csv") == (["x"], [["2.0"]])


def test_csv_float_round_trip(tmp_path):
    vals = [math.pi, 1e-300, -0.1, math.nan, math.inf, 3]
    outputs.write_csv(tmp_path / "v.csv", ["v"], [[v] for v in vals], "h")
    _, rows = outputs.read_csv(tmp_path / "v.csv")
    back = [float(r[0]) for r in rows]
    assert back[:3] == vals[:3] and math.isnan(back[3]) and back[4:] == [math.inf, 3.0]


def test_check_or_record(tmp_path):
    first = outputs.check_or_record(tmp_path, "probe", {"a": 1.0})
    assert first["status"] == "recorded"
    assert outputs.check_or_record(tmp_path, "probe", {"a": 1.0 + 1e-12})["status"] == "match"
    assert outputs.check_or_record(tmp_path, "probe", {"a": 1.1})["status"] == "mismatch"
    assert outputs.check_or_record(tmp_path, "probe", {"b": 1.0})["status"] == "mismatch"


def test_fixtures_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("NCGW_FIXTURES", str(tmp_path))
    cfg = cli.config_from_text(json.dumps({"params": {}, "output_dir": "elsewhere"}))
    assert cfg.fixtures() == tmp_path


def test_svg_is_deterministic(tmp_path):
    x = np.linspace(0, 1, 20)
    a = outputs.plot_lines(tmp_path / "a.svg", x, {"s": np.sin(x)}, "x", "y")
    b = outputs.plot_lines(tmp_path / "b.svg", x, {"s": np.sin(x)}, "x", "y")
    assert a.read_bytes() == b.read_bytes()
