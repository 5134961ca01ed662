import csv
import json
import math
import re
import subprocess
import sys
from pathlib import Path

import pytest
from hypothesis import assume, given, settings, strategies as st

import gexprisk
from gexprisk.cli import main
from gexprisk.config import ConfigError, ScenarioConfig, config_from_echo, csv_cell, dumps, loads

SCENARIOS = Path(gexprisk.__file__).parent / "scenarios"


def write_ini(tmp_path, text, name="cfg.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


# --- configuration -----------------------------------------------------------

def test_defaults_are_valid():
    cfg = ScenarioConfig.from_dict({})
    assert cfg.grid["n_paths"] == 50000 and cfg.model["preset"] == "gaussian"
    assert cfg.constraint["lower"] == -math.inf


@pytest.mark.parametrize("data, field", [
    ({"bogus": {}}, "bogus"),
    ({"grid": {"nsteps": 10}}, "grid.nsteps"),
    ({"scenario": {"t0": 1.0, "T": 1.0}}, "scenario.T"),
    ({"grid": {"n_paths": 0}}, "grid.n_paths"),
    ({"grid": {"n_paths": 101}}, "grid.n_paths"),
    ({"grid": {"n_steps": "ten"}}, "grid.n_steps"),
    ({"generator": {"family": "cubic"}}, "generator.family"),
    ({"generator": {"level": -1}}, "generator.level"),
    ({"generator": {"decay": -0.1}}, "generator.decay"),
    ({"constraint": {"lower": 1, "upper": 0}}, "constraint.lower"),
    ({"model": {"preset": "heston"}}, "model.preset"),
    ({"model": {"preset": "ou", "drift": 1.0}}, "model.drift"),
    ({"payoff": {"preset": "linear", "strike": 1.0}}, "payoff.strike"),
    ({"grid": {"antithetic": "maybe"}}, "grid.antithetic"),
])
def test_validation_names_field(data, field):
    with pytest.raises(ConfigError) as err:
        ScenarioConfig.from_dict(data)
    assert err.value.field == field


def test_preset_defaults_filled():
    cfg = ScenarioConfig.from_dict({"model": {"preset": "ou", "kappa": "2"}})
    assert cfg.model["kappa"] == 2.0 and "vol" in cfg.model


def test_ini_round_trip(tmp_path):
    cfg = ScenarioConfig.load(SCENARIOS / "case1_strategy.ini")
    assert cfg.generator == {"family": "case1_sqrt", "level": 0.5, "decay": 0.0}
    assert ScenarioConfig.from_dict(loads(cfg.to_json())) == cfg


def test_overrides():
    cfg = ScenarioConfig.from_dict({}).with_overrides(seed=7, n_paths=10, n_steps=5, out_dir="x")
    assert (cfg.grid["seed"], cfg.grid["n_paths"], cfg.grid["n_steps"], cfg.output["dir"]) == (7, 10, 5, "x")


def test_missing_file():
    with pytest.raises(ConfigError):
        ScenarioConfig.load("/nonexistent.ini")


finite = st.floats(allow_nan=False, allow_infinity=False)
json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-10**12, 10**12) | st.floats() | st.text(max_size=5),
    lambda inner: st.lists(inner, max_size=4) | st.dictionaries(st.text(max_size=4), inner, max_size=4),
    max_leaves=12,
)


def _same(a, b):
    if isinstance(a, float) and math.isnan(a):
        return isinstance(b, float) and math.isnan(b)
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(_same(a[k], b[k]) for k in a)
    if isinstance(a, list):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    return a == b and type(a) is type(b)


@settings(max_examples=200, deadline=None)
@given(json_values)
def test_dumps_round_trip(obj):
    # the strings "nan"/"inf"/"-inf" are reserved for non-finite floats
    assume(not re.search(r'"-?(nan|inf)"', json.dumps(obj)))
    assert _same(loads(dumps(obj)), obj)


@settings(max_examples=200, deadline=None)
@given(finite)
def test_float_exact_round_trip(v):
    assert loads(dumps(v)) == v


def test_csv_cell_format():
    assert csv_cell(1 / 3) == "0.333333333333"
    assert csv_cell(True) == "true" and csv_cell(None) == "" and csv_cell(math.inf) == "inf"


# --- command line ------------------------------------------------------------

def test_strategy_report(tmp_path):
    code = main(["strategy", "--config", str(SCENARIOS / "case1_strategy.ini"), "--out", str(tmp_path), "--quiet"])
    assert code == 0
    rows = read_csv(tmp_path / "strategy.csv")
    assert {float(r["pi_bar"]) for r in rows} == {3.75}
    doc = loads((tmp_path / "strategy.json").read_text())
    assert doc["result"]["y_bar"] == pytest.approx(-1.1, abs=1e-12)
    assert config_from_echo(tmp_path / "strategy.csv") == config_from_echo(tmp_path / "strategy.json")


def test_price_and_hedge_reports(tmp_path):
    cfg = str(SCENARIOS / "gaussian_price.ini")
    assert main(["price", "--config", cfg, "--out", str(tmp_path), "--quiet", "--paths", "20000"]) == 0
    assert main(["hedge", "--config", cfg, "--out", str(tmp_path), "--quiet", "--paths", "20000"]) == 0
    price = loads((tmp_path / "price.json").read_text())["result"]
    hedge = loads((tmp_path / "hedge.json").read_text())["result"]
    assert abs(price["q"] - 0.7) <= 3 * price["std_err"]
    assert abs(hedge["delta"] + 5.0) <= 3 * hedge["std_err"]
    assert config_from_echo(tmp_path / "price.json").grid["n_paths"] == 20000


def test_infeasible_exit_code(tmp_path, capsys):
    code = main(["strategy", "--config", str(SCENARIOS / "case2_infeasible.ini"), "--out", str(tmp_path), "--quiet"])
    assert code == 3
    rep = loads((tmp_path / "feasibility.json").read_text())["result"]
    assert rep["regime"] == "infeasible-unbounded" and rep["feasible"] is False
    assert "infeasible" in capsys.readouterr().err


def test_validation_exit_code(tmp_path, capsys):
    path = write_ini(tmp_path, "[grid]\nn_pathz = 10\n")
    assert main(["simulate", "--config", path, "--out", str(tmp_path)]) == 2
    assert "grid.n_pathz" in capsys.readouterr().err


def test_simulate_and_polar(tmp_path):
    assert main(["simulate", "--out", str(tmp_path), "--paths", "200", "--steps", "10", "--quiet"]) == 0
    rows = read_csv(tmp_path / "simulate.csv")
    assert len(rows) == 11 and float(rows[0]["std"]) == 0.0
    assert main(["polar", "--out", str(tmp_path), "--quiet"]) == 0
    polar = read_csv(tmp_path / "polar.csv")
    for r in polar:
        if r["finite"] == "true":
            assert float(r["G"]) == pytest.approx(float(r["G_numeric"]), abs=1e-7)


def test_risk_report(tmp_path):
    path = write_ini(tmp_path, "[model]\npreset = gaussian\nalpha = 0.5\nbeta = 1\n"
                               "[generator]\nfamily = case3_huber\nlevel = 2\n[grid]\nn_paths = 20000\nn_steps = 50\n")
    assert main(["risk", "--config", path, "--out", str(tmp_path), "--quiet"]) == 0
    res = loads((tmp_path / "risk.json").read_text())["result"]
    assert res["rho_optimal"] == pytest.approx(-0.0625, abs=2e-2)
    assert res["y_bar"] == pytest.approx(-0.0625, abs=1e-12)
    assert res["rho_zero"] - res["rho_optimal"] > 3 * res["paired_se"]


def test_reports_are_byte_identical(tmp_path):
    args = ["price", "--config", str(SCENARIOS / "gaussian_price.ini"), "--paths", "4000", "--quiet"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "price.json").read_bytes() == (tmp_path / "b" / "price.json").read_bytes()


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "gexprisk.cli", "polar", "--out", str(tmp_path), "--quiet"],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr


def test_full_benchmark_matrix_passes(tmp_path):
    code = main(["verify", "--config", str(SCENARIOS / "benchmarks.ini"), "--out", str(tmp_path), "--quiet"])
    rows = read_csv(tmp_path / "verify.csv")
    failed = [(r["check"], r["case"], r["error"], r["tolerance"]) for r in rows if r["passed"] != "true"]
    assert not failed
    assert code == 0
