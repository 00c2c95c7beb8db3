import json
import math
import subprocess
import sys

import numpy as np
import pytest

from averseek.harness import cli
from averseek.harness.config import ConfigError, parse_config, parse_probe_config
from averseek.harness.io import read_csv
from averseek.harness.scenarios import builtin_config, expand_grid, run_scenario, simulate, sweep


def base(**kw):
    raw = {"schema_version": 1, "scheme": "classical", "horizon": 5.0, "samples": 51}
    raw.update(kw)
    return raw


def write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return str(path)


@pytest.mark.parametrize(
    "raw",
    [
        base(extra=1),
        base(schema_version=2),
        base(scheme="nope"),
        base(parameters={"omega_l": 1.0}),
        base(horizon=0.0),
        base(horizon=-1),
        base(parameters={"a": "big"}),
        base(integrator={"rtol": 0}),
        base(integrator={"method": "rk4"}),
        base(outputs=["plot"]),
        base(seed=1.5),
        base(name="a/b"),
        base(initial_state=[]),
    ],
)
def test_config_rejects_invalid(raw):
    with pytest.raises(ConfigError):
        parse_config(raw)


def test_config_defaults_and_round_trip():
    cfg = parse_config({"schema_version": 1, "scheme": "source"})
    assert cfg.horizon == 60.0 and cfg.parameters["eps"] == 0.1 and cfg.parameters["mu"] is None
    assert parse_config(cfg.to_dict()) == cfg
    assert cfg.with_overrides(parameters={"a": 0.5}).parameters["a"] == 0.5


def test_probe_config_validation():
    ok = {"schema_version": 1, "scheme": "classical", "r": 1.0, "delta": 0.1, "eps_list": [0.1, 0.01]}
    assert parse_probe_config(ok).eps_list == (0.1, 0.01)
    for bad in ({**ok, "eps_list": [0.01, 0.1]}, {**ok, "scheme": "lyapunov"}, {**ok, "r": -1}, {**ok, "junk": 1}):
        with pytest.raises(ConfigError):
            parse_probe_config(bad)


@pytest.mark.parametrize(
    "raw",
    [
        base(),
        base(scheme="classical-decay"),
        base(scheme="averaged-classical"),
        base(scheme="source", horizon=2.0),
        base(scheme="source-transformed", horizon=2.0, parameters={"mu": 0.8}),
        base(scheme="averaged-source", horizon=2.0),
        base(scheme="lyapunov", horizon=2.0),
        base(scheme="lyapunov", horizon=2.0, parameters={"potential": "classical-averaged", "a": 0.7}),
        base(scheme="lyapunov", horizon=2.0, parameters={"potential": "source-averaged"}),
    ],
)
def test_every_scheme_runs_and_writes_clean_csv(tmp_path, raw):
    cfg = parse_config({**raw, "outputs": ["trajectory-csv", "summary-json", "identity-report"]})
    paths = run_scenario(cfg, tmp_path)
    header, data = read_csv(paths["trajectory"])
    assert header[0] in ("t", "tau")
    assert np.all(np.diff(data[:, 0]) > 0)
    assert np.all(np.isfinite(data))
    summary = json.loads(open(paths["summary"]).read())
    assert summary["wall_time_s"] >= 0 and "terminal_state" in summary
    assert json.loads(open(paths["identity_report"]).read())


def test_csv_format_and_determinism(tmp_path):
    cfg = parse_config(base(scheme="source-transformed", horizon=1.0))
    a = run_scenario(cfg, tmp_path / "a")["trajectory"]
    b = run_scenario(cfg, tmp_path / "b")["trajectory"]
    raw = open(a, "rb").read()
    assert raw == open(b, "rb").read()
    assert b"\r" not in raw
    first = raw.decode().splitlines()[1].split(",")
    # 17 significant digits round-trip exactly
    assert all(float(c) == float(format(float(c), ".17g")) for c in first)


def test_source_initial_drift_direction():
    res = simulate(parse_config(base(scheme="source-transformed", horizon=0.5)))
    assert res.summary["initial_drift_cosine"] == pytest.approx(1.0)
    assert np.allclose(res.summary["initial_transformed_velocity"], [1.0, -10.0])


def test_source_direct_and_transformed_agree(tmp_path):
    d = simulate(parse_config(base(scheme="source", horizon=3.0, integrator={"rtol": 1e-11, "atol": 1e-11})))
    m = simulate(parse_config(base(scheme="source-transformed", horizon=3.0, integrator={"rtol": 1e-11, "atol": 1e-11})))
    assert np.max(np.abs(d.table[:, 1:6] - m.table[:, 1:6])) < 1e-6


def test_builtins_encode_figure_setups():
    assert builtin_config("fig2a").parameters["a"] == 0.4
    assert builtin_config("fig3").scheme == "classical-decay"
    assert builtin_config("fig4-center").parameters["a"] == 0.5
    with pytest.raises(ConfigError):
        builtin_config("fig9")


def test_grid_expansion_order_and_guards():
    cfg = parse_config(base())
    points = expand_grid(cfg, {"a": [0.4, 0.7], "eps": [0.1, 0.01]})
    assert [p for p, _ in points] == [
        {"a": 0.4, "eps": 0.1},
        {"a": 0.4, "eps": 0.01},
        {"a": 0.7, "eps": 0.1},
        {"a": 0.7, "eps": 0.01},
    ]
    assert points[3][1].parameters["eps"] == 0.01
    for bad in ({}, {"a": []}, {"bogus": [1]}, {"a": 0.4}):
        with pytest.raises(ConfigError):
            expand_grid(cfg, bad)


def test_sweep_records_failures_and_continues(tmp_path):
    cfg = parse_config(base(scheme="source-transformed", horizon=20.0, integrator={"max_steps": 20}))
    rows = sweep(cfg, {"a": [0.5, 1.0]}, tmp_path)
    assert [r["status"].startswith("failed") for r in rows] == [True, True]
    ok = sweep(parse_config(base(scheme="lyapunov", horizon=1.0)), {"k": [0.5, 1.0, 2.0]}, tmp_path)
    assert [r["status"] for r in ok] == ["ok"] * 3
    header, _ = read_csv_text(tmp_path / "lyapunov-sweep.csv")
    assert header[:2] == ["name", "k"]


def read_csv_text(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), lines[1:]


def test_parallel_sweep_matches_serial(tmp_path):
    cfg = parse_config(base(scheme="lyapunov", horizon=1.0))
    serial = sweep(cfg, {"k": [0.5, 2.0]}, tmp_path / "s", jobs=1)
    parallel = sweep(cfg, {"k": [0.5, 2.0]}, tmp_path / "p", jobs=2)
    strip = lambda rows: [{k: v for k, v in r.items()} for r in rows]  # noqa: E731
    assert strip(serial) == strip(parallel)
    assert (tmp_path / "s" / "lyapunov-000" / "trajectory.csv").read_bytes() == (
        tmp_path / "p" / "lyapunov-000" / "trajectory.csv"
    ).read_bytes()


def test_cli_exit_codes(tmp_path, monkeypatch, capsys):
    out = str(tmp_path / "out")
    good = write(tmp_path, "good.json", base(horizon=2.0))
    assert cli.main(["simulate", good, "--out", out]) == 0
    assert cli.main(["simulate", write(tmp_path, "bad.json", base(extra=1)), "--out", out]) == 2
    assert cli.main(["simulate", write(tmp_path, "broken.json", "{nope"), "--out", out]) == 2
    assert cli.main(["simulate", str(tmp_path / "missing.json"), "--out", out]) == 2
    tight = write(tmp_path, "tight.json", base(horizon=50.0, integrator={"max_steps": 10}))
    assert cli.main(["simulate", tight, "--out", out]) == 3
    assert cli.main(["sweep", good, "--grid", write(tmp_path, "g.json", {}), "--out", out]) == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["reproduce", "fig9"])
    assert info.value.code == 2


def test_cli_env_default_out_and_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("AVERSEEK_OUT", str(tmp_path / "env"))
    cfg = write(tmp_path, "c.json", base(horizon=2.0, name="envrun"))
    assert cli.main(["simulate", cfg, "--seed", "5", "--tol", "1e-8"]) == 0
    summary = json.loads((tmp_path / "env" / "envrun" / "summary.json").read_text())
    assert summary["config"]["seed"] == 5 and summary["config"]["integrator"]["rtol"] == 1e-8


def test_cli_probe_smoke(tmp_path):
    probe = {
        "schema_version": 1,
        "name": "smoke",
        "scheme": "source",
        "parameters": {"a": 1.0},
        "r": 0.5,
        "delta": 2.0,
        "eps_list": [0.1],
        "horizon": 2.0,
        "n_samples": 2,
    }
    assert cli.main(["probe", write(tmp_path, "p.json", probe), "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "smoke.json").read_text())
    assert report["rows"][0]["n_runs"] == 8


def test_module_entry_point_help():
    res = subprocess.run([sys.executable, "-m", "averseek", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "reproduce" in res.stdout


def test_json_has_no_nan(tmp_path):
    cfg = parse_config(base(scheme="lyapunov", horizon=1.0))
    text = open(run_scenario(cfg, tmp_path)["summary"]).read()
    assert "NaN" not in text and "Infinity" not in text
    assert math.isfinite(json.loads(text)["terminal_distance"])
