import json
import math
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest
import yaml

import barrierkit
from barrierkit.cli import DEFAULTS, effective_config, main, mc, run, validate
from barrierkit.sim.io import read_csv

SCEN = Path(barrierkit.__file__).parent / "scenarios"
TUTORIAL = SCEN / "unicycle_reach_avoid.yaml"
HSR = SCEN / "hsr_corridor.yaml"
STOCH = SCEN / "unicycle_stochastic.yaml"


def _write(tmp_path, cfg, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg), encoding="utf-8")
    return p


def _tutorial(**changes):
    cfg = yaml.safe_load(TUTORIAL.read_text())
    cfg.update(changes)
    return cfg


def _report(out):
    return json.loads((Path(out) / "report.json").read_text())


# --------------------------------------------------------------------- run


def test_tutorial_run_is_safe(tmp_path, capsys):
    assert run(TUTORIAL, tmp_path) == 0
    rep = _report(tmp_path)
    assert rep["exit_status"] == "safe" and rep["records"] == 1001
    assert rep["min_h_overall"] >= 0.0
    assert rep["goal_reached"]
    for name in ("trace.csv", "trace.json", "timing.json", "report.json"):
        assert (tmp_path / name).is_file()
    assert "safe" in capsys.readouterr().out


def test_unfiltered_tutorial_exits_with_violation(tmp_path):
    assert run(TUTORIAL, tmp_path, ["controller.filter=false"]) == 2
    rep = _report(tmp_path)
    assert rep["exit_status"] == "violation"
    assert rep["first_violation"]["step"] > 0


def test_dt_zero_names_the_field(tmp_path):
    path = _write(tmp_path, _tutorial(dt=0))
    diags = validate(path)
    assert any(d.field.startswith("dt") for d in diags)
    assert run(path, tmp_path / "out") == 1


def test_seed_override_changes_only_seed(tmp_path):
    run(TUTORIAL, tmp_path / "a", ["T_final=0.5"])
    run(TUTORIAL, tmp_path / "b", ["T_final=0.5", "seed=7"])
    a, b = _report(tmp_path / "a")["config"], _report(tmp_path / "b")["config"]
    assert b["seed"] == 7
    assert {k for k in a if a[k] != b[k]} == {"seed"}


def test_report_echoes_effective_config(tmp_path):
    run(TUTORIAL, tmp_path, ["T_final=0.5"])
    cfg = _report(tmp_path)["config"]
    for key in DEFAULTS:
        assert key in cfg
    # the echoed config alone reproduces the run
    echo = _write(tmp_path, cfg, "echo.yaml")
    run(echo, tmp_path / "again")
    assert (tmp_path / "trace.csv").read_bytes() == (tmp_path / "again" / "trace.csv").read_bytes()


def test_report_is_recomputable_from_trace(tmp_path):
    run(HSR, tmp_path)
    rep = _report(tmp_path)
    header, rows = read_csv(tmp_path / "trace.csv")
    cols = {h: i for i, h in enumerate(header)}
    data = np.array([[float(r[i]) for i in range(len(header) - 2)] for r in rows])
    assert len(rows) == rep["records"]
    for name, v in rep["min_h"].items():
        assert abs(data[:, cols[f"b:{name}"]].min() - v) <= 1e-12
    ego = data[:, [cols["x[0]"], cols["x[1]"]]]
    agent = data[:, [cols["x[4]"], cols["x[5]"]]]
    dist = np.hypot(*(ego - agent).T)
    assert abs(dist.min() - rep["min_inter_agent_distance"]) <= 1e-12
    goal = np.hypot(ego[:, 0] - 6.0, ego[:, 1]) <= 0.25
    assert rep["goal_time"] == data[np.argmax(goal), cols["t"]]
    assert rep["relaxed_steps"] == sum(float(r[cols["relaxed"]]) == 1.0 for r in rows)
    timing = json.loads((tmp_path / "timing.json").read_text())
    assert rep["qp_latency"]["count"] == len(timing["solve_time"])
    assert rep["qp_latency"]["median"] == float(np.median(timing["solve_time"]))


def test_runtime_error_writes_partial_outputs(tmp_path):
    cfg = _tutorial(certificates=[
        {"family": "expression", "name": "fast", "h": "x[2] - 1"},
        {"family": "expression", "name": "slow", "h": "-1 - x[2]"},
    ])
    assert run(_write(tmp_path, cfg), tmp_path / "out") == 1
    rep = _report(tmp_path / "out")
    assert rep["exit_status"] == "error" and "InfeasibleQP" in rep["error"]


# ---------------------------------------------------------------- validate


def test_shipped_configs_validate():
    for path in (TUTORIAL, HSR, STOCH):
        assert validate(path) == []


def test_bad_index_and_unknown_model(tmp_path):
    cfg = _tutorial()
    cfg["certificates"][0]["h"] = "x[9] - 1"
    kinds = [d.kind for d in validate(_write(tmp_path, cfg, "a.yaml"))]
    assert "IndexOutOfRange" in kinds
    cfg = _tutorial(model={"builtin": "hovercraft"})
    kinds = [d.kind for d in validate(_write(tmp_path, cfg, "b.yaml"))]
    assert "UnknownModel" in kinds


def test_validation_reports_several_problems_with_lines(tmp_path):
    cfg = _tutorial(dt=-1, integrator="leapfrog", seed=-3)
    diags = validate(_write(tmp_path, cfg))
    fields = " ".join(d.field for d in diags)
    for key in ("dt", "integrator", "seed"):
        assert key in fields
    assert "line" in fields


def test_validate_command_output(tmp_path, capsys):
    assert main(["validate", str(HSR)]) == 0
    assert capsys.readouterr().out.strip() == "ok"
    bad = _write(tmp_path, _tutorial(dt=0))
    assert main(["validate", str(bad)]) == 1
    assert "dt" in capsys.readouterr().out


def test_override_paths():
    cfg = effective_config({"model": {"builtin": "dynamic_unicycle"},
                            "initial_state": [0, 0, 0, 0]},
                           ["controller.nominal.kind=constant", "initial_state.1=2.5",
                            "sensor.noise_covariance=[0.1, 0.1, 0.1, 0.1]"])
    assert cfg["controller"]["nominal"]["kind"] == "constant"
    assert cfg["initial_state"][1] == 2.5
    assert cfg["controller"]["filter"] is True
    assert cfg["sensor"]["noise_covariance"] == [0.1] * 4


# ---------------------------------------------------------------------- mc


def test_mc_rejects_zero_trials(tmp_path):
    assert mc(TUTORIAL, 0, tmp_path) == 1
    assert main(["mc", str(TUTORIAL), "--trials", "0", "--out", str(tmp_path)]) == 1


def test_mc_deterministic_scenario_matches_single_run(tmp_path):
    assert mc(TUTORIAL, 5, tmp_path, overrides=["T_final=2"]) == 0
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["violation_rate"] == 0.0 and s["trials"] == 5
    assert len(list((tmp_path / "trials").iterdir())) == 5


def test_mc_summary_is_reproducible_and_worker_independent(tmp_path):
    args = ["T_final=3"]
    mc(STOCH, 8, tmp_path / "a", workers=1, overrides=args)
    mc(STOCH, 8, tmp_path / "b", workers=1, overrides=args)
    mc(STOCH, 8, tmp_path / "c", workers=4, overrides=args)
    a = (tmp_path / "a" / "summary.json").read_bytes()
    assert a == (tmp_path / "b" / "summary.json").read_bytes()
    assert a == (tmp_path / "c" / "summary.json").read_bytes()
    s = json.loads(a)
    for key in ("violation_rate", "min_barrier_distribution", "min_barrier"):
        assert key in s


def test_console_script(tmp_path):
    exe = shutil.which("barrierkit")
    if exe is None:
        pytest.skip("console script not installed")
    proc = subprocess.run([exe, "validate", str(TUTORIAL)], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "ok"
    proc = subprocess.run([exe, "run", str(TUTORIAL), "--out", str(tmp_path),
                           "--set", "T_final=1"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert math.isfinite(_report(tmp_path)["min_h_overall"])
