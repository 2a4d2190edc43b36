"""``barrierkit run|mc|validate``.

Exit codes: 0 safe, 2 safety violation, 1 configuration or runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..errors import BarrierKitError, StepError
from ..sim import execute, monte_carlo, write_trace
from ..sim.io import to_jsonable
from . import config as config_mod
from .assemble import Diagnostic, assemble
from .report import EXIT_ERROR, EXIT_SAFE, EXIT_VIOLATION, build_report, config_hash, goal_time


def _dump(obj, path):
    Path(path).write_text(json.dumps(to_jsonable(obj), indent=1, sort_keys=False) + "\n",
                          encoding="utf-8")


def _load(path, overrides=()):
    """Effective config plus diagnostics; the config is None if it cannot be read."""
    try:
        cfg, lines = config_mod.load(path, overrides)
    except OSError as exc:
        return None, None, [Diagnostic(str(path), type(exc).__name__, str(exc))]
    except BarrierKitError as exc:
        return None, None, [Diagnostic(getattr(exc, "field", str(path)), type(exc).__name__,
                                       str(exc).split(": ", 1)[-1])]
    asm = assemble(cfg, lines)
    return cfg, asm, asm.diagnostics


def validate(path, overrides=()) -> list:
    """Every problem that would stop ``run``; an empty list means runnable."""
    return _load(path, overrides)[2]


def _report_problems(diags, stream=sys.stderr):
    for d in diags:
        print(f"error: {d}", file=stream)


def run(config_path, out_dir, overrides=()) -> int:
    cfg, asm, diags = _load(config_path, overrides)
    if diags:
        _report_problems(diags)
        return EXIT_ERROR
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    error = None
    try:
        trace = execute(asm.scenario, float(cfg["T_final"]), float(cfg["dt"]), int(cfg["seed"]))
    except StepError as exc:
        error, trace = exc, exc.trace
    write_trace(trace, out)
    _dump({"solve_time": trace.metadata["solve_times"]}, out / "timing.json")
    report = build_report(cfg, trace, asm.agent_offsets, asm.agent_radii, error)
    _dump(report, out / "report.json")
    _print_run(report)
    if error is not None:
        print(f"error: {error}", file=sys.stderr)
    return report["exit_code"]


def _print_run(report):
    print(f"{report['scenario']}: {report['exit_status']} ({report['records']} records)")
    for name, v in report["min_h"].items():
        print(f"  min {name} = {v:.6g}")
    if report["goal_time"] is not None:
        print(f"  goal reached at t = {report['goal_time']:.3f} s")
    if report["min_inter_agent_distance"] is not None:
        print(f"  min inter-agent distance = {report['min_inter_agent_distance']:.4f} m")


def mc(config_path, trials, out_dir, workers=1, overrides=()) -> int:
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 1:
        _report_problems([Diagnostic("trials", "ConfigError",
                                     f"must be a positive integer, got {trials!r}")])
        return EXIT_ERROR
    cfg, asm, diags = _load(config_path, overrides)
    if diags:
        _report_problems(diags)
        return EXIT_ERROR
    out = Path(out_dir)
    tol = float(cfg["violation_tolerance"])
    traces, summary = monte_carlo(asm.scenario, trials, int(cfg["seed"]), float(cfg["T_final"]),
                                  float(cfg["dt"]), workers=max(1, int(workers)),
                                  violation_tol=tol)
    worst = EXIT_SAFE
    goals, dists = [], []
    for i, tr in enumerate(traces):
        tdir = out / "trials" / f"trial_{i:04d}"
        tdir.mkdir(parents=True, exist_ok=True)
        if tr is None:
            err = next(f["error"] for f in summary["failures"] if f["trial"] == i)
            _dump({"trial": i, "exit_status": "error", "exit_code": EXIT_ERROR, "error": err},
                  tdir / "report.json")
            worst = EXIT_ERROR
            continue
        rep = build_report(cfg, tr, asm.agent_offsets, asm.agent_radii)
        rep["trial"] = i
        _dump(rep, tdir / "report.json")
        goals.append(goal_time(tr, cfg.get("goal")))
        if rep["min_inter_agent_distance"] is not None:
            dists.append(rep["min_inter_agent_distance"])
        if rep["exit_code"] == EXIT_VIOLATION and worst == EXIT_SAFE:
            worst = EXIT_VIOLATION
    dist = {}
    for name, vals in summary["min_barrier_per_trial"].items():
        v = np.asarray(vals)
        dist[name] = {"min": float(v.min()), "p05": float(np.percentile(v, 5)),
                      "median": float(np.median(v)), "max": float(v.max())}
    summary.update({
        "scenario": cfg.get("name"),
        "config_hash": config_hash(cfg),
        "base_seed": int(cfg["seed"]),
        "min_barrier_distribution": dist,
        "goal_reached_rate": (sum(g is not None for g in goals) / len(goals)) if goals else None,
        "min_inter_agent_distance": min(dists) if dists else None,
        "exit_code": worst,
    })
    out.mkdir(parents=True, exist_ok=True)
    _dump(summary, out / "summary.json")
    print(f"{cfg.get('name')}: {summary['completed']}/{trials} trials completed, "
          f"violation rate {summary['violation_rate']:.4g}")
    return worst


def _parser():
    p = argparse.ArgumentParser(prog="barrierkit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="simulate one scenario and write trace and report")
    r.add_argument("config")
    r.add_argument("--out", required=True)
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", dest="overrides")
    m = sub.add_parser("mc", help="Monte Carlo trials of one scenario")
    m.add_argument("config")
    m.add_argument("--trials", type=int, required=True)
    m.add_argument("--out", required=True)
    m.add_argument("--workers", type=int, default=1)
    m.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", dest="overrides")
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    v.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", dest="overrides")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            return run(args.config, args.out, args.overrides)
        if args.command == "mc":
            return mc(args.config, args.trials, args.out, args.workers, args.overrides)
        diags = validate(args.config, args.overrides)
        if diags:
            _report_problems(diags, sys.stdout)
            return EXIT_ERROR
        print("ok")
        return EXIT_SAFE
    except BarrierKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
