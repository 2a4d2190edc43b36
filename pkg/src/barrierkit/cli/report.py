"""Invariance reports computed from a trace (and nothing else)."""

from __future__ import annotations

import hashlib
import json

import numpy as np

from ..sim.io import to_jsonable

EXIT_SAFE, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2


def config_hash(cfg: dict) -> str:
    blob = json.dumps(to_jsonable(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def goal_time(trace, goal):
    """First recorded time the ego position is inside the goal ball, or None."""
    if goal is None or len(trace) == 0:
        return None
    gx, gy = (float(v) for v in goal["position"])
    r = float(goal.get("radius", 0.0))
    d = np.hypot(trace.x[:, 0] - gx, trace.x[:, 1] - gy)
    hit = d <= r
    return float(trace.t[int(np.argmax(hit))]) if hit.any() else None


def agent_distances(trace, offsets):
    """``{agent_index: distance series}`` between ego and agent positions."""
    return {k: np.hypot(trace.x[:, 0] - trace.x[:, off], trace.x[:, 1] - trace.x[:, off + 1])
            for k, off in enumerate(offsets)}


def latency(times):
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        return {"count": 0, "median": None, "p99": None, "max": None}
    return {"count": int(times.size), "median": float(np.median(times)),
            "p99": float(np.percentile(times, 99)), "max": float(times.max())}


def build_report(cfg, trace, offsets=(), radii=None, error=None, solve_times=None) -> dict:
    tol = float(cfg.get("violation_tolerance", 0.0))
    radii = radii or {}
    mins = trace.min_barriers() if len(trace) else {}
    first = trace.first_violation(tol) if len(trace) else None
    violating = []
    if first is not None:
        i = first[0]
        violating = [n for n, v in zip(trace.barrier_names, trace.barriers[i]) if v < -tol]
    dists = agent_distances(trace, offsets) if len(trace) else {}
    agents = []
    for k, d in dists.items():
        j = int(np.argmin(d))
        entry = {"agent": k, "min_distance": float(d[j]), "time": float(trace.t[j])}
        R = radii.get(offsets[k])
        if R is not None:
            entry["required_distance"] = 2.0 * R
            entry["margin_respected"] = bool(d[j] >= 2.0 * R)
        agents.append(entry)
    t_goal = goal_time(trace, cfg.get("goal"))
    if error is not None:
        status, code = "error", EXIT_ERROR
    elif first is not None:
        status, code = "violation", EXIT_VIOLATION
    else:
        status, code = "safe", EXIT_SAFE
    relaxed = sum(1 for d in trace.data if d.get("relaxed"))
    return to_jsonable({
        "scenario": cfg.get("name"),
        "config": cfg,
        "config_hash": config_hash(cfg),
        "records": len(trace),
        "violation_tolerance": tol,
        "min_h": mins,
        "min_h_overall": min(mins.values()) if mins else None,
        "first_violation": None if first is None else
        {"step": first[0], "time": first[1], "certificates": violating},
        "goal_reached": t_goal is not None,
        "goal_time": t_goal,
        "min_inter_agent_distance": min((a["min_distance"] for a in agents), default=None),
        "agents": agents,
        "relaxed_steps": relaxed,
        "qp_latency": latency(trace.solve_times if solve_times is None else solve_times),
        "error": None if error is None else str(error),
        "exit_status": status,
        "exit_code": code,
    })
