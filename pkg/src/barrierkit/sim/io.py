"""Trace serialisation.

``trace.csv`` has one row per step with columns, in order::

    step, t, x[0..n-1], y[0..p-1], z[0..n-1], u[0..m-1],
    b:<monitor>..., w[0..n-1], qp_status, relaxed

``trace.json`` holds the same records plus the estimate covariance and the
controller data map. Wall-clock timings are left out of both files so that
equal seeds give byte-identical output.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .engine import SimulationTrace

VOLATILE_KEYS = ("solve_time",)


def _num(v):
    return repr(float(v))


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def csv_header(trace: SimulationTrace):
    n, p, m = trace.x.shape[1], trace.y.shape[1], trace.u.shape[1]
    return (["step", "t"] + [f"x[{i}]" for i in range(n)] + [f"y[{i}]" for i in range(p)]
            + [f"z[{i}]" for i in range(n)] + [f"u[{i}]" for i in range(m)]
            + [f"b:{name}" for name in trace.barrier_names] + [f"w[{i}]" for i in range(n)]
            + ["qp_status", "relaxed"])


def write_csv(trace: SimulationTrace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(trace))
        for i in range(len(trace)):
            d = trace.data[i]
            w.writerow([i, _num(trace.t[i])]
                       + [_num(v) for v in trace.x[i]] + [_num(v) for v in trace.y[i]]
                       + [_num(v) for v in trace.z[i]] + [_num(v) for v in trace.u[i]]
                       + [_num(v) for v in trace.barriers[i]]
                       + [_num(v) for v in trace.perturbation[i]]
                       + [d.get("qp_status", ""), int(bool(d.get("relaxed", False)))])


def read_csv(path):
    """Return ``(header, rows)`` with numeric columns parsed as floats."""
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = []
        for row in r:
            rows.append([row[j] if header[j] == "qp_status" else float(row[j])
                         for j in range(len(header))])
    return header, rows


def trace_dict(trace: SimulationTrace) -> dict:
    meta = {k: v for k, v in trace.metadata.items() if k != "solve_times"}
    records = []
    for i in range(len(trace)):
        data = {k: v for k, v in trace.data[i].items() if k not in VOLATILE_KEYS}
        records.append({
            "t": trace.t[i], "x": trace.x[i], "y": trace.y[i], "z": trace.z[i],
            "c": trace.c[i], "u": trace.u[i], "w": trace.perturbation[i],
            "barriers": dict(zip(trace.barrier_names, trace.barriers[i])),
            "data": data,
        })
    return to_jsonable({"metadata": meta, "barrier_names": trace.barrier_names,
                        "records": records})


def write_json(trace: SimulationTrace, path) -> None:
    Path(path).write_text(json.dumps(trace_dict(trace), indent=1) + "\n", encoding="utf-8")


def write_trace(trace: SimulationTrace, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(trace, out / "trace.csv")
    write_json(trace, out / "trace.json")
