"""Scenario configuration files: loading, defaults, overrides, field checks.

Configs are YAML documents carrying ``schema_version: 1``. The effective
config is the document deep-merged over :data:`DEFAULTS`, then patched by
``--set`` overrides; it is what gets echoed into ``report.json``.
"""

from __future__ import annotations

import copy
import math
from pathlib import Path

import yaml

from ..errors import ConfigError

SCHEMA_VERSION = 1

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "name": "scenario",
    "dt": 0.01,
    "T_final": 10.0,
    "seed": 0,
    "violation_tolerance": 1e-6,
    "goal": None,
    "controller": {
        "nominal": None,
        "filter": True,
        "bounds": None,
        "on_infeasible": "error",
    },
    "certificates": [],
    "agents": [],
    "sensor": {"noise_covariance": None, "C": None, "D": None},
    "estimator": {"kind": "passthrough", "process_noise": None,
                  "initial_estimate": None, "initial_covariance": None},
    "perturbation": {"kind": "none"},
    "integrator": "rk4",
    "feedback": "estimate",
}

TOP_LEVEL = set(DEFAULTS) | {"model", "initial_state"}


def _line_map(node, prefix="", out=None):
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = f"{prefix}.{k.value}" if prefix else str(k.value)
            out[path] = k.start_mark.line + 1
            _line_map(v, path, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            path = f"{prefix}.{i}" if prefix else str(i)
            out[path] = v.start_mark.line + 1
            _line_map(v, path, out)
    return out


def load_document(path):
    """Parse a YAML file into ``(data, line_map)``."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" (line {mark.line + 1})" if mark is not None else ""
        raise ConfigError("<document>", f"not valid YAML{where}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("<document>", "top level must be a mapping")
    return data, (_line_map(node) if node is not None else {})


def deep_merge(base, top):
    if isinstance(base, dict) and isinstance(top, dict):
        out = dict(base)
        for k, v in top.items():
            out[k] = deep_merge(base.get(k), v) if k in base else copy.deepcopy(v)
        return out
    return copy.deepcopy(top)


def parse_override(item: str):
    if "=" not in item:
        raise ConfigError(item, "override must look like key=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(item, "override key is empty")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError:
        value = raw
    return key, value


def apply_override(cfg: dict, key: str, value):
    parts = key.split(".")
    node = cfg
    for i, part in enumerate(parts[:-1]):
        here = ".".join(parts[: i + 1])
        if isinstance(node, list):
            node = node[_index(node, part, here)]
        elif isinstance(node, dict):
            if node.get(part) is None:
                node[part] = {}
            node = node[part]
        else:
            raise ConfigError(here, "cannot descend into a scalar")
    last = parts[-1]
    if isinstance(node, list):
        node[_index(node, last, key)] = value
    elif isinstance(node, dict):
        node[last] = value
    else:
        raise ConfigError(key, "cannot set a field on a scalar")


def _index(seq, part, where):
    try:
        i = int(part)
    except ValueError:
        raise ConfigError(where, "list positions must be integers") from None
    if not -len(seq) <= i < len(seq):
        raise ConfigError(where, f"index {i} out of range for a list of {len(seq)}")
    return i


def effective_config(data: dict, overrides=()) -> dict:
    cfg = deep_merge(DEFAULTS, data)
    for item in overrides:
        key, value = parse_override(item) if isinstance(item, str) else item
        apply_override(cfg, key, value)
    return cfg


def load(path, overrides=()):
    """Return ``(effective_config, line_map)``."""
    data, lines = load_document(path)
    return effective_config(data, overrides), lines


# --------------------------------------------------------------- field checks


def _num(cfg, key, lines, positive=False):
    v = cfg.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(_where(key, lines), f"must be a finite number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(_where(key, lines), f"must be positive, got {v!r}")
    return float(v)


def _where(key, lines):
    line = lines.get(key)
    return f"{key} (line {line})" if line else key


def check_fields(cfg: dict, lines=None) -> list:
    """Schema-level problems as ``ConfigError`` instances; empty when clean."""
    lines = lines or {}
    problems = []

    def guard(fn):
        try:
            fn()
        except ConfigError as exc:
            problems.append(exc)

    if cfg.get("schema_version") != SCHEMA_VERSION:
        problems.append(ConfigError(_where("schema_version", lines),
                                    f"unsupported schema version {cfg.get('schema_version')!r}; "
                                    f"expected {SCHEMA_VERSION}"))
    for key in sorted(set(cfg) - TOP_LEVEL):
        problems.append(ConfigError(_where(key, lines), "unknown field"))
    for key in ("model", "initial_state"):
        if cfg.get(key) is None:
            problems.append(ConfigError(key, "required field is missing"))
    guard(lambda: _num(cfg, "dt", lines, positive=True))

    def t_final():
        T = _num(cfg, "T_final", lines, positive=True)
        dt = cfg.get("dt")
        if isinstance(dt, (int, float)) and dt > 0 and T < dt:
            raise ConfigError(_where("T_final", lines), f"must be at least dt ({dt})")

    guard(t_final)

    def seed():
        s = cfg.get("seed")
        if isinstance(s, bool) or not isinstance(s, int) or s < 0:
            raise ConfigError(_where("seed", lines), f"must be a non-negative integer, got {s!r}")

    guard(seed)

    def tolerance():
        if _num(cfg, "violation_tolerance", lines) < 0:
            raise ConfigError(_where("violation_tolerance", lines), "must be non-negative")

    guard(tolerance)
    if cfg.get("integrator") not in ("euler", "rk4", "euler_maruyama"):
        problems.append(ConfigError(_where("integrator", lines),
                                    f"unknown integrator {cfg.get('integrator')!r}"))
    if cfg.get("feedback") not in ("estimate", "true_state"):
        problems.append(ConfigError(_where("feedback", lines),
                                    "must be 'estimate' or 'true_state'"))
    if not isinstance(cfg.get("certificates"), list):
        problems.append(ConfigError(_where("certificates", lines), "must be a list"))
    if not isinstance(cfg.get("agents"), list):
        problems.append(ConfigError(_where("agents", lines), "must be a list"))
    goal = cfg.get("goal")
    if goal is not None:
        if not isinstance(goal, dict) or "position" not in goal:
            problems.append(ConfigError(_where("goal", lines), "needs a position"))
        elif not (isinstance(goal.get("radius", 0.0), (int, float)) and goal.get("radius", 0.0) >= 0):
            problems.append(ConfigError(_where("goal.radius", lines), "must be non-negative"))
    return problems
