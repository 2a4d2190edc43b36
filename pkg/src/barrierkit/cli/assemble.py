"""Turn an effective config into a bound :class:`~barrierkit.sim.Scenario`."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import certificates as certs
from .. import controllers as ctl
from .. import models
from ..errors import BarrierKitError, ConfigError
from ..sim import PerturbationSpec, Scenario, SensorModel
from ..symbolic import bind, parse
from .config import check_fields


@dataclass(frozen=True)
class Diagnostic:
    field: str
    kind: str
    message: str

    def __str__(self):
        return f"{self.field}: {self.kind}: {self.message}"


@dataclass
class Assembly:
    scenario: Scenario | None = None
    model: models.ControlAffineModel | None = None
    ego: models.ControlAffineModel | None = None
    package: certs.CertificatePackage | None = None
    agent_offsets: tuple = ()
    agent_radii: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.diagnostics


class _Collector:
    def __init__(self, lines):
        self.lines = lines
        self.items = []

    def where(self, path):
        line = self.lines.get(path)
        return f"{path} (line {line})" if line else path

    def add(self, path, exc):
        if isinstance(exc, ConfigError):
            where = exc.field if "(line" in exc.field else self.where(exc.field)
            self.items.append(Diagnostic(where, "ConfigError", str(exc).split(": ", 1)[-1]))
        else:
            self.items.append(Diagnostic(self.where(path), type(exc).__name__, str(exc)))


def _floats(v, name):
    try:
        return np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(name, f"expected numbers, got {v!r}") from None


# ----------------------------------------------------------------- sections


def build_model(spec, path="model"):
    if not isinstance(spec, dict):
        raise ConfigError(path, "must be a mapping with 'builtin' or 'drift'/'actuation'")
    kwargs = {}
    if spec.get("input_bounds") is not None:
        kwargs["input_bounds"] = _floats(spec["input_bounds"], f"{path}.input_bounds")
    if "builtin" in spec:
        m = models.builtin(spec["builtin"], **(spec.get("params") or {}))
        if kwargs:
            from dataclasses import replace

            m = replace(m, **kwargs)
        return m
    for key in ("drift", "actuation", "n", "m"):
        if key not in spec:
            raise ConfigError(f"{path}.{key}", "required for an expression model")
    return models.from_expressions(spec["drift"], spec["actuation"], int(spec["n"]),
                                   int(spec["m"]), params=spec.get("params"),
                                   name=spec.get("name", "expression_model"), **kwargs)


def _alpha(spec):
    if spec is None:
        return certs.ClassKappa()
    if isinstance(spec, (int, float)):
        return certs.linear(float(spec))
    return certs.ClassKappa(spec.get("kind", "linear"), float(spec.get("gain", 1.0)),
                            float(spec.get("exponent", 1.0)))


def _rectify_kwargs(spec):
    spec = dict(spec or {})
    out = {"max_degree": int(spec.get("max_degree", 4)),
           "mode": spec.get("mode", "high_order")}
    if spec.get("gains") is not None:
        out["gains"] = [float(g) for g in spec["gains"]]
    if spec.get("domain") is not None:
        out["domain"] = spec["domain"]
    return out


def agent_velocity(agent_cfg, path):
    c = agent_cfg.get("controller") or {}
    if c.get("kind", "constant") != "constant":
        raise ConfigError(f"{path}.controller.kind",
                          "agents move under constant controllers only")
    return [float(v) for v in c.get("u") or ()]


def build_certificates(items, model, agents, offsets):
    out = []
    for i, spec in enumerate(items):
        path = f"certificates.{i}"
        if not isinstance(spec, dict) or "family" not in spec:
            raise ConfigError(path, "each certificate needs a 'family'")
        fam = spec["family"]
        alpha = _alpha(spec.get("alpha"))
        name = spec.get("name")
        if fam == "expression":
            source = spec.get("h")
            if not isinstance(source, str):
                raise ConfigError(f"{path}.h", "must be a DSL string")
            expr = parse(source, model.n)
            if spec.get("rectify") is not None:
                out.append(certs.rectify_relative_degree(
                    expr, model, alpha=alpha, name=name or f"h{i}",
                    params=spec.get("params"), **_rectify_kwargs(spec["rectify"])))
            else:
                out.append(certs.from_expression(expr, model.n, params=spec.get("params"),
                                                 alpha=alpha, name=name or f"h{i}"))
        elif fam == "circular_obstacle":
            out.append(certs.circular_obstacle(
                spec["center"], float(spec["radius"]), model.n, model=model, alpha=alpha,
                name=name or "obstacle", **_rectify_kwargs(spec.get("rectify"))))
        elif fam == "corridor":
            walls = certs.corridor_barriers(float(spec["x_min"]), float(spec["x_max"]),
                                            float(spec["y_min"]), float(spec["y_max"]),
                                            n=model.n, alpha=alpha)
            out.extend(walls)
        elif fam == "future_focused":
            k = int(spec.get("agent", 0))
            if not 0 <= k < len(agents):
                raise ConfigError(f"{path}.agent", f"no agent with index {k}")
            vel = agent_velocity(agents[k], f"agents.{k}")
            if len(vel) != 2:
                raise ConfigError(f"agents.{k}.controller.u",
                                  "future-focused barriers need a planar agent velocity")
            out.append(certs.future_focused_certificate(
                float(spec["T"]), float(spec["R"]), offsets[k], vel, model.n, alpha=alpha,
                name=name or ("h_ff" if len(agents) == 1 else f"h_ff{k}")))
        else:
            raise ConfigError(f"{path}.family", f"unknown certificate family {fam!r}")
    names = [c.name for c in out]
    dup = sorted({n for n in names if names.count(n) > 1})
    if dup:
        raise ConfigError("certificates", f"duplicate certificate names {dup}")
    return out


def build_nominal(spec, path="controller.nominal"):
    if not isinstance(spec, dict):
        raise ConfigError(path, "a nominal controller mapping is required")
    kind = spec.get("kind")
    p = {k: v for k, v in spec.items() if k != "kind" and v is not None}
    if kind == "constant":
        if p.get("u") is None:
            raise ConfigError(f"{path}.u", "constant controller needs u")
        return ctl.constant(p["u"])
    if kind == "proportional_goal":
        return ctl.proportional_goal_controller(p.get("goal"), float(p.get("k_v", 1.0)),
                                                float(p.get("k_omega", 1.0)),
                                                float(p.get("v_max", 1.0)))
    if kind == "lqr_linearized":
        return ctl.lqr_linearized(p.pop("goal"), **{k: float(v) for k, v in p.items()})
    raise ConfigError(f"{path}.kind", f"unknown nominal controller {kind!r}")


def build_sensor(spec):
    spec = spec or {}
    conv = {k: (None if spec.get(k) is None else _floats(spec[k], f"sensor.{k}"))
            for k in ("noise_covariance", "C", "D")}
    return SensorModel(**conv)


def build_perturbation(spec, n):
    spec = spec or {"kind": "none"}
    kind = spec.get("kind", "none")
    if kind == "none":
        return PerturbationSpec()
    if kind == "bounded":
        return PerturbationSpec("bounded", M=_floats(spec.get("M"), "perturbation.M"),
                                bounds=_floats(spec.get("bounds"), "perturbation.bounds"),
                                law=spec.get("law", "uniform"))
    if kind == "brownian":
        sigma = spec.get("sigma")
        if not isinstance(sigma, list) or len(sigma) != n:
            raise ConfigError("perturbation.sigma", f"must be {n} rows")
        rows = [[bind(parse(str(e), n)) for e in (row if isinstance(row, list) else [row])]
                for row in sigma]

        def sig(x):
            return [[float(f(x)) for f in row] for row in rows]

        return PerturbationSpec("brownian", sigma=sig)
    raise ConfigError("perturbation.kind", f"unknown perturbation kind {kind!r}")


# --------------------------------------------------------------------- main


def assemble(cfg: dict, lines=None) -> Assembly:
    """Build everything the config describes, collecting every problem found."""
    lines = lines or {}
    col = _Collector(lines)
    out = Assembly()
    for p in check_fields(cfg, lines):
        col.items.append(Diagnostic(p.field, "ConfigError", str(p).split(": ", 1)[-1]))

    def attempt(path, fn):
        try:
            return fn()
        except (BarrierKitError, ValueError, KeyError, TypeError, IndexError) as exc:
            col.add(path, exc)
            return None

    ego = attempt("model", lambda: build_model(cfg.get("model")))
    agents_cfg = cfg.get("agents") if isinstance(cfg.get("agents"), list) else []
    agent_models = []
    for k, a in enumerate(agents_cfg):
        path = f"agents.{k}"

        def one(a=a, path=path):
            if not isinstance(a, dict):
                raise ConfigError(path, "must be a mapping")
            am = build_model(a.get("model"), f"{path}.model")
            u = np.array(agent_velocity(a, path), dtype=float)
            if u.shape != (am.m,):
                raise ConfigError(f"{path}.controller.u", f"must have length {am.m}")
            x0 = _floats(a.get("initial_state"), f"{path}.initial_state")
            if x0.shape != (am.n,):
                raise ConfigError(f"{path}.initial_state", f"must have length {am.n}")
            return am, u, x0

        agent_models.append(attempt(path, one))
    if ego is None or any(a is None for a in agent_models):
        out.diagnostics = col.items
        return out

    if agent_models:
        model = models.compose(ego, [(am, (lambda xa, u=u: list(u))) for am, u, _ in agent_models])
        offsets = model.params["agent_offsets"]
    else:
        model, offsets = ego, ()
    out.ego, out.model, out.agent_offsets = ego, model, tuple(offsets)

    def initial_state():
        x0 = _floats(cfg.get("initial_state"), "initial_state")
        if x0.shape != (ego.n,):
            raise ConfigError(col.where("initial_state"), f"must have length {ego.n}")
        return np.concatenate([x0] + [a[2] for a in agent_models])

    x0 = attempt("initial_state", initial_state)
    cert_list = attempt("certificates", lambda: build_certificates(
        cfg.get("certificates") or [], model, agents_cfg, offsets))
    for c in cert_list or ():
        if "R" in c.params:
            out.agent_radii[c.params["agent_offset"]] = c.params["R"]

    ccfg = cfg.get("controller") or {}
    nominal = attempt("controller.nominal", lambda: build_nominal(ccfg.get("nominal")))
    controller = None
    if nominal is not None and cert_list is not None:
        def make():
            if ccfg.get("filter", True):
                if not cert_list:
                    raise ConfigError("controller.filter", "the safety filter needs certificates")
                out.package = certs.package(*cert_list)
                bounds = ccfg.get("bounds")
                return ctl.make_controller(ctl.cbf_qp_filter(
                    nominal, out.package, model,
                    bounds=None if bounds is None else _floats(bounds, "controller.bounds"),
                    on_infeasible=ccfg.get("on_infeasible", "error")))
            return ctl.make_controller(nominal)

        controller = attempt("controller", make)
    sensor = attempt("sensor", lambda: build_sensor(cfg.get("sensor")))
    pert = attempt("perturbation", lambda: build_perturbation(cfg.get("perturbation"), model.n))
    if col.items or any(v is None for v in (x0, controller, sensor, pert)):
        out.diagnostics = col.items
        return out

    est = cfg.get("estimator") or {}
    monitors = []
    for c in cert_list:
        monitors.append((c.name, c.h))
        if c.base is not None:
            monitors.append((f"{c.name}.base", c.base))

    def scenario():
        def opt(key):
            v = est.get(key)
            return None if v is None else _floats(v, f"estimator.{key}")

        sc = Scenario(
            model=model, controller=controller, x0=x0, sensor=sensor,
            estimator=est.get("kind", "passthrough"), process_noise=opt("process_noise"),
            z0=opt("initial_estimate"), c0=opt("initial_covariance"), perturbation=pert,
            integrator=cfg.get("integrator", "rk4"), feedback=cfg.get("feedback", "estimate"),
            monitors=tuple(monitors), name=str(cfg.get("name", "scenario")), config=cfg,
        )
        n = model.n
        C = sensor.output_matrix(n)
        if C.shape[1] != n:
            raise ConfigError("sensor.C", f"must have {n} columns")
        if sc.estimator == "passthrough" and C.shape[0] != n:
            raise ConfigError("estimator.kind", "passthrough needs full-state measurements")
        if sc.estimator not in ("passthrough", "ekf"):
            raise ConfigError("estimator.kind", f"unknown estimator {sc.estimator!r}")
        # surfaces indefinite noise covariances before anything runs
        from ..sim.components import psd_factor

        psd_factor(sensor.covariance(n, float(cfg["dt"])))
        return sc

    out.scenario = attempt("scenario", scenario)
    out.diagnostics = col.items
    return out
