"""The step loop: sensor -> estimator -> controller -> dynamics -> perturbation -> integrator."""

from __future__ import annotations

import hashlib
import json
import math
import multiprocessing
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import NonFiniteState, StepError
from ..models import ControlAffineModel, dynamics
from .components import (
    PerturbationSpec,
    SensorModel,
    euler,
    euler_maruyama,
    make_estimator,
    make_perturbation,
    make_sensor,
    rk4,
)
from .rng import Key, as_key


@dataclass(frozen=True)
class Scenario:
    """A fully bound pipeline.

    ``monitors`` are ``(name, h)`` pairs evaluated on the true state at
    every step; they define what counts as a safety violation.
    """

    model: ControlAffineModel
    controller: Callable
    x0: np.ndarray
    sensor: SensorModel = field(default_factory=SensorModel)
    estimator: str = "passthrough"
    process_noise: Optional[np.ndarray] = None
    z0: Optional[np.ndarray] = None
    c0: Optional[np.ndarray] = None
    perturbation: PerturbationSpec = field(default_factory=PerturbationSpec)
    integrator: str = "rk4"
    feedback: str = "estimate"
    monitors: tuple = ()
    name: str = "scenario"
    config: Optional[dict] = None

    def __post_init__(self):
        x0 = np.array(self.x0, dtype=float)
        if x0.shape != (self.model.n,):
            raise ValueError(f"initial state must have length {self.model.n}")
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        if self.integrator not in ("euler", "rk4", "euler_maruyama"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.integrator == "rk4" and self.perturbation.kind != "none":
            raise ValueError("rk4 cannot integrate perturbed dynamics; use euler or euler_maruyama")
        if self.perturbation.kind == "brownian" and self.integrator != "euler_maruyama":
            raise ValueError("brownian perturbations need the euler_maruyama integrator")
        if self.feedback not in ("estimate", "true_state"):
            raise ValueError("feedback must be 'estimate' or 'true_state'")

    @property
    def digest(self) -> str:
        if self.config is None:
            return ""
        blob = json.dumps(self.config, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class SimulationTrace:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    c: np.ndarray
    u: np.ndarray
    perturbation: np.ndarray
    barriers: np.ndarray
    barrier_names: list
    data: list
    metadata: dict

    def __len__(self):
        return self.t.shape[0]

    @property
    def solve_times(self):
        return np.array(self.metadata.get("solve_times", []), dtype=float)

    def min_barriers(self) -> dict:
        return {name: float(np.min(self.barriers[:, k]))
                for k, name in enumerate(self.barrier_names)}

    def first_violation(self, tol: float = 0.0):
        """``(step, time)`` of the first monitored value below ``-tol``, or None."""
        if self.barriers.size == 0:
            return None
        bad = np.any(self.barriers < -tol, axis=1)
        if not bad.any():
            return None
        i = int(np.argmax(bad))
        return i, float(self.t[i])

    def violated(self, tol: float = 0.0) -> bool:
        return self.first_violation(tol) is not None


def step_count(T_final: float, dt: float) -> int:
    """Number of steps after t=0; records are this plus one."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if T_final < dt:
        raise ValueError("T_final must be at least dt")
    return int(math.floor(T_final / dt + 1e-9))


def execute(scenario: Scenario, T_final: float, dt: float, seed=0) -> SimulationTrace:
    """Run one trajectory on the uniform grid ``t_i = i dt``.

    ``seed`` is an int or a :class:`Key`; step ``i`` draws sensor noise from
    ``key.split(i, 0)`` and the perturbation from ``key.split(i, 1)``.
    """
    N = step_count(T_final, dt)
    key = as_key(seed)
    model = scenario.model
    n, m = model.n, model.m
    sensor = make_sensor(scenario.sensor, n, dt)
    estimator = make_estimator(scenario.estimator, model, scenario.sensor, dt,
                               scenario.process_noise)
    perturb = make_perturbation(scenario.perturbation, n)
    controller = scenario.controller
    names = [name for name, _ in scenario.monitors]
    p = scenario.sensor.output_matrix(n).shape[0]

    T = np.empty(N + 1)
    X = np.empty((N + 1, n))
    Y = np.empty((N + 1, p))
    Z = np.empty((N + 1, n))
    Cs = np.empty((N + 1, n, n))
    U = np.empty((N + 1, m))
    P = np.empty((N + 1, n))
    B = np.empty((N + 1, len(names)))
    data_log = []
    solve_times = []

    x = scenario.x0.copy()
    z = (scenario.x0 if scenario.z0 is None else np.asarray(scenario.z0, dtype=float)).copy()
    c = np.zeros((n, n)) if scenario.c0 is None else np.array(scenario.c0, dtype=float)
    u_prev = None
    for i in range(N + 1):
        t = i * dt
        step_key = key.split(i)
        try:
            y = sensor(t, x, step_key.split(0))
            z, c = estimator(t, y, z, u_prev, c)
            u, data = controller(t, z if scenario.feedback == "estimate" else x.copy())
            u = np.asarray(u, dtype=float).reshape(m)
            f, g = dynamics(model, t, x)
            w = perturb(x, u, f, g)(step_key.split(1))
            T[i], X[i], Y[i], Z[i], Cs[i], U[i], P[i] = t, x, y, z, c, u, w
            for k, (_, h) in enumerate(scenario.monitors):
                B[i, k] = float(h(x))
            if "solve_time" in data:
                solve_times.append(float(data["solve_time"]))
            data_log.append(data)
            if i == N:
                break
            if scenario.integrator == "rk4":
                x_next = rk4(x, model.closed_loop(u), dt)
            elif scenario.integrator == "euler":
                x_next = euler(x, f + g @ u + w, dt)
            else:
                x_next = euler_maruyama(x, f + g @ u, w, dt)
            if not np.all(np.isfinite(x_next)):
                raise NonFiniteState(f"state became non-finite: {x_next.tolist()}")
        except Exception as exc:
            err = exc if isinstance(exc, StepError) else StepError(i, t, exc)
            # records completed before the failing step stay inspectable
            k = len(data_log)
            err.trace = _trace(T[:k], X[:k], Y[:k], Z[:k], Cs[:k], U[:k], P[:k], B[:k], names,
                               data_log, key, dt, T_final, scenario, solve_times)
            if err is exc:
                raise
            raise err from exc
        x = x_next
        u_prev = u

    return _trace(T, X, Y, Z, Cs, U, P, B, names, data_log, key, dt, T_final, scenario,
                  solve_times)


def _trace(T, X, Y, Z, Cs, U, P, B, names, data_log, key, dt, T_final, scenario, solve_times):
    return SimulationTrace(
        t=T, x=X, y=Y, z=Z, c=Cs, u=U, perturbation=P, barriers=B, barrier_names=names,
        data=data_log,
        metadata={
            "seed": key.to_list(), "dt": dt, "T_final": T_final, "steps": len(T),
            "scenario": scenario.name, "scenario_hash": scenario.digest,
            "solve_times": solve_times,
        },
    )


# ------------------------------------------------------------- Monte Carlo

_MC_SCENARIO = None


def _mc_trial(args):
    i, T_final, dt, base = args
    try:
        return i, execute(_MC_SCENARIO, T_final, dt, Key(base).split(i)), None
    except Exception as exc:  # recorded, remaining trials continue
        return i, None, f"{type(exc).__name__}: {exc}"


def monte_carlo(scenario: Scenario, trials: int, base_seed: int, T_final: float, dt: float,
                workers: int = 1, violation_tol: float = 0.0):
    """Run ``trials`` independent trajectories; trial ``i`` uses ``Key(base_seed).split(i)``.

    Returns ``(traces, summary)``. Failed trials appear as ``None`` in
    ``traces`` and are listed in ``summary["failures"]``. Results do not
    depend on ``workers``.
    """
    global _MC_SCENARIO
    if trials < 1:
        raise ValueError("trials must be at least 1")
    jobs = [(i, T_final, dt, int(base_seed)) for i in range(trials)]
    _MC_SCENARIO = scenario
    try:
        if workers > 1:
            ctx = multiprocessing.get_context("fork")
            with ctx.Pool(workers) as pool:
                results = pool.map(_mc_trial, jobs)
        else:
            results = [_mc_trial(j) for j in jobs]
    finally:
        _MC_SCENARIO = None
    results.sort(key=lambda r: r[0])
    traces = [r[1] for r in results]
    failures = [{"trial": i, "error": err} for i, _, err in results if err is not None]
    return traces, summarize(traces, violation_tol, failures)


def summarize(traces, violation_tol: float = 0.0, failures=()) -> dict:
    done = [tr for tr in traces if tr is not None]
    violations = [tr.violated(violation_tol) for tr in done]
    mins = {}
    for tr in done:
        for name, v in tr.min_barriers().items():
            mins.setdefault(name, []).append(v)
    return {
        "trials": len(traces),
        "completed": len(done),
        "failures": list(failures),
        "violations": int(sum(violations)),
        "violation_rate": (sum(violations) / len(done)) if done else float("nan"),
        "violation_tolerance": violation_tol,
        "min_barrier": {k: float(min(v)) for k, v in mins.items()},
        "min_barrier_per_trial": {k: [float(a) for a in v] for k, v in mins.items()},
    }
