from .components import (
    PerturbationSpec,
    SensorModel,
    euler,
    euler_maruyama,
    make_ekf,
    make_estimator,
    make_perturbation,
    make_sensor,
    passthrough,
    psd_factor,
    rk4,
    sensor,
)
from .engine import Scenario, SimulationTrace, execute, monte_carlo, step_count, summarize
from .io import write_csv, write_json, write_trace
from .rng import Key, as_key

__all__ = [
    "Key",
    "PerturbationSpec",
    "Scenario",
    "SensorModel",
    "SimulationTrace",
    "as_key",
    "euler",
    "euler_maruyama",
    "execute",
    "make_ekf",
    "make_estimator",
    "make_perturbation",
    "make_sensor",
    "monte_carlo",
    "passthrough",
    "psd_factor",
    "rk4",
    "sensor",
    "step_count",
    "summarize",
    "write_csv",
    "write_json",
    "write_trace",
]
