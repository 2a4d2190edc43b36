"""Control-affine system models ``xdot = f(x) + g(x) u (+ M w | + sigma(x) dw)``.

Drift and actuation callables take a state sequence and return plain Python
lists so they can be evaluated on floats or on :class:`~.symbolic.Dual`
inputs. :func:`dynamics` is the array-returning entry point used by the
simulator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, UnknownModel
from .symbolic import Expr, check_state_dim, compile_expr, parse
from .symbolic import dual as dm


@dataclass(frozen=True)
class ControlAffineModel:
    n: int
    m: int
    drift: Callable
    actuation: Callable
    name: str = "custom"
    diffusion: Optional[Callable] = None
    disturbance_matrix: Optional[np.ndarray] = None
    disturbance_bounds: Optional[np.ndarray] = None
    input_bounds: Optional[np.ndarray] = None
    labels: tuple = ()
    params: dict = field(default_factory=dict)
    # expression twins enable the symbolic Lie-derivative route
    drift_exprs: Optional[tuple] = None
    actuation_exprs: Optional[tuple] = None

    def __post_init__(self):
        if self.disturbance_matrix is not None:
            M = np.asarray(self.disturbance_matrix, dtype=float)
            if M.ndim != 2 or M.shape[0] != self.n:
                raise DimensionMismatch(f"disturbance matrix must have {self.n} rows")
            if not np.all((M == 0) | (M == 1)):
                raise ValueError("disturbance matrix must be zero-one")
            if np.any(M.sum(axis=1) > 1):
                raise ValueError("disturbance matrix may have at most one non-zero per row")
            M.setflags(write=False)
            object.__setattr__(self, "disturbance_matrix", M)
            if self.disturbance_bounds is not None:
                W = np.asarray(self.disturbance_bounds, dtype=float).reshape(-1, 2)
                if W.shape[0] != M.shape[1] or np.any(W[:, 0] > W[:, 1]):
                    raise DimensionMismatch("disturbance bounds must be one [lo, hi] per column of M")
                W.setflags(write=False)
                object.__setattr__(self, "disturbance_bounds", W)
        if self.input_bounds is not None:
            U = np.asarray(self.input_bounds, dtype=float).reshape(-1, 2)
            if U.shape[0] != self.m:
                raise DimensionMismatch(f"input bounds must have {self.m} rows")
            U.setflags(write=False)
            object.__setattr__(self, "input_bounds", U)

    @property
    def has_expressions(self):
        return self.drift_exprs is not None and self.actuation_exprs is not None

    def closed_loop(self, u):
        """Return ``x -> f(x) + g(x) u`` as a list-valued callable."""
        return lambda x: _affine(self.drift(x), self.actuation(x), u)


def _affine(f, g, u):
    return [fi + sum(gij * uj for gij, uj in zip(gi, u)) for fi, gi in zip(f, g)]


def dynamics(model: ControlAffineModel, t: float, x) -> tuple:
    """Evaluate ``(f(x), g(x))`` as float arrays of shape (n,) and (n, m)."""
    if len(x) != model.n:
        raise DimensionMismatch(f"state has length {len(x)}, model expects {model.n}")
    f = np.asarray(model.drift(x), dtype=float)
    g = np.asarray(model.actuation(x), dtype=float).reshape(model.n, model.m)
    if f.shape != (model.n,):
        raise DimensionMismatch(f"drift returned shape {f.shape}, expected ({model.n},)")
    return f, g


def check_diffusion_bounded(model: ControlAffineModel, box, samples: int = 256, seed: int = 0,
                            limit: float = 1e6) -> bool:
    """Sample the state box and check the diffusion stays finite and below ``limit``."""
    if model.diffusion is None:
        return True
    box = np.asarray(box, dtype=float).reshape(model.n, 2)
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        x = box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random(model.n)
        s = np.asarray(model.diffusion(x), dtype=float)
        if not np.all(np.isfinite(s)) or np.max(np.abs(s), initial=0.0) > limit:
            return False
    return True


# ------------------------------------------------------------------ builtins


def dynamic_unicycle(**_):
    def drift(x):
        v, th = x[2], x[3]
        return [v * dm.cos(th), v * dm.sin(th), 0.0, 0.0]

    def actuation(x):
        return [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]

    return ControlAffineModel(
        n=4, m=2, drift=drift, actuation=actuation, name="dynamic_unicycle",
        labels=("x_e [m]", "y_e [m]", "v_e [m/s]", "theta_e [rad]"),
        drift_exprs=_exprs(["x[2]*cos(x[3])", "x[2]*sin(x[3])", "0", "0"], 4),
        actuation_exprs=_expr_matrix([["0", "0"], ["0", "0"], ["1", "0"], ["0", "1"]], 4),
    )


def single_integrator_2d(**_):
    return ControlAffineModel(
        n=2, m=2,
        drift=lambda x: [0.0, 0.0],
        actuation=lambda x: [[1.0, 0.0], [0.0, 1.0]],
        name="single_integrator_2d",
        labels=("x [m]", "y [m]"),
        drift_exprs=_exprs(["0", "0"], 2),
        actuation_exprs=_expr_matrix([["1", "0"], ["0", "1"]], 2),
    )


def double_integrator_1d(**_):
    return ControlAffineModel(
        n=2, m=1,
        drift=lambda x: [x[1], 0.0],
        actuation=lambda x: [[0.0], [1.0]],
        name="double_integrator_1d",
        labels=("p [m]", "v [m/s]"),
        drift_exprs=_exprs(["x[1]", "0"], 2),
        actuation_exprs=_expr_matrix([["0"], ["1"]], 2),
    )


def van_der_pol(mu: float = 1.0, **_):
    mu = float(mu)

    def drift(x):
        return [x[1], mu * (1.0 - x[0] * x[0]) * x[1] - x[0]]

    return ControlAffineModel(
        n=2, m=1, drift=drift, actuation=lambda x: [[0.0], [1.0]],
        name="van_der_pol", params={"mu": mu},
        labels=("x1", "x2"),
        drift_exprs=_exprs(["x[1]", "mu*(1 - x[0]^2)*x[1] - x[0]"], 2, {"mu": mu}),
        actuation_exprs=_expr_matrix([["0"], ["1"]], 2),
    )


BUILTINS = {
    "dynamic_unicycle": dynamic_unicycle,
    "single_integrator_2d": single_integrator_2d,
    "double_integrator_1d": double_integrator_1d,
    "van_der_pol": van_der_pol,
}


def builtin(name: str, **params) -> ControlAffineModel:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise UnknownModel(f"unknown model {name!r}; choose from {sorted(BUILTINS)}") from None
    return factory(**params)


# --------------------------------------------------------- from expressions


def _as_expr(e, n):
    if isinstance(e, Expr):
        return check_state_dim(e, n)
    if isinstance(e, (int, float)):
        return parse(repr(float(e)), n)
    return parse(e, n)


def _substitute(e, params):
    # fold named parameters into constants so the model is self-contained
    from .symbolic.expr import Binary, Constant, Max, Min, Parameter, Select, Unary

    if not params:
        return e
    if isinstance(e, Parameter):
        return Constant(float(params[e.name])) if e.name in params else e
    if isinstance(e, Unary):
        return Unary(e.op, _substitute(e.child, params))
    if isinstance(e, Binary):
        return Binary(e.op, _substitute(e.left, params), _substitute(e.right, params))
    if isinstance(e, (Min, Max)):
        return type(e)(tuple(_substitute(c, params) for c in e.children))
    if isinstance(e, Select):
        return Select(e.kind, tuple(_substitute(c, params) for c in e.keys),
                      tuple(_substitute(c, params) for c in e.values))
    return e


def _exprs(items, n, params=None):
    return tuple(_substitute(_as_expr(s, n), params) for s in items)


def _expr_matrix(rows, n, params=None):
    return tuple(tuple(_substitute(_as_expr(s, n), params) for s in row) for row in rows)


def from_expressions(drift_exprs: Sequence, actuation_exprs: Sequence[Sequence], n: int, m: int,
                     params: dict | None = None, name: str = "expression_model",
                     **kwargs) -> ControlAffineModel:
    """Build a model from DSL strings or parsed expressions.

    ``actuation_exprs`` is given row-major (``n`` rows of ``m`` entries).
    Named parameters are folded in as constants.
    """
    if len(drift_exprs) != n:
        raise DimensionMismatch(f"expected {n} drift expressions, got {len(drift_exprs)}")
    if len(actuation_exprs) != n or any(len(r) != m for r in actuation_exprs):
        raise DimensionMismatch(f"actuation must be {n} rows of {m} expressions")
    params = dict(params or {})
    fx = _exprs(drift_exprs, n, params)
    gx = _expr_matrix(actuation_exprs, n, params)
    f_fns = [compile_expr(e) for e in fx]
    g_fns = [[compile_expr(e) for e in row] for row in gx]

    def drift(x):
        return [f(x, params) for f in f_fns]

    def actuation(x):
        return [[g(x, params) for g in row] for row in g_fns]

    return ControlAffineModel(n=n, m=m, drift=drift, actuation=actuation, name=name,
                              params=params, drift_exprs=fx, actuation_exprs=gx, **kwargs)


# ------------------------------------------------------------- composition


def compose(ego: ControlAffineModel, agents: Sequence[tuple]) -> ControlAffineModel:
    """Stack an ego model with closed-loop agents into one state vector.

    Each agent is ``(model, policy)`` where ``policy(x_agent) -> u_agent``;
    agent motion becomes part of the drift, so certificates over the joint
    state pick up agent velocities through ``L_f h``. Inputs are the ego's.
    """
    offsets = []
    n = ego.n
    for model, _ in agents:
        offsets.append(n)
        n += model.n

    def drift(x):
        out = list(ego.drift(x[:ego.n]))
        for (model, policy), off in zip(agents, offsets):
            xa = x[off:off + model.n]
            out.extend(_affine(model.drift(xa), model.actuation(xa), policy(xa)))
        return out

    def actuation(x):
        g = [list(r) for r in ego.actuation(x[:ego.n])]
        g.extend([0.0] * ego.m for _ in range(n - ego.n))
        return g

    labels = tuple(ego.labels) + tuple(
        f"agent{k}.{lab}" for k, (model, _) in enumerate(agents) for lab in model.labels
    )
    return ControlAffineModel(
        n=n, m=ego.m, drift=drift, actuation=actuation,
        name=f"{ego.name}+{len(agents)}agents", labels=labels,
        input_bounds=ego.input_bounds,
        params={"agent_offsets": tuple(offsets)},
    )
