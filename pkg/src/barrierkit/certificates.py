"""Barrier certificates, Lie derivatives and relative-degree rectification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import DegreeNotFound, DimensionMismatch, InsufficientGains, InvalidRectangle
from .models import ControlAffineModel
from .symbolic import Expr, bind, check_state_dim, gradient, lie_derivative, parse, symbolic_gradient
from .symbolic import dual as dm

RELATIVE_DEGREE_EPS = 1e-8
DEFAULT_SAMPLES = 64


@dataclass(frozen=True)
class ClassKappa:
    """Extended class-K gain ``alpha`` used in ``Lf h + Lg h u >= -alpha(h)``."""

    kind: str = "linear"
    gain: float = 1.0
    exponent: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "power", "tanh"):
            raise ValueError(f"unknown class-K kind {self.kind!r}")
        if not self.gain > 0:
            raise ValueError("class-K gain must be positive")
        if self.kind == "power" and not self.exponent > 0:
            raise ValueError("class-K exponent must be positive")

    def __call__(self, y):
        if self.kind == "linear":
            return self.gain * y
        if self.kind == "power":
            # odd extension keeps it increasing through zero
            return self.gain * dm.sign(y) * dm.power(dm.fabs(y), self.exponent)
        return self.gain * dm.tanh(y)


def linear(gain: float = 1.0) -> ClassKappa:
    return ClassKappa("linear", gain)


@dataclass(frozen=True)
class BarrierCertificate:
    """Scalar constraint ``h`` with safe set ``{x | h(x) >= 0}``.

    ``h`` and ``grad_h`` take the state as a sequence. When the certificate
    came out of rectification, ``base`` is the original barrier it protects.
    """

    h: Callable
    grad_h: Callable
    alpha: ClassKappa = field(default_factory=ClassKappa)
    relative_degree: Optional[int] = None
    params: dict = field(default_factory=dict)
    name: str = "h"
    n: Optional[int] = None
    expr: Optional[Expr] = None
    base: Optional[Callable] = None

    def __call__(self, x):
        return self.h(x)

    def value_and_gradient(self, x):
        return float(self.h(x)), np.asarray(self.grad_h(x), dtype=float)


def from_function(h: Callable, n: int, alpha: ClassKappa | None = None, name: str = "h",
                  grad_h: Callable | None = None, **kwargs) -> BarrierCertificate:
    """Wrap a natively coded ``h``; the gradient defaults to forward-mode AD."""
    return BarrierCertificate(
        h=h, grad_h=grad_h or (lambda x: gradient(h, x)), alpha=alpha or ClassKappa(),
        n=n, name=name, **kwargs,
    )


def from_expression(source, n: int, params: dict | None = None, alpha: ClassKappa | None = None,
                    name: str = "h", **kwargs) -> BarrierCertificate:
    """Certificate from a DSL formula; the gradient is differentiated symbolically."""
    e = source if isinstance(source, Expr) else parse(source, n)
    check_state_dim(e, n)
    h = bind(e, params)
    grads = [bind(d, params) for d in symbolic_gradient(e, n)]
    return BarrierCertificate(
        h=h, grad_h=lambda x: np.array([float(g(x)) for g in grads]),
        alpha=alpha or ClassKappa(), n=n, name=name, expr=e,
        params=dict(params or {}), **kwargs,
    )


def _check_dim(n_cert, model):
    if n_cert is not None and n_cert != model.n:
        raise DimensionMismatch(f"certificate is over {n_cert} states, model has {model.n}")


def lie_derivatives(b: BarrierCertificate, model: ControlAffineModel, x):
    """Return ``(h, Lf_h, Lg_h)`` at ``x``."""
    _check_dim(b.n, model)
    if len(x) != model.n:
        raise DimensionMismatch(f"state has length {len(x)}, model expects {model.n}")
    hx, dh = b.value_and_gradient(x)
    f = np.asarray(model.drift(x), dtype=float)
    g = np.asarray(model.actuation(x), dtype=float).reshape(model.n, model.m)
    return hx, float(dh @ f), dh @ g


# -------------------------------------------------------------- rectification


def _lf(p, model):
    # L_f p as a callable; nested duals make it differentiable again
    def lf(x):
        dp = gradient(p, x)
        f = model.drift(x)
        out = 0.0
        for a, b in zip(dp, f):
            out = out + a * b
        return out

    return lf


def _lg_norm(p_grad, model, x):
    g = np.asarray(model.actuation(x), dtype=float).reshape(model.n, model.m)
    return float(np.max(np.abs(np.asarray(p_grad, dtype=float) @ g), initial=0.0))


def latin_hypercube(box, count: int = DEFAULT_SAMPLES, seed: int = 0) -> np.ndarray:
    """``count`` Latin-hypercube samples over a per-state ``[lo, hi]`` box."""
    box = np.asarray(box, dtype=float)
    sampler = qmc.LatinHypercube(d=box.shape[0], seed=seed)
    return qmc.scale(sampler.random(count), box[:, 0], box[:, 1])


def detect_relative_degree(h, model: ControlAffineModel, samples, max_degree: int,
                           eps: float = RELATIVE_DEGREE_EPS) -> int:
    """Smallest ``k`` with ``max_s |d(L_f^{k-1} h)/dx g(x_s)|_inf > eps``."""
    samples = [np.asarray(s, dtype=float) for s in samples]
    if not samples:
        raise ValueError("relative-degree detection needs at least one sample")
    if isinstance(h, Expr) and model.has_expressions:
        p = h
        for k in range(1, max_degree + 1):
            grads = [bind(d) for d in symbolic_gradient(p, model.n)]
            if max(_lg_norm([float(gi(s)) for gi in grads], model, s) for s in samples) > eps:
                return k
            p = lie_derivative(p, model.drift_exprs)
    else:
        p = bind(h) if isinstance(h, Expr) else h
        for k in range(1, max_degree + 1):
            if max(_lg_norm(gradient(p, s), model, s) for s in samples) > eps:
                return k
            p = _lf(p, model)
    raise DegreeNotFound(f"input does not appear within {max_degree} derivatives")


def rectify_relative_degree(h, model: ControlAffineModel, max_degree: int = 4,
                            gains: Sequence | None = None, mode: str = "high_order",
                            samples=None, domain=None, alpha: ClassKappa | None = None,
                            name: str = "h", params: dict | None = None) -> BarrierCertificate:
    """Turn a barrier of relative degree ``r`` into a degree-one certificate.

    ``psi_1 = h``, ``psi_{i+1} = L_f psi_i + alpha_i(psi_i)`` for ``i < r``;
    ``gains`` gives the ``alpha_i`` (linear gains, or ClassKappa instances in
    ``high_order`` mode) and defaults to unit gains. ``h`` may be a DSL
    string, an Expr or a callable. Expressions on expression-backed models
    are differentiated symbolically; anything else goes through nested AD.
    """
    if mode not in ("high_order", "exponential"):
        raise ValueError(f"unknown rectification mode {mode!r}")
    if max_degree < 1:
        raise ValueError("max_degree must be at least 1")
    if isinstance(h, str):
        h = parse(h, model.n)
    if isinstance(h, Expr):
        check_state_dim(h, model.n)
        if params:
            from .models import _substitute

            h = _substitute(h, params)
    if samples is None:
        if domain is None:
            domain = [[-1.0, 1.0]] * model.n
        samples = latin_hypercube(domain, DEFAULT_SAMPLES)
    r = detect_relative_degree(h, model, samples, max_degree)

    if gains is None:
        gains = [1.0] * (r - 1)
    if len(gains) < r - 1:
        raise InsufficientGains(f"relative degree {r} needs {r - 1} gains, got {len(gains)}")
    alphas = []
    for g in gains[: r - 1]:
        if isinstance(g, ClassKappa):
            if mode == "exponential" and g.kind != "linear":
                raise ValueError("exponential mode takes linear gains only")
            alphas.append(g)
        else:
            alphas.append(linear(float(g)))
    alpha = alpha or ClassKappa()

    if isinstance(h, Expr) and model.has_expressions:
        psi = h
        for a in alphas:
            if a.kind != "linear":
                break
            psi = _add_expr(lie_derivative(psi, model.drift_exprs), psi, a.gain)
        else:
            cert = from_expression(psi, model.n, alpha=alpha, name=name, relative_degree=1,
                                   base=bind(h))
            return replace(cert, params={"detected_degree": r, "gains": [a.gain for a in alphas]})
        h = bind(h)
    elif isinstance(h, Expr):
        h = bind(h)

    base = h
    psi = h
    for a in alphas:
        psi = _hocbf_step(psi, model, a)
    return from_function(psi, model.n, alpha=alpha, name=name, relative_degree=1, base=base,
                         params={"detected_degree": r})


def _add_expr(lf, psi, gain):
    from .symbolic.expr import Constant, add, mul

    return add(lf, mul(Constant(float(gain)), psi))


def _hocbf_step(psi, model, a):
    lf = _lf(psi, model)
    return lambda x: lf(x) + a(psi(x))


# ------------------------------------------------------- certificate packages


@dataclass(frozen=True)
class CertificatePackage:
    barriers: tuple = ()
    lyapunov: tuple = ()
    n: Optional[int] = None

    def __len__(self):
        return len(self.barriers)

    def __iter__(self):
        return iter(self.barriers)

    @property
    def names(self):
        return [b.name for b in self.barriers]


def package(*barriers: BarrierCertificate, lyapunov=(), n: int | None = None) -> CertificatePackage:
    if n is None:
        dims = {b.n for b in barriers if b.n is not None}
        if len(dims) > 1:
            raise DimensionMismatch(f"certificates disagree on state dimension: {sorted(dims)}")
        n = dims.pop() if dims else None
    return CertificatePackage(tuple(barriers), tuple(lyapunov), n)


def concatenate(packages: Sequence[CertificatePackage]) -> CertificatePackage:
    """Order-preserving concatenation; row k of the QP is certificate k."""
    if not packages:
        raise ValueError("concatenate needs at least one package")
    if len(packages) == 1:
        return packages[0]
    dims = {p.n for p in packages if p.n is not None}
    if len(dims) > 1:
        raise DimensionMismatch(f"packages disagree on state dimension: {sorted(dims)}")
    return CertificatePackage(
        tuple(b for p in packages for b in p.barriers),
        tuple(v for p in packages for v in p.lyapunov),
        dims.pop() if dims else None,
    )


# -------------------------------------------------------- barrier families


def future_focused_barrier(ego, agent, T: float, R: float):
    """Minimum predicted squared distance over ``[0, T]`` minus ``(2R)^2``.

    ``ego`` is ``[x, y, v, theta]``; ``agent`` is ``[x, y, vx, vy]``. Both
    coast under zero control. Returns ``(h, dh/d ego)``.
    """
    h, g_ego, _ = _ff_eval(ego, agent, T, R)
    return h, g_ego


def _ff_eval(ego, agent, T, R):
    x, y, v, th = (float(e) for e in ego[:4])
    xh, yh, vxh, vyh = (float(a) for a in agent[:4])
    c, s = math.cos(th), math.sin(th)
    dpx, dpy = xh - x, yh - y
    dvx, dvy = vxh - v * c, vyh - v * s
    dv2 = dvx * dvx + dvy * dvy
    tau = 0.0 if dv2 == 0.0 else min(max(-(dpx * dvx + dpy * dvy) / dv2, 0.0), T)
    rx, ry = dpx + dvx * tau, dpy + dvy * tau
    h = rx * rx + ry * ry - (2.0 * R) ** 2
    # fixed-tau derivative; exact in the interior by the envelope theorem
    g_ego = np.array([
        -2.0 * rx,
        -2.0 * ry,
        -2.0 * tau * (rx * c + ry * s),
        -2.0 * tau * v * (-rx * s + ry * c),
    ])
    g_agent_pos = np.array([2.0 * rx, 2.0 * ry])
    return h, g_ego, g_agent_pos


def future_focused_certificate(T: float, R: float, agent_offset: int, agent_velocity,
                               n: int, alpha: ClassKappa | None = None,
                               name: str = "h_ff") -> BarrierCertificate:
    """``h_ff`` over a stacked state ``[ego(4), ..., agent_xy at agent_offset, ...]``.

    The agent coasts at the declared constant ``agent_velocity``.
    """
    if not (T > 0 and R > 0):
        raise ValueError("time headway T and radius R must be positive")
    vx, vy = (float(v) for v in agent_velocity)

    def h(x):
        if any(isinstance(xi, dm.Dual) for xi in x):
            return _ff_dual(x, T, R, agent_offset, vx, vy)
        agent = (x[agent_offset], x[agent_offset + 1], vx, vy)
        return _ff_eval(x[:4], agent, T, R)[0]

    def grad_h(x):
        agent = (x[agent_offset], x[agent_offset + 1], vx, vy)
        _, ge, ga = _ff_eval(x[:4], agent, T, R)
        out = np.zeros(len(x))
        out[:4] = ge
        out[agent_offset:agent_offset + 2] = ga
        return out

    return BarrierCertificate(h=h, grad_h=grad_h, alpha=alpha or ClassKappa(), n=n, name=name,
                              relative_degree=1,
                              params={"T": T, "R": R, "agent_offset": agent_offset,
                                      "agent_velocity": (vx, vy)})


def _ff_dual(x, T, R, off, vxh, vyh):
    # same closed form written with AD primitives (used by the oracle tests)
    px, py, v, th = x[0], x[1], x[2], x[3]
    dpx, dpy = x[off] - px, x[off + 1] - py
    dvx, dvy = vxh - v * dm.cos(th), vyh - v * dm.sin(th)
    dv2 = dvx * dvx + dvy * dvy
    tau = 0.0
    if dm.primal(dv2) != 0.0:
        tau = dm.primal(-(dpx * dvx + dpy * dvy) / dv2)
        tau = min(max(tau, 0.0), T)
    rx, ry = dpx + dvx * tau, dpy + dvy * tau
    return rx * rx + ry * ry - (2.0 * R) ** 2


def corridor_barriers(x_min: float, x_max: float, y_min: float, y_max: float,
                      n: int = 4, alpha: ClassKappa | None = None) -> list:
    """Four velocity-aware walls keeping the unicycle inside a rectangle."""
    if not (x_min < x_max and y_min < y_max):
        raise InvalidRectangle(f"need x_min < x_max and y_min < y_max, got "
                               f"[{x_min}, {x_max}] x [{y_min}, {y_max}]")
    alpha = alpha or ClassKappa()
    walls = {
        "h_r1": lambda x: x[2] * dm.cos(x[3]) + x[0] - x_min,
        "h_r2": lambda x: x_max - x[0] - x[2] * dm.cos(x[3]),
        "h_r3": lambda x: x[2] * dm.sin(x[3]) + x[1] - y_min,
        "h_r4": lambda x: y_max - x[1] - x[2] * dm.sin(x[3]),
    }
    bounds = {"x_min": x_min, "x_max": x_max, "y_min": y_min, "y_max": y_max}
    return [from_function(fn, n, alpha=alpha, name=name, relative_degree=1, params=bounds)
            for name, fn in walls.items()]


def circular_obstacle(center, radius: float, n: int, model: ControlAffineModel | None = None,
                      **rectify) -> BarrierCertificate:
    """``(x0 - cx)^2 + (x1 - cy)^2 - r^2``, rectified against ``model`` if given."""
    cx, cy = (float(c) for c in center)
    source = f"(x[0] - {cx!r})^2 + (x[1] - {cy!r})^2 - {float(radius)!r}^2"
    if model is None:
        return from_expression(source, n, name=rectify.get("name", "obstacle"))
    return rectify_relative_degree(source, model, **rectify)
