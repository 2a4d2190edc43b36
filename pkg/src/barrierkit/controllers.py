"""Controllers with the ``controller(t, x) -> (u, data)`` signature.

Configuration happens once, when a :class:`ControllerConfig` is turned into
a callable by :func:`make_controller`; afterwards only ``(t, x)`` flows in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .certificates import CertificatePackage
from .errors import DimensionMismatch, InfeasibleQP
from .models import ControlAffineModel
from .qp import QpProblem, build_cbf_qp, cbf_rows, solve

SLACK_WEIGHT = 1e6


@dataclass(frozen=True)
class ControllerConfig:
    kind: str
    params: dict = field(default_factory=dict)
    nominal: Optional["ControllerConfig"] = None
    certificates: Optional[CertificatePackage] = None
    model: Optional[ControlAffineModel] = None
    bounds: Optional[np.ndarray] = None
    on_infeasible: str = "error"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown controller kind {self.kind!r}")
        if self.kind == "cbf_qp_filter":
            if self.nominal is None or self.model is None:
                raise ValueError("cbf_qp_filter wraps one nominal controller and a model")
            if self.certificates is None or len(self.certificates) == 0:
                raise ValueError("cbf_qp_filter needs a nonempty certificate package")
            if self.on_infeasible not in ("error", "relax"):
                raise ValueError("on_infeasible must be 'error' or 'relax'")


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    w = math.pi - math.fmod(math.pi - a, 2.0 * math.pi)
    if w <= -math.pi:
        w += 2.0 * math.pi
    elif w > math.pi:
        w -= 2.0 * math.pi
    return w


# ----------------------------------------------------------------- nominal


def constant(u) -> ControllerConfig:
    return ControllerConfig("constant", {"u": tuple(float(v) for v in u)})


def proportional_goal_controller(goal, k_v: float = 1.0, k_omega: float = 1.0,
                                 v_max: float = 1.0) -> ControllerConfig:
    """Heading-and-speed law for the dynamic unicycle.

    ``omega = k_omega * wrap(atan2(dy, dx) - theta)`` and
    ``a = k_v * (min(v_max, dist) - v)``.
    """
    if not (k_v > 0 and k_omega > 0 and v_max > 0):
        raise ValueError("gains and v_max must be positive")
    return ControllerConfig("proportional_goal", {
        "goal": tuple(float(g) for g in goal), "k_v": float(k_v),
        "k_omega": float(k_omega), "v_max": float(v_max),
    })


def _constant(cfg):
    u = np.array(cfg.params["u"], dtype=float)

    def controller(t, x):
        return u.copy(), {"u_nom": u.copy()}

    return controller


def _proportional_goal(cfg):
    gx, gy = cfg.params["goal"]
    k_v, k_w, v_max = cfg.params["k_v"], cfg.params["k_omega"], cfg.params["v_max"]

    def controller(t, x):
        px, py, v, th = (float(c) for c in x[:4])
        dx, dy = gx - px, gy - py
        dist = math.hypot(dx, dy)
        if dist == 0.0:
            u = np.array([k_v * (0.0 - v), 0.0])
        else:
            u = np.array([k_v * (min(v_max, dist) - v),
                          k_w * wrap_angle(math.atan2(dy, dx) - th)])
        return u, {"u_nom": u.copy()}

    return controller


# --------------------------------------------------------------------- LQR


def newton_kleinman(A, B, Q, R, K0=None, tol=1e-12, max_iter=100):
    """Stabilising solution of the continuous-time Riccati equation.

    Iterates ``(A - BK)'P + P(A - BK) + Q + K'RK = 0``, ``K = R^{-1}B'P``
    from a stabilising ``K0`` (Bass's construction when omitted).
    """
    A, B, Q, R = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (A, B, Q, R))
    n = A.shape[0]
    Rinv = np.linalg.inv(R)
    if K0 is None:
        beta = np.linalg.norm(A, 2) + 1.0
        Z = solve_continuous_lyapunov(-(A + beta * np.eye(n)), -2.0 * B @ B.T)
        K = B.T @ np.linalg.inv(Z)
    else:
        K = np.atleast_2d(np.asarray(K0, dtype=float))
    P_prev = None
    for _ in range(max_iter):
        Acl = A - B @ K
        P = solve_continuous_lyapunov(Acl.T, -(Q + K.T @ R @ K))
        P = 0.5 * (P + P.T)
        K = Rinv @ B.T @ P
        if P_prev is not None and np.max(np.abs(P - P_prev)) <= tol * max(1.0, np.max(np.abs(P))):
            break
        P_prev = P
    return P, K


def lqr_linearized(goal, q_pos: float = 1.0, q_vel: float = 1.0, q_heading: float = 1.0,
                   r: float = 1.0, v_lin: float = 0.5, v_max: float = 1.0) -> ControllerConfig:
    """LQR on the unicycle linearised about its current heading-to-goal."""
    return ControllerConfig("lqr_linearized", {
        "goal": tuple(float(g) for g in goal), "q": (q_pos, q_pos, q_vel, q_heading),
        "r": float(r), "v_lin": float(v_lin), "v_max": float(v_max),
    })


def _lqr(cfg):
    gx, gy = cfg.params["goal"]
    Q = np.diag(cfg.params["q"])
    R = cfg.params["r"] * np.eye(2)
    v_lin, v_max = cfg.params["v_lin"], cfg.params["v_max"]
    B = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])

    def controller(t, x):
        px, py, v, th = (float(c) for c in x[:4])
        dx, dy = gx - px, gy - py
        th_ref = math.atan2(dy, dx) if (dx or dy) else th
        v0 = max(abs(v), v_lin)
        c, s = math.cos(th_ref), math.sin(th_ref)
        A = np.zeros((4, 4))
        A[0, 2], A[0, 3] = c, -v0 * s
        A[1, 2], A[1, 3] = s, v0 * c
        _, K = newton_kleinman(A, B, Q, R)
        v_ref = min(v_max, math.hypot(dx, dy))
        err = np.array([px - gx, py - gy, v - v_ref, wrap_angle(th - th_ref)])
        u = -K @ err
        return u, {"u_nom": u.copy()}

    return controller


# ---------------------------------------------------------------- CBF-QP


def cbf_qp_filter(nominal: ControllerConfig, certificates: CertificatePackage,
                  model: ControlAffineModel, bounds=None,
                  on_infeasible: str = "error") -> ControllerConfig:
    return ControllerConfig("cbf_qp_filter", nominal=nominal, certificates=certificates,
                            model=model, bounds=bounds, on_infeasible=on_infeasible)


def _relaxed(problem: QpProblem):
    # one slack s >= 0 shared by every CBF row, cost SLACK_WEIGHT/2 * s^2
    m, k = problem.m, problem.k
    H = np.zeros((m + 1, m + 1))
    H[:m, :m] = problem.H
    H[m, m] = SLACK_WEIGHT
    A = np.zeros((k + 1, m + 1))
    A[:k, :m] = problem.A
    A[:k, m] = 1.0
    A[k, m] = 1.0
    b = np.concatenate([problem.b, [0.0]])
    bounds = None
    if problem.bounds is not None:
        bounds = np.vstack([problem.bounds, [[-np.inf, np.inf]]])
    return QpProblem(H=H, q=np.concatenate([problem.q, [0.0]]), A=A, b=b, bounds=bounds)


def _cbf_filter(cfg):
    nominal = make_controller(cfg.nominal)
    certs, model = cfg.certificates, cfg.model
    names = certs.names
    bounds = cfg.bounds if cfg.bounds is not None else model.input_bounds

    def controller(t, x):
        if len(x) != model.n:
            raise DimensionMismatch(f"state has length {len(x)}, model expects {model.n}")
        u0, nom_data = nominal(t, x)
        u0 = np.asarray(u0, dtype=float)
        A, b, h = cbf_rows(certs, model, x)
        problem = QpProblem(H=np.eye(model.m), q=-u0, A=A, b=b, bounds=bounds)
        sol = solve(problem)
        data = {"u_nom": u0.copy()}
        for name, hv in zip(names, h):
            data[f"h:{name}"] = float(hv)
        for cert in certs:
            if cert.base is not None:
                data[f"h0:{cert.name}"] = float(cert.base(x))
        relaxed = False
        slack = 0.0
        if sol.status != "optimal":
            if cfg.on_infeasible == "error":
                raise InfeasibleQP(f"CBF-QP {sol.status} at t={t:.6g}")
            rsol = solve(_relaxed(problem))
            if rsol.status != "optimal":
                raise InfeasibleQP(f"relaxed CBF-QP {rsol.status} at t={t:.6g}")
            relaxed, slack = True, float(rsol.u_star[-1])
            u = rsol.u_star[:-1]
            data["qp_iterations"] = sol.iterations + rsol.iterations
            solve_time = sol.solve_time + rsol.solve_time
        else:
            u = sol.u_star
            data["qp_iterations"] = sol.iterations
            solve_time = sol.solve_time
        data.update({
            "qp_status": sol.status,
            "active_set": list(sol.active_set),
            "relaxed": relaxed,
            "slack": slack,
            "solve_time": solve_time,
        })
        return np.asarray(u, dtype=float), data

    return controller


KINDS = {
    "constant": _constant,
    "proportional_goal": _proportional_goal,
    "lqr_linearized": _lqr,
    "cbf_qp_filter": _cbf_filter,
}


def make_controller(cfg: ControllerConfig) -> Callable:
    """Curry a configuration into ``controller(t, x) -> (u, data)``."""
    return KINDS[cfg.kind](cfg)


def controller(cfg: ControllerConfig, t: float, x):
    return make_controller(cfg)(t, x)


__all__ = ["ControllerConfig", "build_cbf_qp", "cbf_qp_filter", "constant", "controller",
           "lqr_linearized", "make_controller", "newton_kleinman",
           "proportional_goal_controller", "wrap_angle"]
