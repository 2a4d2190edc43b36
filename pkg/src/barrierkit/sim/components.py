"""Sensor, estimator, perturbation and integrator building blocks.

Each ``make_*`` factory curries its configuration and returns a function
with the corresponding pipeline signature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..errors import CholeskyFailure, SingularInnovation
from ..models import ControlAffineModel
from ..symbolic import jacobian


def psd_factor(cov, tol: float = 1e-10) -> np.ndarray:
    """Return ``L`` with ``L L' = cov`` for a symmetric PSD ``cov``."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape[0] != cov.shape[1]:
        raise CholeskyFailure(f"covariance must be square, got {cov.shape}")
    if not np.allclose(cov, cov.T, rtol=0.0, atol=tol):
        raise CholeskyFailure("covariance is not symmetric")
    if not np.any(cov):
        return np.zeros_like(cov)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    # singular but PSD: fall back to a symmetric square root
    w, V = np.linalg.eigh(cov)
    if w.min() < -tol * max(1.0, abs(w.max())):
        raise CholeskyFailure(f"covariance is indefinite (min eigenvalue {w.min():.3g})")
    return V * np.sqrt(np.clip(w, 0.0, None))


# ------------------------------------------------------------------ sensor


@dataclass(frozen=True)
class SensorModel:
    """``y = C x + L xi`` with ``L L' = noise_covariance``.

    With ``D`` given, the continuous model ``dy = Cx dt + D dv`` is sampled
    at step ``dt`` with covariance ``D D' / dt`` instead.
    """

    noise_covariance: Optional[np.ndarray] = None
    C: Optional[np.ndarray] = None
    D: Optional[np.ndarray] = None

    def output_matrix(self, n):
        return np.eye(n) if self.C is None else np.atleast_2d(np.asarray(self.C, dtype=float))

    def covariance(self, n, dt=None):
        p = self.output_matrix(n).shape[0]
        if self.D is not None:
            D = np.atleast_2d(np.asarray(self.D, dtype=float))
            if dt is None:
                raise ValueError("a diffusion-type sensor needs the step dt")
            return D @ D.T / dt
        if self.noise_covariance is None:
            return np.zeros((p, p))
        cov = np.asarray(self.noise_covariance, dtype=float)
        if cov.ndim == 0:
            return float(cov) * np.eye(p)
        if cov.ndim == 1:
            return np.diag(cov)
        return cov


def make_sensor(spec: SensorModel, n: int, dt: float | None = None) -> Callable:
    C = spec.output_matrix(n)
    if C.shape[1] != n:
        raise ValueError(f"output matrix has {C.shape[1]} columns, state has {n}")
    L = psd_factor(spec.covariance(n, dt))
    p = C.shape[0]
    noiseless = not np.any(L)

    def sensor(t, x, key):
        y = C @ np.asarray(x, dtype=float)
        if noiseless:
            return y
        return y + L @ key.normal(p)

    return sensor


def sensor(spec: SensorModel, t, x, key, dt: float | None = None):
    return make_sensor(spec, len(x), dt)(t, x, key)


# --------------------------------------------------------------- estimator


def passthrough(t, y, z, u, c):
    y = np.asarray(y, dtype=float)
    return y.copy(), np.zeros((y.shape[0], y.shape[0]))


def make_ekf(model: ControlAffineModel, spec: SensorModel, dt: float, Q=None) -> Callable:
    """Continuous-discrete extended Kalman filter.

    Prediction integrates ``zdot = f(z) + g(z)u`` and
    ``cdot = F c + c F' + Q`` over one step with classical RK4, where ``F``
    is the AD Jacobian of the closed-loop drift. The update is the linear
    Kalman update with the sensor's output matrix, in Joseph form. Passing
    ``u=None`` skips prediction (used for the first sample).
    """
    n = model.n
    C = spec.output_matrix(n)
    R = spec.covariance(n, dt)
    Q = np.zeros((n, n)) if Q is None else np.atleast_2d(np.asarray(Q, dtype=float))
    eye = np.eye(n)

    def rhs(z, c, u):
        field = model.closed_loop(u)
        F = jacobian(field, list(z))
        zdot = np.asarray(field(list(z)), dtype=float)
        return zdot, F @ c + c @ F.T + Q

    def estimator(t, y, z, u, c):
        z = np.asarray(z, dtype=float)
        c = np.asarray(c, dtype=float)
        if u is not None:
            u = [float(v) for v in u]
            k1 = rhs(z, c, u)
            k2 = rhs(z + 0.5 * dt * k1[0], c + 0.5 * dt * k1[1], u)
            k3 = rhs(z + 0.5 * dt * k2[0], c + 0.5 * dt * k2[1], u)
            k4 = rhs(z + dt * k3[0], c + dt * k3[1], u)
            z = z + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            c = c + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            c = 0.5 * (c + c.T)
        S = C @ c @ C.T + R
        try:
            if np.linalg.cond(S) > 1e12:
                raise np.linalg.LinAlgError("ill-conditioned")
            K = np.linalg.solve(S, C @ c).T
        except np.linalg.LinAlgError:
            raise SingularInnovation("innovation covariance is not invertible") from None
        z_new = z + K @ (np.asarray(y, dtype=float) - C @ z)
        IKC = eye - K @ C
        c_new = IKC @ c @ IKC.T + K @ R @ K.T
        return z_new, 0.5 * (c_new + c_new.T)

    return estimator


def make_estimator(kind: str, model: ControlAffineModel | None = None,
                   spec: SensorModel | None = None, dt: float | None = None, Q=None) -> Callable:
    if kind == "passthrough":
        return passthrough
    if kind == "ekf":
        if model is None or dt is None:
            raise ValueError("the EKF needs the model and the step dt")
        return make_ekf(model, spec or SensorModel(), dt, Q)
    raise ValueError(f"unknown estimator {kind!r}")


# ------------------------------------------------------------ perturbation


@dataclass(frozen=True)
class PerturbationSpec:
    kind: str = "none"
    M: Optional[np.ndarray] = None
    bounds: Optional[np.ndarray] = None
    law: str = "uniform"
    sigma: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in ("none", "bounded", "brownian"):
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.kind == "bounded":
            M = np.atleast_2d(np.asarray(self.M, dtype=float))
            if not np.all((M == 0) | (M == 1)) or np.any(M.sum(axis=1) > 1):
                raise ValueError("M must be zero-one with at most one non-zero per row")
            W = np.asarray(self.bounds, dtype=float).reshape(-1, 2)
            if W.shape[0] != M.shape[1] or np.any(W[:, 0] > W[:, 1]):
                raise ValueError("bounds must give one [lo, hi] per column of M")
            if self.law not in ("uniform", "extremal"):
                raise ValueError(f"unknown disturbance law {self.law!r}")
            object.__setattr__(self, "M", M)
            object.__setattr__(self, "bounds", W)
        if self.kind == "brownian" and self.sigma is None:
            raise ValueError("brownian perturbation needs a diffusion sigma(x)")


def make_perturbation(spec: PerturbationSpec, n: int) -> Callable:
    """``pert(x, u, f, g) -> sampler(key) -> vector[n]``.

    Brownian samplers return the direction ``sigma(x) xi``; the integrator
    applies the ``sqrt(dt)`` scaling.
    """
    zero = np.zeros(n)
    if spec.kind == "none":
        return lambda x, u, f, g: (lambda key: zero.copy())
    if spec.kind == "bounded":
        M, W = spec.M, spec.bounds
        lo, hi = W[:, 0], W[:, 1]
        extremal = spec.law == "extremal"

        def bounded(x, u, f, g):
            def sample(key):
                if extremal:
                    w = np.where(key.integers(2, lo.shape[0]) == 1, hi, lo)
                else:
                    w = lo + (hi - lo) * key.uniform(lo.shape[0])
                return M @ w

            return sample

        return bounded
    sigma = spec.sigma

    def brownian(x, u, f, g):
        S = np.atleast_2d(np.asarray(sigma(x), dtype=float)).reshape(n, -1)

        def sample(key):
            return S @ key.normal(S.shape[1])

        return sample

    return brownian


# ------------------------------------------------------------- integrators


def euler(x, xdot, dt):
    return np.asarray(x, dtype=float) + dt * np.asarray(xdot, dtype=float)


def rk4(x, field, dt):
    """Classical four-stage step; ``field`` is held fixed (zero-order hold on u)."""
    x = np.asarray(x, dtype=float)
    k1 = np.asarray(field(x), dtype=float)
    k2 = np.asarray(field(x + 0.5 * dt * k1), dtype=float)
    k3 = np.asarray(field(x + 0.5 * dt * k2), dtype=float)
    k4 = np.asarray(field(x + dt * k3), dtype=float)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def euler_maruyama(x, drift, noise, dt):
    """``x + dt * drift + sqrt(dt) * noise`` with ``noise = sigma(x) xi``."""
    return (np.asarray(x, dtype=float) + dt * np.asarray(drift, dtype=float)
            + math.sqrt(dt) * np.asarray(noise, dtype=float))


INTEGRATORS = ("euler", "rk4", "euler_maruyama")
