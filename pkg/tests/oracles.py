"""Independent reference computations shared by the unit and acceptance tests.

Nothing here imports the package's solver, differentiator or barrier code;
the point is to check those against something written separately.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

# ----------------------------------------------------------- differentiation


def fd_gradient(f, x, rel_step=1e-5):
    """Central differences with step ``rel_step * max(1, |x_i|)``."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (float(f(xp)) - float(f(xm))) / (2.0 * h)
    return g


def rel_close(a, b, tol):
    """``|a - b| <= tol * max(1, |b|)`` elementwise."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return bool(np.all(np.abs(a - b) <= tol * np.maximum(1.0, np.abs(b))))


# ----------------------------------------------------------------------- QP


def project_halfspace(u0, a, b):
    """argmin |u - u0|^2 subject to a.u >= b, in closed form."""
    u0, a = np.asarray(u0, dtype=float), np.asarray(a, dtype=float)
    gap = b - a @ u0
    lam = max(0.0, gap) / (a @ a)
    return u0 + lam * a, lam


def brute_force_qp(H, q, A, b, tol=1e-9):
    """Enumerate every active set of ``min 1/2 u'Hu + q'u, A u >= b``.

    Each candidate solves the equality-constrained KKT system; the optimum is
    the feasible candidate with non-negative multipliers (lowest cost if
    several survive due to degeneracy). Returns ``None`` if none qualifies.
    """
    H, q, A, b = (np.asarray(v, dtype=float) for v in (H, q, A, b))
    m, k = q.size, b.size
    best = None
    for size in range(0, min(k, m) + 1):
        for S in itertools.combinations(range(k), size):
            S = list(S)
            AS = A[S]
            K = np.zeros((m + size, m + size))
            K[:m, :m] = H
            K[:m, m:] = -AS.T
            K[m:, :m] = AS
            rhs = np.concatenate([-q, b[S]])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                continue
            if not np.all(np.isfinite(sol)):
                continue
            u, lam = sol[:m], sol[m:]
            if np.any(lam < -tol) or np.any(A @ u < b - tol * (1 + np.abs(b))):
                continue
            cost = 0.5 * u @ H @ u + q @ u
            if best is None or cost < best[0] - 1e-12:
                best = (cost, u)
    return None if best is None else best[1]


# --------------------------------------------------------- future focused


def ff_grid(ego, agent, T, R, points=100_001):
    """Minimum of predicted squared distance minus (2R)^2 on a tau grid."""
    x, y, v, th = ego
    xh, yh, vxh, vyh = agent
    tau = np.linspace(0.0, T, points)
    ex = x + v * math.cos(th) * tau
    ey = y + v * math.sin(th) * tau
    hx = xh + vxh * tau
    hy = yh + vyh * tau
    return float(np.min((hx - ex) ** 2 + (hy - ey) ** 2)) - (2.0 * R) ** 2


def ff_unclamped_tau(ego, agent):
    x, y, v, th = ego
    xh, yh, vxh, vyh = agent
    dp = np.array([xh - x, yh - y])
    dv = np.array([vxh - v * math.cos(th), vyh - v * math.sin(th)])
    dv2 = dv @ dv
    return 0.0 if dv2 == 0 else float(-(dp @ dv) / dv2)


# ------------------------------------------------------------ transcriptions


def corridor_direct(x, x_min, x_max, y_min, y_max):
    px, py, v, th = x
    return [
        v * math.cos(th) + px - x_min,
        x_max - px - v * math.cos(th),
        v * math.sin(th) + py - y_min,
        y_max - py - v * math.sin(th),
    ]


def unicycle_f(x):
    return np.array([x[2] * math.cos(x[3]), x[2] * math.sin(x[3]), 0.0, 0.0])


UNICYCLE_G = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


# ------------------------------------------------------------ DSL corpus

LISTING_FORMULAS = [
    # unicycle drift and actuation entries
    "x[2] * cos(x[3])",
    "x[2] * sin(x[3])",
    "0",
    "1",
    # goal-seeking law and obstacle barrier in the same string style
    "k_v * (min(v_max, sqrt((xg - x[0])^2 + (yg - x[1])^2)) - x[2])",
    "(x[0] - cx)**2 + (x[1] - cy)**2 - r**2",
    "(x[0] - 1.75)^2 + (x[1] - 1.25)^2 - 0.5^2",
]

CORPUS = LISTING_FORMULAS + [
    "x[0]",
    "-x[0]",
    "--x[0]",
    "x[0] + x[1] + x[2]",
    "x[0] - x[1] - x[2]",
    "x[0] - (x[1] - x[2])",
    "x[0] / x[1] / x[2]",
    "x[0] / (x[1] / x[2])",
    "x[0] * x[1] / x[2]",
    "x[0] / (x[1] * x[2])",
    "2^3^2",
    "(2^3)^2",
    "-x[0]^2",
    "(-x[0])^2",
    "x[0]^-1",
    "x[0] ** 0.5",
    "sin(x[0])^2 + cos(x[0])^2",
    "exp(-x[0]^2 / 2)",
    "log(1 + x[0]^2)",
    "sqrt(x[0]^2 + x[1]^2)",
    "tan(x[0] / 4)",
    "abs(x[0] - x[1])",
    "sign(x[2]) * x[2]",
    "min(x[0], x[1])",
    "max(x[0], x[1], x[2])",
    "min(x[0] + 1, max(x[1], 2 * x[2]))",
    "pi * x[0]",
    "1e-3 * x[0] + 2.5e2",
    "0.1 + 0.2",
    "a * x[0] + b",
    "(a + b) * (c - d)",
    "a - (b + c)",
    "a / (b * c)",
    "-(a + b)",
    "x[0] * -x[1]",
    "x[0] - -x[1]",
    "2 * -3",
    "v * cos(th)",
    "x[1] * x[1] - x[0] * x[0]",
    "(1 - x[0]^2) * x[1] - x[0]",
    "mu * (1 - x[0]^2) * x[1] - x[0]",
    "x[2] * cos(x[3]) + x[0] - x_min",
    "x_max - x[0] - x[2] * cos(x[3])",
    "x[2] * sin(x[3]) + x[1] - y_min",
    "y_max - x[1] - x[2] * sin(x[3])",
    "exp(sin(cos(x[0])))",
    "((x[0]))",
    "1 / (1 + exp(-x[0]))",
    "x[0]^2^0.5",
    "3 - 2 - 1",
    "4 / 2 / 2",
    "x[3] * (x[2] - 1) ^ 3",
]
