"""Dense QP solver for CBF safety filters.

``minimize 1/2 u'Hu + q'u  subject to  A u >= b,  lo <= u <= hi``

The inner loop runs in the compiled ``_kernel`` extension when it is built;
otherwise (or with ``BARRIERKIT_PURE_PYTHON=1``) the numpy implementation
in ``_active_set`` is used. Both implement the same algorithm.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import IllConditioned
from . import _active_set

KERNELS = {"python": _active_set.solve}
try:
    from . import _kernel

    KERNELS["compiled"] = _kernel.solve
except ImportError:  # extension not built
    pass

if os.environ.get("BARRIERKIT_PURE_PYTHON") == "1" or "compiled" not in KERNELS:
    KERNEL = "python"
else:
    KERNEL = "compiled"

FEAS_TOL = 1e-10
_STATUS = {0: "optimal", 1: "infeasible", 2: "max_iterations"}


@dataclass(frozen=True)
class QpProblem:
    H: np.ndarray
    q: np.ndarray
    A: np.ndarray
    b: np.ndarray
    bounds: Optional[np.ndarray] = None

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        q = np.asarray(self.q, dtype=float).ravel()
        m = q.shape[0]
        A = np.asarray(self.A, dtype=float).reshape(-1, m)
        b = np.asarray(self.b, dtype=float).ravel()
        if H.shape != (m, m):
            raise ValueError(f"H must be {m}x{m}, got {H.shape}")
        if A.shape[0] != b.shape[0]:
            raise ValueError(f"A has {A.shape[0]} rows but b has {b.shape[0]} entries")
        if not np.allclose(H, H.T, rtol=0.0, atol=1e-12):
            raise ValueError("H must be symmetric")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        if self.bounds is not None:
            bounds = np.asarray(self.bounds, dtype=float).reshape(m, 2)
            object.__setattr__(self, "bounds", bounds)

    @property
    def m(self):
        return self.q.shape[0]

    @property
    def k(self):
        return self.b.shape[0]

    def stacked(self):
        """All inequality rows, bound rows appended after the A rows."""
        if self.bounds is None:
            return self.A, self.b
        rows, rhs = [self.A], [self.b]
        eye = np.eye(self.m)
        for i, (lo, hi) in enumerate(self.bounds):
            if np.isfinite(lo):
                rows.append(eye[i:i + 1])
                rhs.append([lo])
            if np.isfinite(hi):
                rows.append(-eye[i:i + 1])
                rhs.append([-hi])
        return np.vstack(rows), np.concatenate([np.asarray(r, dtype=float) for r in rhs])


@dataclass
class QpSolution:
    u_star: np.ndarray
    status: str
    active_set: list
    multipliers: np.ndarray
    iterations: int
    solve_time: float
    bound_multipliers: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    @property
    def optimal(self):
        return self.status == "optimal"


def solve(p: QpProblem, kernel: str | None = None, max_iter: int | None = None) -> QpSolution:
    """Solve ``p`` exactly with the dual active-set method.

    Raises IllConditioned if ``H`` is not numerically positive definite; an
    empty feasible set is reported through ``status == "infeasible"``.
    """
    start = time.perf_counter()
    fn = KERNELS[kernel or KERNEL]
    try:
        L = np.linalg.cholesky(p.H)
    except np.linalg.LinAlgError as exc:
        raise IllConditioned(f"H is not positive definite: {exc}") from None
    if not np.all(np.isfinite(L)) or np.min(np.abs(np.diag(L))) < 1e-12 * max(1.0, np.max(np.abs(np.diag(L)))):
        raise IllConditioned("H is numerically singular")
    C, d = p.stacked()
    if not (np.all(np.isfinite(C)) and np.all(np.isfinite(d)) and np.all(np.isfinite(p.q))):
        raise ValueError("QP data must be finite")
    if max_iter is None:
        max_iter = 50 * (C.shape[0] + p.m)
    x, lam, active, status, it = fn(L, p.q, C, d, max_iter, FEAS_TOL)
    elapsed = time.perf_counter() - start

    k = p.k
    bound_lam = np.zeros((p.m, 2))
    if p.bounds is not None:
        j = k
        for i, (lo, hi) in enumerate(p.bounds):
            if np.isfinite(lo):
                bound_lam[i, 0] = lam[j]
                j += 1
            if np.isfinite(hi):
                bound_lam[i, 1] = lam[j]
                j += 1
    return QpSolution(
        u_star=np.asarray(x, dtype=float),
        status=_STATUS[status],
        active_set=sorted(a for a in active if a < k),
        multipliers=np.asarray(lam[:k], dtype=float),
        iterations=int(it),
        solve_time=elapsed,
        bound_multipliers=bound_lam,
    )


def kkt_residuals(p: QpProblem, sol: QpSolution) -> dict:
    """Primal feasibility, stationarity and complementarity residuals."""
    C, d = p.stacked()
    lam = np.concatenate([sol.multipliers, _bound_lams(p, sol)])
    u = sol.u_star
    slack = C @ u - d
    return {
        "primal": float(max(0.0, -np.min(slack, initial=0.0))),
        "stationarity": float(np.max(np.abs(p.H @ u + p.q - C.T @ lam), initial=0.0)),
        "complementarity": float(np.max(np.abs(lam * slack), initial=0.0)),
        "dual": float(max(0.0, -np.min(lam, initial=0.0))),
    }


def _bound_lams(p, sol):
    if p.bounds is None:
        return np.zeros(0)
    out = []
    for i, (lo, hi) in enumerate(p.bounds):
        if np.isfinite(lo):
            out.append(sol.bound_multipliers[i, 0])
        if np.isfinite(hi):
            out.append(sol.bound_multipliers[i, 1])
    return np.asarray(out, dtype=float)


from .cbf import build_cbf_qp, cbf_rows  # noqa: E402

__all__ = ["KERNEL", "KERNELS", "QpProblem", "QpSolution", "build_cbf_qp", "cbf_rows",
           "kkt_residuals", "solve"]
