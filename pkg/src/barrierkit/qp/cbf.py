"""Assemble the CBF-QP ``min 1/2|u - u_ref|^2  s.t.  Lf h_k + Lg h_k u >= -alpha_k(h_k)``."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch, NonUnitRelativeDegree

LG_ZERO_TOL = 1e-12


def _probe_lg(cert, model, x, g_dir):
    # Lg h vanished at x; look at nearby states before calling it structural
    x = np.asarray(x, dtype=float)
    for i in range(len(x)):
        step = 1e-3 * max(1.0, abs(x[i]))
        for sgn in (1.0, -1.0):
            xs = x.copy()
            xs[i] += sgn * step
            _, dh = cert.value_and_gradient(xs)
            g = np.asarray(model.actuation(xs), dtype=float).reshape(model.n, model.m)
            if np.max(np.abs(dh @ g)) > LG_ZERO_TOL:
                return
    raise NonUnitRelativeDegree(
        f"certificate {cert.name!r} has Lg h = 0 around x; rectify its relative degree first"
    )


def cbf_rows(certs, model, x):
    """Return ``(A, b, h)`` with one row per certificate, in package order."""
    if len(x) != model.n:
        raise DimensionMismatch(f"state has length {len(x)}, model expects {model.n}")
    f = np.asarray(model.drift(x), dtype=float)
    g = np.asarray(model.actuation(x), dtype=float).reshape(model.n, model.m)
    k = len(certs)
    A = np.empty((k, model.m))
    b = np.empty(k)
    h = np.empty(k)
    for i, cert in enumerate(certs):
        if cert.n is not None and cert.n != model.n:
            raise DimensionMismatch(f"certificate {cert.name!r} is over {cert.n} states")
        hv, dh = cert.value_and_gradient(x)
        lg = dh @ g
        # declared degree-one certificates may lose Lg locally (h_ff on its
        # tau*=0 branch); only undeclared ones are probed
        if cert.relative_degree != 1 and np.max(np.abs(lg), initial=0.0) <= LG_ZERO_TOL:
            _probe_lg(cert, model, x, lg)
        A[i] = lg
        b[i] = -float(cert.alpha(hv)) - float(dh @ f)
        h[i] = hv
    return A, b, h


def build_cbf_qp(u_ref, certs, model, x, bounds=None):
    """CBF-QP at state ``x`` around the reference input ``u_ref``."""
    from . import QpProblem

    if len(certs) == 0:
        raise ValueError("the certificate package is empty")
    u_ref = np.asarray(u_ref, dtype=float).ravel()
    if u_ref.shape[0] != model.m:
        raise DimensionMismatch(f"reference input has length {u_ref.shape[0]}, model expects {model.m}")
    A, b, _ = cbf_rows(certs, model, x)
    if bounds is None:
        bounds = model.input_bounds
    return QpProblem(H=np.eye(model.m), q=-u_ref, A=A, b=b, bounds=bounds)
