# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled dual active-set kernel; same contract as ``_active_set.solve``."""

import numpy as np

from libc.math cimport fabs, sqrt, INFINITY

cdef enum:
    OPTIMAL = 0
    INFEASIBLE = 1
    MAX_ITERATIONS = 2

cdef double TIE_TOL = 1e-9


cdef void _cho_solve(double[:, ::1] L, double* v, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(m):
        acc = v[i]
        for j in range(i):
            acc -= L[i, j] * v[j]
        v[i] = acc / L[i, i]
    for i in range(m - 1, -1, -1):
        acc = v[i]
        for j in range(i + 1, m):
            acc -= L[j, i] * v[j]
        v[i] = acc / L[i, i]


cdef int _gauss_solve(double* M, double* r, Py_ssize_t n) noexcept nogil:
    # partial pivoting; M (row-major n*n) and r are overwritten
    cdef Py_ssize_t i, j, c, piv
    cdef double best, f, tmp
    for c in range(n):
        piv = c
        best = fabs(M[c * n + c])
        for i in range(c + 1, n):
            if fabs(M[i * n + c]) > best:
                best = fabs(M[i * n + c])
                piv = i
        if best == 0.0:
            return -1
        if piv != c:
            for j in range(n):
                tmp = M[c * n + j]
                M[c * n + j] = M[piv * n + j]
                M[piv * n + j] = tmp
            tmp = r[c]
            r[c] = r[piv]
            r[piv] = tmp
        for i in range(c + 1, n):
            f = M[i * n + c] / M[c * n + c]
            for j in range(c, n):
                M[i * n + j] -= f * M[c * n + j]
            r[i] -= f * r[c]
    for i in range(n - 1, -1, -1):
        tmp = r[i]
        for j in range(i + 1, n):
            tmp -= M[i * n + j] * r[j]
        r[i] = tmp / M[i * n + i]
    return 0


cdef inline double _dot(double* a, double* b, Py_ssize_t m) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(m):
        acc += a[i] * b[i]
    return acc


def solve(L_in, q_in, C_in, b_in, int max_iter, double feas_tol):
    cdef double[:, ::1] L = np.ascontiguousarray(L_in, dtype=np.float64)
    cdef double[::1] q = np.ascontiguousarray(q_in, dtype=np.float64)
    cdef Py_ssize_t m = q.shape[0]
    cdef double[:, ::1] C = np.ascontiguousarray(np.asarray(C_in, dtype=np.float64).reshape(-1, m))
    cdef double[::1] b = np.ascontiguousarray(b_in, dtype=np.float64)
    cdef Py_ssize_t k = b.shape[0]

    x_arr = np.empty(m)
    lam_arr = np.zeros(k)
    cdef double[::1] x = x_arr
    cdef double[::1] lam = lam_arr
    cdef double[:, ::1] W = np.empty((k if k > 0 else 1, m))
    cdef double[::1] cnorm = np.empty(k if k > 0 else 1)
    # each constraint enters at most once, so k + 1 slots always suffice
    cdef Py_ssize_t cap = (k if k > m else m) + 1
    cdef Py_ssize_t[::1] active = np.empty(cap, dtype=np.intp)
    cdef double[::1] u = np.zeros(cap)
    cdef double[::1] r = np.zeros(cap)
    cdef double[::1] z = np.empty(m)
    cdef double[::1] M = np.empty(cap * cap)
    cdef signed char[::1] is_active = np.zeros(k if k > 0 else 1, dtype=np.int8)

    cdef Py_ssize_t i, j, a, idx, p, drop, na = 0
    cdef int it = 0, status
    cdef double s, score, worst, up, t1, t2, t, ratio, zn, wn, acc

    with nogil:
        for i in range(m):
            x[i] = -q[i]
        _cho_solve(L, &x[0], m)
        for j in range(k):
            for i in range(m):
                W[j, i] = C[j, i]
            _cho_solve(L, &W[j, 0], m)
            cnorm[j] = sqrt(_dot(&C[j, 0], &C[j, 0], m))

        while True:
            p = -1
            worst = 0.0
            for j in range(k):
                if is_active[j]:
                    continue
                s = _dot(&C[j, 0], &x[0], m) - b[j]
                if s < -feas_tol * (1.0 + fabs(b[j])):
                    score = s / cnorm[j] if cnorm[j] > 0.0 else -INFINITY
                    if p < 0 or score < worst - TIE_TOL * (1.0 + fabs(worst)):
                        worst = score
                        p = j
            if p < 0:
                status = OPTIMAL
                break

            up = 0.0
            status = -1
            while True:
                it += 1
                if it > max_iter:
                    status = MAX_ITERATIONS
                    break
                # r = (N W_A)^{-1} N w_p ; z = w_p - W_A r
                for i in range(na):
                    r[i] = _dot(&C[active[i], 0], &W[p, 0], m)
                    for j in range(na):
                        M[i * na + j] = _dot(&C[active[i], 0], &W[active[j], 0], m)
                if na > 0 and _gauss_solve(&M[0], &r[0], na) != 0:
                    status = INFEASIBLE
                    break
                for i in range(m):
                    acc = W[p, i]
                    for j in range(na):
                        acc -= W[active[j], i] * r[j]
                    z[i] = acc

                t1 = INFINITY
                drop = -1
                for idx in range(na):
                    if r[idx] > 1e-14:
                        ratio = u[idx] / r[idx]
                        if ratio < t1 or (ratio == t1 and active[idx] < active[drop]):
                            t1 = ratio
                            drop = idx
                zn = _dot(&z[0], &C[p, 0], m)
                wn = _dot(&W[p, 0], &C[p, 0], m)
                if zn <= 1e-12 * wn:
                    t2 = INFINITY
                else:
                    t2 = -(_dot(&C[p, 0], &x[0], m) - b[p]) / zn
                t = t1 if t1 < t2 else t2

                if t == INFINITY:
                    status = INFEASIBLE
                    break
                if t2 < INFINITY:
                    for i in range(m):
                        x[i] += t * z[i]
                for idx in range(na):
                    u[idx] -= t * r[idx]
                up += t
                if t2 <= t1:
                    active[na] = p
                    u[na] = up
                    is_active[p] = 1
                    na += 1
                    break
                is_active[active[drop]] = 0
                for idx in range(drop, na - 1):
                    active[idx] = active[idx + 1]
                    u[idx] = u[idx + 1]
                na -= 1
            if status != -1:
                break

        for idx in range(na):
            lam[active[idx]] = u[idx] if u[idx] > 0.0 else 0.0

    return x_arr, lam_arr, [int(active[i]) for i in range(na)], status, it
