"""Pure-Python dual active-set kernel (fallback for the compiled ``_kernel``).

Solves ``min 1/2 x'Gx + q'x  s.t.  C x >= b`` with ``G = L L'`` by the
Goldfarb-Idnani scheme: start at the unconstrained minimum, repeatedly add
the most violated constraint, and drop active constraints whose multiplier
would turn negative. The active-set projections are rebuilt from scratch
each iteration; the active set never exceeds the number of variables.
"""

import numpy as np
from scipy.linalg import cho_solve

OPTIMAL, INFEASIBLE, MAX_ITERATIONS = 0, 1, 2
TIE_TOL = 1e-9


def solve(L, q, C, b, max_iter, feas_tol):
    m = q.shape[0]
    k = b.shape[0]
    chol = (L, True)
    x = -cho_solve(chol, q)
    # W[:, j] = G^{-1} c_j, reused by every projection below
    W = cho_solve(chol, C.T) if k else np.zeros((m, 0))
    cnorm = np.sqrt(np.einsum("ij,ij->i", C, C)) if k else np.zeros(0)
    active = []
    u = []
    lam = np.zeros(k)
    it = 0

    while True:
        s = C @ x - b
        p = -1
        worst = 0.0
        for j in range(k):
            if j in active:
                continue
            if s[j] < -feas_tol * (1.0 + abs(b[j])):
                # most violated by normalised distance; scores within
                # TIE_TOL count as ties so rounding cannot beat the lower index
                score = s[j] / cnorm[j] if cnorm[j] > 0 else -np.inf
                if p < 0 or score < worst - TIE_TOL * (1.0 + abs(worst)):
                    worst, p = score, j
        if p < 0:
            for a, ua in zip(active, u):
                lam[a] = max(ua, 0.0)
            return x, lam, active, OPTIMAL, it

        up = 0.0
        while True:
            it += 1
            if it > max_iter:
                for a, ua in zip(active, u):
                    lam[a] = max(ua, 0.0)
                return x, lam, active, MAX_ITERATIONS, it
            n_p = C[p]
            w_p = W[:, p]
            if active:
                N = C[active]
                WA = W[:, active]
                try:
                    r = np.linalg.solve(N @ WA, N @ w_p)
                except np.linalg.LinAlgError:
                    for a, ua in zip(active, u):
                        lam[a] = max(ua, 0.0)
                    return x, lam, active, INFEASIBLE, it
                z = w_p - WA @ r
            else:
                r = np.zeros(0)
                z = w_p

            t1, drop = np.inf, -1
            for idx, a in enumerate(active):
                if r[idx] > 1e-14:
                    ratio = u[idx] / r[idx]
                    if ratio < t1 or (ratio == t1 and a < active[drop]):
                        t1, drop = ratio, idx
            zn = float(z @ n_p)
            if zn <= 1e-12 * float(w_p @ n_p):
                t2 = np.inf
            else:
                t2 = -(float(n_p @ x) - b[p]) / zn
            t = min(t1, t2)

            if t == np.inf:
                for a, ua in zip(active, u):
                    lam[a] = max(ua, 0.0)
                return x, lam, active, INFEASIBLE, it
            if t2 < np.inf:
                x = x + t * z
            u = [ua - t * ra for ua, ra in zip(u, r)]
            up += t
            if t2 <= t1:
                active.append(p)
                u.append(up)
                break
            del active[drop]
            del u[drop]
