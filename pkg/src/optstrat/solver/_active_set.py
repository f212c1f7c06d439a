"""Primal active-set method for convex (PSD) quadratic programs.

Works on ``min 1/2 x'Px + c'x  s.t.  A x <= b / A x = b, lo <= x <= hi`` from
a feasible vertex. Bound constraints in the working set are handled by
fixing the variable, so each iteration factorizes the KKT system of the free
variables and the active general rows only.

Inertia control keeps the KKT matrix nonsingular when P is only
semidefinite: before a constraint is dropped, the descent direction leaving
it is computed with the current (nonsingular) system. If that direction has
zero curvature the method moves along it until a new constraint blocks,
exactly like a simplex edge step, instead of dropping into a singular
subspace.

Variable states: 0 free, 1 at lower, 2 at upper, 3 fixed (lo == hi).
Row states: 0 inactive, 1 active inequality, 2 equality, 3 redundant
equality (implied by the others, kept out of the KKT system).
"""

import numpy as np

from .._accel import njit

OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
NUMERICAL = 3

_DEGEN_SWITCH = 50


def _kkt_solve(P, A, F, R, rhs):
    nf = F.shape[0]
    nr = R.shape[0]
    K = np.zeros((nf + nr, nf + nr))
    for a in range(nf):
        for bb in range(nf):
            K[a, bb] = P[F[a], F[bb]]
    for a in range(nr):
        for bb in range(nf):
            v = A[R[a], F[bb]]
            K[nf + a, bb] = v
            K[bb, nf + a] = v
    ok = True
    sol = np.zeros(nf + nr)
    try:
        sol = np.linalg.solve(K, rhs)
    except Exception:  # noqa: BLE001 - numba only supports the bare form
        ok = False
    if ok:
        for v in sol:
            if not np.isfinite(v):
                ok = False
                break
    if ok:
        res = K @ sol - rhs
        scale = 1.0
        for v in rhs:
            scale = max(scale, abs(v))
        for v in res:
            if abs(v) > 1e-7 * scale:
                ok = False
                break
    return ok, sol


def _ratio_test(A, b, lo, hi, x, d, vs, rs, alpha_max, bland):
    """Longest step along ``d`` keeping all inactive constraints satisfied.

    Returns (alpha, kind, index, bound_side); kind 0 none, 1 row, 2 variable.
    """
    m = A.shape[0]
    n = x.shape[0]
    alpha = alpha_max
    kind = 0
    idx = -1
    side = 0
    best_rate = 0.0
    for i in range(m):
        if rs[i] != 0:
            continue
        ad = 0.0
        ax = 0.0
        for j in range(n):
            ad += A[i, j] * d[j]
            ax += A[i, j] * x[j]
        if ad <= 1e-12:
            continue
        t = (b[i] - ax) / ad
        if t < 0.0:
            t = 0.0
        take = t < alpha - 1e-14
        if not take and t <= alpha + 1e-14 and kind != 0:
            take = (i < idx) if (bland and kind == 1) else ad > best_rate
        if take:
            alpha = t
            kind = 1
            idx = i
            best_rate = ad
    for j in range(n):
        if vs[j] != 0:
            continue
        dj = d[j]
        if dj > 1e-12 and np.isfinite(hi[j]):
            t = (hi[j] - x[j]) / dj
            s = 2
        elif dj < -1e-12 and np.isfinite(lo[j]):
            t = (lo[j] - x[j]) / dj
            s = 1
        else:
            continue
        if t < 0.0:
            t = 0.0
        rate = abs(dj)
        take = t < alpha - 1e-14
        if not take and t <= alpha + 1e-14 and kind != 0:
            take = False if bland else rate > best_rate
        if take:
            alpha = t
            kind = 2
            idx = j
            side = s
            best_rate = rate
    return alpha, kind, idx, side


def _active_set(P, c, A, b, lo, hi, x0, vstate, rstate, bland_start, max_iter):
    n = c.shape[0]
    m = A.shape[0]
    x = x0.copy()
    vs = vstate.copy()
    rs = rstate.copy()
    lam = np.zeros(m)
    mu = np.zeros(n)
    status = NUMERICAL
    bland = bland_start
    degen = 0
    it = 0
    while it < max_iter:
        it += 1
        nf = 0
        for j in range(n):
            if vs[j] == 0:
                nf += 1
        nr = 0
        for i in range(m):
            if rs[i] == 1 or rs[i] == 2:
                nr += 1
        F = np.empty(nf, dtype=np.int64)
        R = np.empty(nr, dtype=np.int64)
        a = 0
        for j in range(n):
            if vs[j] == 0:
                F[a] = j
                a += 1
        a = 0
        for i in range(m):
            if rs[i] == 1 or rs[i] == 2:
                R[a] = i
                a += 1
        g = P @ x + c
        rhs = np.zeros(nf + nr)
        for a in range(nf):
            rhs[a] = -g[F[a]]
        ok, sol = _kkt_solve(P, A, F, R, rhs)
        if not ok:
            status = NUMERICAL
            break
        p = np.zeros(n)
        pmax = 0.0
        for a in range(nf):
            p[F[a]] = sol[a]
            pmax = max(pmax, abs(sol[a]))
        xmax = 0.0
        gmax = 0.0
        for j in range(n):
            xmax = max(xmax, abs(x[j]))
            gmax = max(gmax, abs(g[j]))

        if pmax <= 1e-10 * (1.0 + xmax):
            # stationary on the working set: check multipliers
            lam[:] = 0.0
            for a in range(nr):
                lam[R[a]] = sol[nf + a]
            mu[:] = 0.0
            dtol = 1e-9 * (1.0 + gmax)
            worst = -dtol
            wkind = 0
            widx = -1
            for a in range(nr):
                i = R[a]
                if rs[i] == 1 and lam[i] < worst:
                    if bland and wkind != 0:
                        continue
                    worst = lam[i]
                    wkind = 1
                    widx = i
            for j in range(n):
                if vs[j] != 1 and vs[j] != 2:
                    continue
                r = g[j]
                for a in range(nr):
                    r += A[R[a], j] * lam[R[a]]
                mu[j] = r if vs[j] == 1 else -r
                if mu[j] < worst:
                    if bland and wkind != 0:
                        continue
                    worst = mu[j]
                    wkind = 2
                    widx = j
            if wkind == 0:
                status = OPTIMAL
                break
            # direction leaving the dropped constraint, from the current system
            rhs2 = np.zeros(nf + nr)
            d = np.zeros(n)
            if wkind == 1:
                for a in range(nr):
                    if R[a] == widx:
                        rhs2[nf + a] = -1.0
            else:
                s = 1.0 if vs[widx] == 1 else -1.0
                d[widx] = s
                for a in range(nf):
                    rhs2[a] = -P[F[a], widx] * s
                for a in range(nr):
                    rhs2[nf + a] = -A[R[a], widx] * s
            ok, sol2 = _kkt_solve(P, A, F, R, rhs2)
            if not ok:
                status = NUMERICAL
                break
            for a in range(nf):
                d[F[a]] = sol2[a]
            curv = d @ (P @ d)
            dd = d @ d
            if wkind == 1:
                rs[widx] = 0
            else:
                vs[widx] = 0
            if curv > 1e-10 * dd * (1.0 + gmax):
                continue
            alpha, kind, idx, side = _ratio_test(A, b, lo, hi, x, d, vs, rs, np.inf, bland)
            if kind == 0:
                status = UNBOUNDED
                break
            step = d
        else:
            alpha, kind, idx, side = _ratio_test(A, b, lo, hi, x, p, vs, rs, 1.0, bland)
            step = p
        if alpha <= 1e-14:
            degen += 1
            if degen > _DEGEN_SWITCH:
                bland = True
        else:
            degen = 0
        for j in range(n):
            x[j] += alpha * step[j]
        if kind == 1:
            rs[idx] = 1
        elif kind == 2:
            vs[idx] = side
            x[idx] = hi[idx] if side == 2 else lo[idx]
    return status, x, vs, rs, lam, mu, it


_kkt_solve = njit(_kkt_solve)
_ratio_test = njit(_ratio_test)
active_set_kernel = njit(_active_set)
