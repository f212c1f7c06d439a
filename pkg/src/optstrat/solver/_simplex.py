"""Dense bounded-variable primal simplex.

Solves ``min c'x  s.t.  A x <= b (rows with is_eq False), A x = b (is_eq True),
lo <= x <= hi`` on a full tableau. Every general row gets a logical column
(slack with bounds [0, inf) or [0, 0] for equalities); the starting basis is
all logicals. Phase 1 minimizes the sum of bound violations of the basic
variables (composite simplex), so any starting basis works, which lets free
structurals be pivoted into the basis up front. Dantzig pricing, switching to
Bland's rule on degenerate stalls. The tableau is refactorized periodically.
"""

import numpy as np

from .._accel import njit

BASIC = -1
FREE0 = 0
AT_LOWER = 1
AT_UPPER = 2

OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
NUMERICAL = 3

_PIV_TOL = 1e-9
_DUAL_TOL = 1e-9
_FEAS_TOL = 1e-9
_REFACTOR_EVERY = 64
_DEGEN_SWITCH = 40


def _pivot(T, rhs, r, j):
    piv = T[r, j]
    T[r, :] /= piv
    rhs[r] /= piv
    col = T[:, j].copy()
    col[r] = 0.0
    for i in range(T.shape[0]):
        f = col[i]
        if f != 0.0:
            T[i, :] -= f * T[r, :]
            rhs[i] -= f * rhs[r]
    T[:, j] = 0.0
    T[r, j] = 1.0


def _refactor(A, b, basis, xval, state, T, rhs):
    m, n = A.shape
    full = np.zeros((m, n + m))
    full[:, :n] = A
    for i in range(m):
        full[i, n + i] = 1.0
    B = np.empty((m, m))
    for i in range(m):
        B[:, i] = full[:, basis[i]]
    Binv = np.linalg.inv(B)
    T[:, :] = Binv @ full
    rhs[:] = Binv @ b
    xn = xval.copy()
    for i in range(m):
        xn[basis[i]] = 0.0
    beta = rhs - T @ xn
    for i in range(m):
        xval[basis[i]] = beta[i]


def _simplex(A, b, is_eq, c, lo, hi, phase1_only, bland_start, max_iter):
    m, n = A.shape
    N = n + m
    T = np.zeros((m, N))
    T[:, :n] = A
    for i in range(m):
        T[i, n + i] = 1.0
    rhs = b.copy()
    lb = np.empty(N)
    ub = np.empty(N)
    lb[:n] = lo
    ub[:n] = hi
    for i in range(m):
        lb[n + i] = 0.0
        ub[n + i] = 0.0 if is_eq[i] else np.inf
    cost = np.zeros(N)
    cost[:n] = c
    basis = np.empty(m, dtype=np.int64)
    state = np.empty(N, dtype=np.int64)
    xval = np.zeros(N)
    for j in range(n):
        if np.isfinite(lo[j]):
            state[j] = AT_LOWER
            xval[j] = lo[j]
        elif np.isfinite(hi[j]):
            state[j] = AT_UPPER
            xval[j] = hi[j]
        else:
            state[j] = FREE0
    for i in range(m):
        basis[i] = n + i
        state[n + i] = BASIC

    # crash free structurals into the basis
    for j in range(n):
        if state[j] != FREE0:
            continue
        best = -1
        bv = 1e-7
        for i in range(m):
            if basis[i] >= n and abs(T[i, j]) > bv:
                best = i
                bv = abs(T[i, j])
        if best >= 0:
            k = basis[best]
            _pivot(T, rhs, best, j)
            state[k] = AT_LOWER
            xval[k] = 0.0
            basis[best] = j
            state[j] = BASIC
    _refactor(A, b, basis, xval, state, T, rhs)

    phase = 1
    bland = bland_start
    degen = 0
    since_refactor = 0
    status = NUMERICAL
    it = 0
    while it < max_iter:
        it += 1
        if phase == 1:
            cb = np.zeros(m)
            infeas = False
            for i in range(m):
                k = basis[i]
                v = xval[k]
                if v < lb[k] - _FEAS_TOL * (1.0 + abs(lb[k])):
                    cb[i] = -1.0
                    infeas = True
                elif v > ub[k] + _FEAS_TOL * (1.0 + abs(ub[k])):
                    cb[i] = 1.0
                    infeas = True
            if not infeas:
                phase = 2
                if phase1_only:
                    status = OPTIMAL
                    break
                continue
            d = -(cb @ T)
        else:
            cb = np.empty(m)
            for i in range(m):
                cb[i] = cost[basis[i]]
            d = cost - cb @ T

        # pricing
        enter = -1
        direction = 0
        best = 0.0
        for j in range(N):
            s = state[j]
            if s == BASIC or ub[j] - lb[j] <= 0.0:
                continue
            dj = d[j]
            if dj < -_DUAL_TOL and (s == AT_LOWER or s == FREE0):
                score = -dj
                dj_dir = 1
            elif dj > _DUAL_TOL and (s == AT_UPPER or s == FREE0):
                score = dj
                dj_dir = -1
            else:
                continue
            if bland:
                enter = j
                direction = dj_dir
                break
            if score > best:
                best = score
                enter = j
                direction = dj_dir
        if enter < 0:
            if phase == 1:
                status = INFEASIBLE
            else:
                status = OPTIMAL
            break

        # ratio test
        col = T[:, enter]
        tmin = np.inf
        leave = -1
        leave_val = 0.0
        rate_best = 0.0
        if np.isfinite(lb[enter]) and np.isfinite(ub[enter]):
            tmin = ub[enter] - lb[enter]
        for i in range(m):
            rate = -direction * col[i]
            if abs(rate) <= _PIV_TOL:
                continue
            k = basis[i]
            v = xval[k]
            ltol = _FEAS_TOL * (1.0 + abs(lb[k]))
            utol = _FEAS_TOL * (1.0 + abs(ub[k]))
            if rate < 0.0:
                if v > ub[k] + utol:
                    bound = ub[k]
                elif v >= lb[k] - ltol and np.isfinite(lb[k]):
                    bound = lb[k]
                else:
                    continue
                t = (v - bound) / (-rate)
            else:
                if v < lb[k] - ltol:
                    bound = lb[k]
                elif v <= ub[k] + utol and np.isfinite(ub[k]):
                    bound = ub[k]
                else:
                    continue
                t = (bound - v) / rate
            if t < 0.0:
                t = 0.0
            take = False
            if t < tmin - 1e-12:
                take = True
            elif t <= tmin + 1e-12 and leave >= 0:
                if bland:
                    take = k < basis[leave]
                else:
                    take = abs(rate) > rate_best
            if take:
                tmin = t
                leave = i
                leave_val = bound
                rate_best = abs(rate)
        if not np.isfinite(tmin):
            status = UNBOUNDED if phase == 2 else NUMERICAL
            break

        if tmin <= 1e-12:
            degen += 1
            if degen > _DEGEN_SWITCH:
                bland = True
        else:
            degen = 0
            bland = bland_start

        # move
        xval[enter] += direction * tmin
        for i in range(m):
            xval[basis[i]] -= direction * tmin * col[i]
        if leave < 0:
            if direction > 0:
                state[enter] = AT_UPPER
                xval[enter] = ub[enter]
            else:
                state[enter] = AT_LOWER
                xval[enter] = lb[enter]
            continue
        k = basis[leave]
        xval[k] = leave_val
        if leave_val == lb[k]:
            state[k] = AT_LOWER
        else:
            state[k] = AT_UPPER
        _pivot(T, rhs, leave, enter)
        basis[leave] = enter
        state[enter] = BASIC
        since_refactor += 1
        if since_refactor >= _REFACTOR_EVERY:
            _refactor(A, b, basis, xval, state, T, rhs)
            since_refactor = 0

    if status == OPTIMAL:
        _refactor(A, b, basis, xval, state, T, rhs)
        if phase1_only:
            # move fixed (equality) logicals out of the basis where possible
            for i in range(m):
                k = basis[i]
                if k < n or ub[k] > lb[k]:
                    continue
                best = -1
                bv = 1e-9
                for j in range(N):
                    if state[j] == BASIC or ub[j] <= lb[j]:
                        continue
                    if abs(T[i, j]) > bv:
                        bv = abs(T[i, j])
                        best = j
                if best >= 0:
                    _pivot(T, rhs, i, best)
                    state[k] = AT_LOWER
                    xval[k] = 0.0
                    basis[i] = best
                    state[best] = BASIC
            _refactor(A, b, basis, xval, state, T, rhs)
        worst = 0.0
        for i in range(m):
            k = basis[i]
            v = xval[k]
            viol = max(lb[k] - v, v - ub[k])
            scale = 1.0 + max(abs(v), 1.0)
            if viol / scale > worst:
                worst = viol / scale
        if worst > 1e-7:
            status = NUMERICAL
    return status, xval[:n].copy(), state, basis, it


_pivot = njit(_pivot)
_refactor = njit(_refactor)
simplex_kernel = njit(_simplex)
