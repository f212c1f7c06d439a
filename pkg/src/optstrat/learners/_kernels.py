"""Split-search and routing kernels for the classification trees.

Losses inside the kernels are in "sample units": misclassified points plus
``alpha * N`` times the split complexity, so the normalized tree loss is the
kernel value divided by ``N``.
"""

import numpy as np

from .._accel import njit


def _route(Z, A, B, left, right):
    n = Z.shape[0]
    out = np.empty(n, dtype=np.int64)
    p = Z.shape[1]
    for i in range(n):
        node = 0
        while left[node] >= 0:
            s = 0.0
            for j in range(p):
                s += A[node, j] * Z[i, j]
            node = left[node] if s < B[node] else right[node]
        out[i] = node
    return out


def _best_parallel_new(Z, y, idx, M, mb, features):
    """Best axis split of the points ``idx`` into two fresh leaves.

    Returns (errors, gini, feature, threshold); feature -1 if none is valid.
    Ties go to lower Gini impurity, then to the earlier feature / threshold.
    """
    n = idx.shape[0]
    best_err = np.inf
    best_gini = np.inf
    best_j = -1
    best_t = 0.0
    total = np.zeros(M, dtype=np.int64)
    for k in range(n):
        total[y[idx[k]]] += 1
    cl = np.zeros(M, dtype=np.int64)
    cr = np.zeros(M, dtype=np.int64)
    vals = np.empty(n)
    for f in range(features.shape[0]):
        j = features[f]
        for k in range(n):
            vals[k] = Z[idx[k], j]
        order = np.argsort(vals, kind="mergesort")
        cl[:] = 0
        cr[:] = total
        sql = 0.0
        sqr = 0.0
        for c in range(M):
            sqr += float(cr[c]) * cr[c]
        maxl = 0
        for k in range(n - 1):
            lab = y[idx[order[k]]]
            sql += 2.0 * cl[lab] + 1.0
            cl[lab] += 1
            sqr -= 2.0 * cr[lab] - 1.0
            cr[lab] -= 1
            if cl[lab] > maxl:
                maxl = cl[lab]
            nl = k + 1
            nr = n - nl
            if nl < mb or nr < mb:
                continue
            v0 = vals[order[k]]
            v1 = vals[order[k + 1]]
            if not v0 < v1:
                continue
            maxr = 0
            for c in range(M):
                if cr[c] > maxr:
                    maxr = cr[c]
            err = (nl - maxl) + (nr - maxr)
            gini = (nl - sql / nl) + (nr - sqr / nr)
            if err < best_err or (err == best_err and gini < best_gini - 1e-9):
                best_err = err
                best_gini = gini
                best_j = j
                best_t = 0.5 * (v0 + v1)
    return best_err, best_gini, best_j, best_t


def _best_threshold(proj, costL, costR, mb):
    """Best ``b`` for the rule ``proj < b`` given per-point side costs.

    Returns (cost, threshold); threshold is nan when no split keeps
    ``mb`` points on each side.
    """
    n = proj.shape[0]
    order = np.argsort(proj, kind="mergesort")
    suffix = 0.0
    for k in range(n):
        suffix += costR[k]
    prefix = 0.0
    best = np.inf
    best_t = np.nan
    for k in range(n - 1):
        i = order[k]
        prefix += costL[i]
        suffix -= costR[i]
        nl = k + 1
        if nl < mb or n - nl < mb:
            continue
        v0 = proj[i]
        v1 = proj[order[k + 1]]
        if not v0 < v1:
            continue
        c = prefix + suffix
        if c < best - 1e-12:
            best = c
            best_t = 0.5 * (v0 + v1)
    return best, best_t


def _best_parallel_fixed(Z, idx, costL, costR, mb, features):
    """Best axis split of ``idx`` routing into fixed child subtrees."""
    n = idx.shape[0]
    vals = np.empty(n)
    best = np.inf
    best_j = -1
    best_t = 0.0
    for f in range(features.shape[0]):
        j = features[f]
        for k in range(n):
            vals[k] = Z[idx[k], j]
        c, t = _best_threshold(vals, costL, costR, mb)
        if c < best - 1e-12:
            best = c
            best_j = j
            best_t = t
    return best, best_j, best_t


def _complexity(a):
    s = 0.0
    m = 0.0
    for v in a:
        s += abs(v)
        m = max(m, abs(v))
    return s / m if m > 0.0 else 0.0


def _coordinate_step(Zs, a, b, j, costL, costR, mb, alpha_n):
    """Best value of ``a[j]`` with ``b`` fixed, scanning all breakpoints.

    ``Zs`` holds the node's points (rows). Returns (cost, w) where cost
    includes the complexity penalty; w is nan if no candidate is valid.
    """
    n = Zs.shape[0]
    p = Zs.shape[1]
    base = np.empty(n)
    for i in range(n):
        s = 0.0
        for k in range(p):
            s += a[k] * Zs[i, k]
        base[i] = s - a[j] * Zs[i, j]
    o1 = 0.0
    oinf = 0.0
    for k in range(p):
        if k != j:
            o1 += abs(a[k])
            oinf = max(oinf, abs(a[k]))
    # side at w -> -inf: z > 0 points are left, z < 0 right, z == 0 fixed
    cost0 = 0.0
    nleft0 = 0
    nb = 0
    for i in range(n):
        z = Zs[i, j]
        if z > 0.0 or (z == 0.0 and base[i] < b):
            cost0 += costL[i]
            nleft0 += 1
        else:
            cost0 += costR[i]
        if z != 0.0:
            nb += 1
    t = np.empty(nb)
    dcost = np.empty(nb)
    dleft = np.empty(nb, dtype=np.int64)
    q = 0
    for i in range(n):
        z = Zs[i, j]
        if z == 0.0:
            continue
        t[q] = (b - base[i]) / z
        if z > 0.0:
            dcost[q] = costR[i] - costL[i]
            dleft[q] = -1
        else:
            dcost[q] = costL[i] - costR[i]
            dleft[q] = 1
        q += 1
    order = np.argsort(t, kind="mergesort")
    best = np.inf
    best_w = np.nan
    cost = cost0
    nleft = nleft0
    span = 1.0
    for k in range(nb):
        span = max(span, abs(t[k]))
    # candidate below every breakpoint
    if nb > 0:
        lo_w = t[order[0]] - span
    else:
        lo_w = 0.0
    k = 0
    while True:
        if k == 0:
            lo_edge = -np.inf
        else:
            lo_edge = t[order[k - 1]]
        hi_edge = t[order[k]] if k < nb else np.inf
        if lo_edge < hi_edge and nleft >= mb and n - nleft >= mb:
            cands = np.empty(3)
            nc = 0
            if lo_edge < 0.0 and 0.0 < hi_edge:
                cands[nc] = 0.0
                nc += 1
            if np.isfinite(lo_edge) and np.isfinite(hi_edge):
                cands[nc] = 0.5 * (lo_edge + hi_edge)
                nc += 1
            elif np.isfinite(hi_edge):
                cands[nc] = lo_w
                nc += 1
            elif np.isfinite(lo_edge):
                cands[nc] = lo_edge + span
                nc += 1
            for c in range(nc):
                w = cands[c]
                m = max(oinf, abs(w))
                if m <= 0.0:
                    continue
                val = cost + alpha_n * (o1 + abs(w)) / m
                if val < best - 1e-12:
                    best = val
                    best_w = w
        if k >= nb:
            break
        # cross breakpoints sharing this value together
        v = t[order[k]]
        while k < nb and t[order[k]] == v:
            cost += dcost[order[k]]
            nleft += dleft[order[k]]
            k += 1
    return best, best_w


_route = njit(_route)
_best_parallel_new = njit(_best_parallel_new)
_best_threshold = njit(_best_threshold)
_best_parallel_fixed = njit(_best_parallel_fixed)
_complexity = njit(_complexity)
_coordinate_step = njit(_coordinate_step)

route = _route
best_parallel_new = _best_parallel_new
best_threshold = _best_threshold
best_parallel_fixed = _best_parallel_fixed
complexity = _complexity
coordinate_step = _coordinate_step
