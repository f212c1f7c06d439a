"""Full and reduced solves on canonical instances.

Continuous problems go to the dense simplex (linear cost) or to simplex
phase 1 followed by the active-set QP method (quadratic cost). Integer
variables are handled by best-bound branch-and-bound over variable bounds.
The reduced solve fixes the integers, turns the tight rows into equalities
and solves the resulting KKT system directly.
"""

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import qr

from ._active_set import active_set_kernel
from ._simplex import simplex_kernel

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
FAILURE = "failure"

_KERNEL_STATUS = {0: OPTIMAL, 1: INFEASIBLE, 2: UNBOUNDED, 3: FAILURE}

EPS_TIGHT = 1e-5
FEAS_TOL = 1e-6
INT_TOL = 1e-6
KKT_REG = 1e-10
NODE_LIMIT = 1_000_000


@dataclass(frozen=True, eq=False)
class SolveResult:
    """Outcome of a full or reduced solve.

    ``objective`` is in the user's sense (a maximization problem reports the
    maximized value); ``max_violation`` is the largest row violation of
    ``x_star`` over all canonical rows, each normalized by ``1 + |b_i|``.
    """

    status: str
    x_star: np.ndarray | None = None
    objective: float = math.nan
    tight_rows: tuple = ()
    integer_values: tuple = ()
    solve_time: float = 0.0
    max_violation: float = math.nan
    nodes: int = 0
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.status == OPTIMAL


class SolverError(RuntimeError):
    pass


def row_violation(inst, x):
    """Per-row normalized violation (equality rows count both sides)."""
    r = inst.A @ x - inst.b
    v = np.where(inst.is_eq, np.abs(r), np.maximum(r, 0.0))
    return v / (1.0 + np.abs(inst.b))


def max_violation(inst, x):
    if inst.n_con == 0:
        return 0.0
    return float(row_violation(inst, x).max())


def extract_tight(inst, x, eps=EPS_TIGHT):
    """Sorted tuple of rows with ``|a_i x - b_i| <= eps (1 + |b_i|)``.

    Equality rows are always included.
    """
    x = np.asarray(x, dtype=float)
    r = np.abs(inst.A @ x - inst.b)
    mask = inst.is_eq | (r <= eps * (1.0 + np.abs(inst.b)))
    return tuple(np.flatnonzero(mask).tolist())


# ---------------------------------------------------------------------------
# solver form: singleton rows become bounds, general rows are row-scaled


@dataclass
class _Form:
    A: np.ndarray
    b: np.ndarray
    is_eq: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    infeasible: bool = False


def _build_form(inst, rows=None, as_equality=False, drop_integer_rows=False):
    A_full = inst.A
    n = inst.n_var
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    sel = np.arange(inst.n_con) if rows is None else np.asarray(rows, dtype=np.int64)
    infeasible = False
    if sel.size:
        A = A_full[sel]
        b = inst.b[sel]
        eq = np.ones(sel.size, dtype=bool) if as_equality else inst.is_eq[sel].copy()
        nz = A != 0.0
        cnt = nz.sum(axis=1)
    else:
        A = np.zeros((0, n))
        b = np.zeros(0)
        eq = np.zeros(0, dtype=bool)
        cnt = np.zeros(0, dtype=np.int64)
    if drop_integer_rows and inst.integer.size and sel.size:
        cont = np.ones(n, dtype=bool)
        cont[inst.integer] = False
        only_int = ~(A[:, cont] != 0.0).any(axis=1)
        cnt = np.where(only_int, -1, cnt)
    for k in np.flatnonzero(cnt == 0):
        tol = FEAS_TOL * (1.0 + abs(b[k]))
        if (eq[k] and abs(b[k]) > tol) or b[k] < -tol:
            infeasible = True
    for k in np.flatnonzero(cnt == 1):
        j = int(np.flatnonzero(A[k])[0])
        v = b[k] / A[k, j]
        if eq[k]:
            lo[j] = max(lo[j], v)
            hi[j] = min(hi[j], v)
        elif A[k, j] > 0.0:
            hi[j] = min(hi[j], v)
        else:
            lo[j] = max(lo[j], v)
    gen = np.flatnonzero(cnt > 1)
    Ag = A[gen]
    bg = b[gen]
    if gen.size:
        s = np.abs(Ag).max(axis=1)
        Ag = Ag / s[:, None]
        bg = bg / s
    return _Form(np.ascontiguousarray(Ag), np.ascontiguousarray(bg),
                 np.ascontiguousarray(eq[gen]), lo, hi, infeasible)


def _round_integer_bounds(lo, hi, integer):
    if integer.size:
        lo[integer] = np.ceil(lo[integer] - INT_TOL)
        hi[integer] = np.floor(hi[integer] + INT_TOL)


def _settle_bounds(lo, hi):
    """Merge crossing-by-rounding bounds; report a real crossing."""
    gap = lo - hi
    bad = gap > FEAS_TOL * (1.0 + np.abs(hi))
    if bad.any():
        return False
    close = gap > 0.0
    lo[close] = hi[close]
    return True


def _solve_form(P, q, form, lo, hi, quadratic):
    """Run the kernels on solver-form data. Returns (status, x)."""
    n = q.shape[0]
    m = form.A.shape[0]
    if form.infeasible or not _settle_bounds(lo, hi):
        return INFEASIBLE, None
    max_iter = 50 * (n + m) + 1000
    c = np.zeros(n) if quadratic else q
    for bland in (False, True):
        st, x, state, basis, _ = simplex_kernel(form.A, form.b, form.is_eq, c, lo, hi,
                                                quadratic, bland, max_iter)
        if st != 3:
            break
    status = _KERNEL_STATUS[int(st)]
    if status != OPTIMAL or not quadratic:
        return status, (x if status == OPTIMAL else None)

    vstate = np.zeros(n, dtype=np.int64)
    for j in range(n):
        s = state[j]
        if s == 1 or s == 2:
            vstate[j] = 3 if lo[j] == hi[j] else s
    rstate = np.zeros(m, dtype=np.int64)
    for i in range(m):
        basic = state[n + i] == -1
        if form.is_eq[i]:
            rstate[i] = 3 if basic else 2
        elif not basic:
            rstate[i] = 1
    for bland in (False, True):
        st, xq, _, _, _, _, _ = active_set_kernel(P, q, form.A, form.b, lo, hi, x,
                                                  vstate, rstate, bland, max_iter)
        if st != 3:
            break
    status = _KERNEL_STATUS[int(st)]
    return status, (xq if status == OPTIMAL else None)


def _finish(inst, status, x, t0, nodes=0, message="", extra=None):
    elapsed = time.perf_counter() - t0
    if status != OPTIMAL:
        return SolveResult(status, solve_time=elapsed, nodes=nodes, message=message,
                           extra=extra or {})
    x = inst.repair_aux(x)
    if inst.integer.size:
        ints = tuple(np.rint(x[inst.integer]).astype(np.int64).tolist())
    else:
        ints = ()
    return SolveResult(
        status=OPTIMAL,
        x_star=x,
        objective=inst.user_objective(x),
        tight_rows=extract_tight(inst, x),
        integer_values=ints,
        solve_time=elapsed,
        max_violation=max_violation(inst, x),
        nodes=nodes,
        message=message,
        extra=extra or {},
    )


def solve_continuous(inst):
    """Solve the continuous problem (integrality of ``inst.integer`` ignored)."""
    t0 = time.perf_counter()
    form = _build_form(inst)
    status, x = _solve_form(inst.P, inst.q, form, form.lo.copy(), form.hi.copy(),
                            inst.is_quadratic)
    msg = "" if status == OPTIMAL else f"continuous solve ended with status {status}"
    return _finish(inst, status, x, t0, message=msg)


def solve_fixed(inst, integer_values):
    """Continuous solve with the integer variables pinned to ``integer_values``."""
    t0 = time.perf_counter()
    form = _build_form(inst)
    lo = form.lo.copy()
    hi = form.hi.copy()
    vals = np.asarray(integer_values, dtype=float)
    lo[inst.integer] = vals
    hi[inst.integer] = vals
    status, x = _solve_form(inst.P, inst.q, form, lo, hi, inst.is_quadratic)
    return _finish(inst, status, x, t0)


def _most_fractional(x, integer):
    v = x[integer]
    frac = np.abs(v - np.round(v))
    k = int(np.argmax(frac))
    if frac[k] <= INT_TOL:
        return -1
    return int(integer[k])


def solve_mio(inst, node_limit=NODE_LIMIT, abs_gap=1e-9, rel_gap=1e-9):
    """Branch-and-bound with best-bound selection and most-fractional branching.

    Nodes only tighten variable bounds. The returned point and tight set come
    from re-solving with the integers fixed at the incumbent values.
    """
    t0 = time.perf_counter()
    if inst.integer.size == 0:
        raise SolverError("solve_mio needs at least one integer variable")
    form = _build_form(inst)
    lo0 = form.lo.copy()
    hi0 = form.hi.copy()
    _round_integer_bounds(lo0, hi0, inst.integer)
    quad = inst.is_quadratic
    P, q = inst.P, inst.q
    integer = inst.integer

    def relax(lo, hi):
        st, x = _solve_form(P, q, form, lo, hi, quad)
        if st != OPTIMAL:
            return st, None, math.inf
        return st, x, 0.5 * x @ P @ x + q @ x

    st, x, f = relax(lo0.copy(), hi0.copy())
    nodes = 1
    if st != OPTIMAL:
        return _finish(inst, st, None, t0, nodes, f"root relaxation {st}")

    best_f = math.inf
    best_x = None
    heap = []
    counter = 0

    def consider(x, f, lo, hi):
        nonlocal best_f, best_x, counter
        j = _most_fractional(x, integer)
        if j < 0:
            if f < best_f:
                best_f = f
                best_x = x
            return
        if f < best_f - max(abs_gap, rel_gap * abs(best_f)) or best_x is None:
            heapq.heappush(heap, (f, counter, j, lo, hi, x[j]))
            counter += 1

    consider(x, f, lo0, hi0)
    failed = ""
    while heap:
        f, _, j, lo, hi, xj = heapq.heappop(heap)
        if best_x is not None and f >= best_f - max(abs_gap, rel_gap * abs(best_f)):
            break
        for child in (0, 1):
            clo = lo.copy()
            chi = hi.copy()
            if child == 0:
                chi[j] = math.floor(xj)
            else:
                clo[j] = math.ceil(xj)
            if clo[j] > chi[j]:
                continue
            nodes += 1
            cst, cx, cf = relax(clo, chi)
            if cst == OPTIMAL:
                consider(cx, cf, clo, chi)
            elif cst == UNBOUNDED:
                failed = "unbounded node relaxation"
            elif cst == FAILURE:
                failed = "numerical failure in a node relaxation"
        if failed:
            break
        if nodes >= node_limit:
            failed = f"node limit {node_limit} exceeded"
            break
    if failed:
        status = UNBOUNDED if failed.startswith("unbounded") else FAILURE
        return _finish(inst, status, None, t0, nodes, failed)
    if best_x is None:
        return _finish(inst, INFEASIBLE, None, t0, nodes, "no integer-feasible point")

    ints = np.round(best_x[integer])
    lo = lo0.copy()
    hi = hi0.copy()
    lo[integer] = ints
    hi[integer] = ints
    st, x = _solve_form(P, q, form, lo, hi, quad)
    if st != OPTIMAL:
        x = best_x.copy()
        x[integer] = ints
    return _finish(inst, OPTIMAL, x, t0, nodes)


def solve(inst):
    """Full solve: branch-and-bound when integers are present."""
    if inst.integer.size:
        return solve_mio(inst)
    return solve_continuous(inst)


# ---------------------------------------------------------------------------
# reduced solve


def _kkt_reduced(inst, rows, ints):
    """Equality-constrained KKT solve over the continuous variables.

    Tight singleton rows pin their variable directly; a pivoted QR then keeps
    a linearly independent subset of the remaining rows so degenerate tight
    sets still give a square, nonsingular KKT matrix. Dropped rows are
    covered by the full-row check done by the caller.
    """
    n = inst.n_var
    x = np.zeros(n)
    cont = np.ones(n, dtype=bool)
    if inst.integer.size:
        cont[inst.integer] = False
        x[inst.integer] = ints
    A = inst.A[rows]
    b = inst.b[rows]
    nz = A[:, cont] != 0.0
    keep = nz.any(axis=1)
    A = A[keep]
    b = b[keep] - A[:, ~cont] @ x[~cont]
    cnt = nz[keep].sum(axis=1)

    free = cont.copy()
    single = np.flatnonzero(cnt == 1)
    if single.size:
        cols = np.argmax(A[single][:, cont] != 0.0, axis=1)
        cidx = np.flatnonzero(cont)[cols]
        x[cidx] = b[single] / A[single, cidx]
        free[cidx] = False
    F = np.flatnonzero(free)
    if F.size == 0:
        return x, True
    fixed = ~free
    G = np.flatnonzero(cnt > 1)
    A_F = A[G][:, F]
    pinned = fixed & cont
    rhs_b = b[G] - A[G][:, pinned] @ x[pinned]
    live = (A_F != 0.0).any(axis=1)
    A_F = A_F[live]
    rhs_b = rhs_b[live]
    if A_F.shape[0]:
        R, piv = qr(A_F.T, mode="r", pivoting=True)
        diag = np.abs(np.diag(R))
        rank = int((diag > 1e-10 * max(1.0, diag[0] if diag.size else 1.0)).sum())
        sel = np.sort(piv[:rank])
        A_F = A_F[sel]
        rhs_b = rhs_b[sel]
    P_FF = inst.P[np.ix_(F, F)]
    g = inst.q[F] + inst.P[np.ix_(F, fixed)] @ x[fixed]
    nf = F.size
    k = A_F.shape[0]
    K = np.zeros((nf + k, nf + k))
    K[:nf, :nf] = P_FF
    K[:nf, nf:] = A_F.T
    K[nf:, :nf] = A_F
    rhs = np.concatenate([-g, rhs_b])
    scale = 1.0 + np.abs(rhs).max(initial=0.0)
    sol = None
    try:
        sol = np.linalg.solve(K, rhs)
        if not np.all(np.isfinite(sol)) or np.abs(K @ sol - rhs).max(initial=0.0) > 1e-9 * scale:
            sol = None
    except np.linalg.LinAlgError:
        sol = None
    exact = sol is not None
    if sol is None:
        Kr = K.copy()
        Kr[np.arange(nf), np.arange(nf)] += KKT_REG
        Kr[np.arange(nf, nf + k), np.arange(nf, nf + k)] -= KKT_REG
        sol = np.linalg.lstsq(Kr, rhs, rcond=None)[0]
        exact = bool(np.all(np.isfinite(sol)) and
                     np.abs(K @ sol - rhs).max(initial=0.0) <= 1e-7 * scale)
    x[F] = sol[:nf]
    return x, exact


def solve_reduced(inst, strat, tol=FEAS_TOL):
    """Recover a solution from a strategy.

    Integers are fixed to ``strat.integer_values``; the strategy's tight rows
    are enforced as equalities and every other inequality row is dropped.
    Rows that only involve fixed integer variables carry no information about
    the continuous part and are left to the final check. The result is
    verified against every canonical row and ``max_violation`` is reported.

    When the KKT system is singular the regularized least-squares solution is
    tried; if that does not verify, the reduced problem is re-solved with the
    active-set method, first with the tight rows as equalities, then as
    inequalities.
    """
    t0 = time.perf_counter()
    rows = np.asarray(strat.tight_rows, dtype=np.int64)
    if rows.size and (rows.min() < 0 or rows.max() >= inst.n_con):
        raise SolverError("strategy row index out of range for this instance")
    ints = np.asarray(strat.integer_values, dtype=float)
    if ints.size != inst.integer.size:
        raise SolverError("strategy integer assignment does not cover the integer variables")

    x, exact = _kkt_reduced(inst, rows, ints)
    method = "kkt"
    if not exact:
        best = (math.inf, x)
        for as_eq in (True, False):
            form = _build_form(inst, rows, as_equality=as_eq, drop_integer_rows=True)
            lo = form.lo.copy()
            hi = form.hi.copy()
            if inst.integer.size:
                lo[inst.integer] = ints
                hi[inst.integer] = ints
            st, xa = _solve_form(inst.P, inst.q, form, lo, hi, inst.is_quadratic)
            if st != OPTIMAL:
                continue
            v = max_violation(inst, xa)
            if v < best[0]:
                best = (v, xa)
                method = "active-set-eq" if as_eq else "active-set-ineq"
            if v <= tol:
                break
        if not math.isfinite(best[0]):
            elapsed = time.perf_counter() - t0
            return SolveResult(FAILURE, x_star=x, solve_time=elapsed,
                               max_violation=max_violation(inst, x),
                               message="incompatible strategy: reduced system has no solution",
                               extra={"method": "none"})
        x = best[1]
    res = _finish(inst, OPTIMAL, x, t0, extra={"method": method})
    return res
