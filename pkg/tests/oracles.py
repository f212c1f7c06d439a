"""Reference computations that share no code with the package under test."""

import itertools
from fractions import Fraction

import mpmath
import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp


def highs(inst):
    """Solve a canonical LP/MILP with HiGHS; returns (status, x, objective)."""
    assert not inst.is_quadratic
    lo = np.full(inst.A.shape[0], -np.inf)
    lo[inst.is_eq] = inst.b[inst.is_eq]
    integrality = np.zeros(inst.n_var)
    integrality[inst.integer] = 1
    res = milp(inst.q, constraints=[LinearConstraint(inst.A, lo, inst.b)],
               integrality=integrality, bounds=Bounds(-np.inf, np.inf),
               options={"mip_rel_gap": 1e-12})
    if res.status != 0:
        return res.status, None, None
    return 0, res.x, float(res.fun + inst.r)


def kkt_residual(inst, x, tol=1e-7):
    """Largest KKT residual of ``x`` for a continuous canonical LP/QP.

    Multipliers come from nonnegative least squares on the rows that are
    active at ``x`` (equality multipliers split into two signed parts).
    """
    from scipy.optimize import nnls

    grad = inst.P @ x + inst.q
    r = inst.A @ x - inst.b
    active = np.flatnonzero(inst.is_eq | (r > -tol * (1 + np.abs(inst.b))))
    G = inst.A[active]
    eq = inst.is_eq[active]
    cols = np.hstack([G.T, -G[eq].T])
    if cols.size == 0:
        stat = np.linalg.norm(grad, np.inf)
    else:
        _, stat = nnls(cols, -grad, maxiter=50 * cols.shape[1])
    primal = max(0.0, float(np.max(np.where(inst.is_eq, np.abs(r), r), initial=0.0)))
    return max(float(stat), primal)


def knapsack_enum(c, a, cap, u):
    """Exhaustive maximum of ``c @ x`` over integer ``0 <= x <= u``, ``a @ x <= cap``."""
    ub = np.floor(np.asarray(u) + 1e-9).astype(int)
    grids = np.stack(np.meshgrid(*[np.arange(k + 1) for k in ub], indexing="ij"), -1)
    X = grids.reshape(-1, len(ub)).astype(float)
    feas = X @ np.asarray(a) <= cap + 1e-9
    if not feas.any():
        return None, -np.inf
    vals = np.where(feas, X @ np.asarray(c), -np.inf)
    k = int(np.argmax(vals))
    return X[k], float(vals[k])


def binary_enum(inst, solve_fixed):
    """Best objective over all 0/1 assignments of the integer variables.

    ``solve_fixed(inst, values)`` solves the continuous problem left after
    fixing; its QP solutions are checked separately by :func:`kkt_residual`.
    """
    best = np.inf
    for bits in itertools.product((0, 1), repeat=inst.integer.size):
        res = solve_fixed(inst, np.array(bits, dtype=float))
        if res.ok:
            best = min(best, inst.objective(res.x_star))
    return best


def good_turing_exact(counts):
    """N1 / N as an exact fraction."""
    counts = [int(c) for c in counts]
    N = sum(counts)
    return Fraction(sum(1 for c in counts if c == 1), N)


def missing_mass_bound_mp(G, N, beta, dps=50):
    with mpmath.workdps(dps):
        c = 2 * mpmath.sqrt(2) + mpmath.sqrt(3)
        G = mpmath.mpf(G.numerator) / G.denominator if isinstance(G, Fraction) else mpmath.mpf(G)
        return G + c * mpmath.sqrt(mpmath.log(3 / mpmath.mpf(beta)) / N)


def c_gt_mp(dps=50):
    with mpmath.workdps(dps):
        return 2 * mpmath.sqrt(2) + mpmath.sqrt(3)
