"""Reference solvers: simplex, active-set QP, branch-and-bound, reduced solves."""

from .core import (
    EPS_TIGHT,
    FAILURE,
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    SolverError,
    SolveResult,
    extract_tight,
    max_violation,
    row_violation,
    solve,
    solve_continuous,
    solve_fixed,
    solve_mio,
    solve_reduced,
)

__all__ = [
    "EPS_TIGHT", "FAILURE", "INFEASIBLE", "OPTIMAL", "UNBOUNDED", "SolverError",
    "SolveResult", "extract_tight", "max_violation", "row_violation", "solve",
    "solve_continuous", "solve_fixed", "solve_mio", "solve_reduced",
]
