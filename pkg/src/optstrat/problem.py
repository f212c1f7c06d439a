"""Parametric problem models, canonical LP/QP form and parameter sampling.

A :class:`ParametricProblem` wraps a deterministic instantiator mapping a
parameter vector ``theta`` to concrete model data (quadratic cost, affine
rows, variable bounds and max-of-affine cost terms). :func:`canonicalize`
turns that data into a :class:`CanonicalInstance`::

    minimize    1/2 x'Px + q'x + r
    subject to  A x <= b   (rows with is_eq False)
                A x  = b   (rows with is_eq True)

with one auxiliary variable per max-term (epigraph form) and every finite
variable bound written out as its own row, so a single index set over the
rows of ``A`` describes which constraints are tight.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

LE = "<="
GE = ">="
EQ = "=="
_SENSES = (LE, GE, EQ)

# row kinds of the canonical layout
ROW_CONSTRAINT = 0
ROW_EPIGRAPH = 1
ROW_LOWER = 2
ROW_UPPER = 3

PSD_TOL = 1e-9


class ProblemError(ValueError):
    """Invalid model data or an instantiation outside the supported class."""


@dataclass(frozen=True, eq=False)
class MaxTerm:
    """Cost term ``max_k (C[k] @ x + d[k])``."""

    C: np.ndarray
    d: np.ndarray


@dataclass(frozen=True, eq=False)
class ModelData:
    """Concrete (numeric) data of one problem instance, in user variables."""

    q: np.ndarray
    A: np.ndarray
    b: np.ndarray
    senses: tuple
    lower: np.ndarray
    upper: np.ndarray
    P: np.ndarray | None = None
    r: float = 0.0
    max_terms: tuple = ()


@dataclass(frozen=True, eq=False)
class ParametricProblem:
    """Symbolic model plus instantiator ``theta -> ModelData``.

    ``integer`` lists the indices of integer variables, ``sense`` is ``"min"``
    or ``"max"``. ``source`` records how to rebuild the problem (builtin
    family spec or problem file) and is carried into dataset and model files.
    """

    name: str
    n: int
    p: int
    instantiate: Callable[[np.ndarray], ModelData]
    integer: tuple = ()
    sense: str = "min"
    var_names: tuple = ()
    param_names: tuple = ()
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise ProblemError("a problem needs at least one variable")
        if self.p < 1:
            raise ProblemError("a problem needs at least one parameter")
        if self.sense not in ("min", "max"):
            raise ProblemError(f"unknown sense {self.sense!r}")
        for i in self.integer:
            if not 0 <= i < self.n:
                raise ProblemError(f"integer index {i} out of range")
        if self.var_names and len(self.var_names) != self.n:
            raise ProblemError("var_names must have one entry per variable")
        if self.param_names and len(self.param_names) != self.p:
            raise ProblemError("param_names must have one entry per parameter")

    @property
    def parameter_names(self):
        if self.param_names:
            return list(self.param_names)
        return [f"theta{i}" for i in range(self.p)]


@dataclass(frozen=True, eq=False)
class CanonicalInstance:
    """Canonical LP/QP data for one parameter value (read-only arrays)."""

    P: np.ndarray
    q: np.ndarray
    r: float
    A: np.ndarray
    b: np.ndarray
    is_eq: np.ndarray
    integer: np.ndarray
    row_kind: np.ndarray
    row_ref: np.ndarray
    n_user: int
    obj_sign: float
    theta: np.ndarray
    epigraph: tuple = ()

    @property
    def n_var(self):
        return self.A.shape[1]

    @property
    def n_con(self):
        return self.A.shape[0]

    @property
    def is_quadratic(self):
        return bool(np.any(self.P != 0.0))

    def objective(self, x):
        """Canonical (minimization) objective."""
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.P @ x + self.q @ x + self.r)

    def user_objective(self, x):
        """Objective in the sense the user declared (max problems flip sign)."""
        return self.obj_sign * self.objective(x)

    @cached_property
    def _epigraph_index(self):
        rows = np.concatenate([r for _, r in self.epigraph])
        cols = np.concatenate([np.full(r.size, c) for c, r in self.epigraph])
        starts = np.cumsum([0] + [r.size for _, r in self.epigraph[:-1]])
        return rows, cols, starts, np.array([c for c, _ in self.epigraph])

    def repair_aux(self, x):
        """Set every epigraph variable to its tight minimum over its branches."""
        x = np.array(x, dtype=float)
        if not self.epigraph:
            return x
        rows, cols, starts, aux = self._epigraph_index
        # row: C x - t <= -d  =>  t >= C x + d
        branch = self.A[rows] @ x - self.A[rows, cols] * x[cols] - self.b[rows]
        x[aux] = np.maximum.reduceat(branch, starts)
        return x

    def user_solution(self, x):
        return np.asarray(x)[: self.n_user].copy()


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


_psd_cache: dict = {}


def _check_psd(P):
    if not np.allclose(P, P.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(P).max())):
        raise ProblemError("quadratic cost matrix is not symmetric")
    key = hash(P.tobytes())
    ok = _psd_cache.get(key)
    if ok is None:
        lam_min = np.linalg.eigvalsh(P).min() if P.size else 0.0
        ok = lam_min >= -PSD_TOL * max(1.0, np.abs(P).max())
        if len(_psd_cache) > 4096:
            _psd_cache.clear()
        _psd_cache[key] = ok
    if not ok:
        raise ProblemError("quadratic cost matrix is not positive semidefinite")


def canonicalize(problem, theta):
    """Build the canonical instance of ``problem`` at parameter ``theta``.

    Row order: user constraints (``>=`` rows negated), epigraph rows (one per
    branch of each max-term), then finite variable bounds (lower before upper,
    variable by variable). Auxiliary epigraph variables follow the user
    variables.
    """
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.shape[0] != problem.p:
        raise ProblemError(f"expected {problem.p} parameters, got {theta.shape[0]}")
    data = problem.instantiate(theta)
    n = problem.n
    q = np.asarray(data.q, dtype=float).ravel()
    A_user = np.asarray(data.A, dtype=float).reshape(-1, n) if np.size(data.A) else np.zeros((0, n))
    b_user = np.asarray(data.b, dtype=float).ravel()
    lower = np.asarray(data.lower, dtype=float).ravel()
    upper = np.asarray(data.upper, dtype=float).ravel()
    if q.shape[0] != n or lower.shape[0] != n or upper.shape[0] != n:
        raise ProblemError("cost / bound vectors must have one entry per variable")
    if A_user.shape[1] != n or A_user.shape[0] != b_user.shape[0] or len(data.senses) != b_user.shape[0]:
        raise ProblemError("constraint rows must reference exactly the declared variables")
    if np.any(lower > upper):
        raise ProblemError("variable lower bound above upper bound")
    if data.P is None:
        P_user = np.zeros((n, n))
    else:
        P_user = np.asarray(data.P, dtype=float)
        if P_user.shape != (n, n):
            raise ProblemError("quadratic cost matrix has the wrong shape")

    sign = 1.0
    if problem.sense == "max":
        if data.max_terms:
            raise ProblemError("max-terms are only convex in minimization problems")
        sign = -1.0
    P_min = sign * P_user
    if np.any(P_min != 0.0):
        _check_psd(P_min)

    terms = data.max_terms
    n_aux = len(terms)
    N = n + n_aux

    rows = []
    rhs = []
    eq = []
    kind = []
    ref = []
    for i, s in enumerate(data.senses):
        if s not in _SENSES:
            raise ProblemError(f"unknown constraint sense {s!r}")
        row = np.zeros(N)
        if s == GE:
            row[:n] = -A_user[i]
            rhs.append(-b_user[i])
        else:
            row[:n] = A_user[i]
            rhs.append(b_user[i])
        rows.append(row)
        eq.append(s == EQ)
        kind.append(ROW_CONSTRAINT)
        ref.append(i)

    epigraph = []
    for k, term in enumerate(terms):
        C = np.asarray(term.C, dtype=float).reshape(-1, n)
        d = np.asarray(term.d, dtype=float).ravel()
        if C.shape[0] != d.shape[0] or C.shape[0] == 0:
            raise ProblemError("max-term needs at least one branch with matching offsets")
        col = n + k
        idx = []
        for j in range(C.shape[0]):
            row = np.zeros(N)
            row[:n] = C[j]
            row[col] = -1.0
            idx.append(len(rows))
            rows.append(row)
            rhs.append(-d[j])
            eq.append(False)
            kind.append(ROW_EPIGRAPH)
            ref.append(k)
        epigraph.append((col, np.array(idx, dtype=np.int64)))

    for j in range(n):
        if np.isfinite(lower[j]):
            row = np.zeros(N)
            row[j] = -1.0
            rows.append(row)
            rhs.append(-lower[j])
            eq.append(False)
            kind.append(ROW_LOWER)
            ref.append(j)
        if np.isfinite(upper[j]):
            row = np.zeros(N)
            row[j] = 1.0
            rows.append(row)
            rhs.append(upper[j])
            eq.append(False)
            kind.append(ROW_UPPER)
            ref.append(j)

    A = np.vstack(rows) if rows else np.zeros((0, N))
    P = np.zeros((N, N))
    P[:n, :n] = P_min
    qc = np.zeros(N)
    qc[:n] = sign * q
    qc[n:] = 1.0
    return CanonicalInstance(
        P=_readonly(P),
        q=_readonly(qc),
        r=float(sign * data.r),
        A=_readonly(A),
        b=_readonly(np.array(rhs, dtype=float)),
        is_eq=_readonly(np.array(eq, dtype=bool)),
        integer=_readonly(np.array(sorted(problem.integer), dtype=np.int64)),
        row_kind=_readonly(np.array(kind, dtype=np.int8)),
        row_ref=_readonly(np.array(ref, dtype=np.int64)),
        n_user=n,
        obj_sign=sign,
        theta=_readonly(theta.copy()),
        epigraph=tuple((col, _readonly(idx)) for col, idx in epigraph),
    )


# ---------------------------------------------------------------------------
# parameter spaces


@dataclass(frozen=True)
class Interval:
    """Independent uniform coordinates ``theta[i] ~ U(lo_i, hi_i)``."""

    indices: tuple
    lo: tuple
    hi: tuple

    def __post_init__(self):
        if not (len(self.indices) == len(self.lo) == len(self.hi)) or not self.indices:
            raise ValueError("interval block needs matching, nonempty indices/lo/hi")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise ValueError("empty interval support (lo > hi)")

    def draw(self, rng):
        return rng.uniform(np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float))

    def contains(self, values, tol=1e-12):
        v = np.asarray(values)
        return bool(np.all(v >= np.asarray(self.lo) - tol) and np.all(v <= np.asarray(self.hi) + tol))

    def to_dict(self):
        return {"type": "interval", "indices": list(self.indices), "lo": list(self.lo), "hi": list(self.hi)}


@dataclass(frozen=True)
class Ball:
    """Joint uniform distribution on the Euclidean ball ``B(center, radius)``."""

    indices: tuple
    center: tuple
    radius: float

    def __post_init__(self):
        if len(self.indices) != len(self.center) or not self.indices:
            raise ValueError("ball block needs matching, nonempty indices/center")
        if not self.radius >= 0.0:
            raise ValueError("empty ball support (radius < 0)")

    def draw(self, rng):
        k = len(self.indices)
        z = rng.standard_normal(k)
        u = rng.random()
        norm = np.linalg.norm(z)
        if norm == 0.0:
            z = np.zeros(k)
        else:
            z = z / norm
        return np.asarray(self.center, dtype=float) + self.radius * u ** (1.0 / k) * z

    def contains(self, values, tol=1e-12):
        return float(np.linalg.norm(np.asarray(values) - np.asarray(self.center))) <= self.radius + tol

    def to_dict(self):
        return {"type": "ball", "indices": list(self.indices), "center": list(self.center),
                "radius": self.radius}


@dataclass(frozen=True)
class ParameterSpace:
    """Product of interval and ball blocks covering every coordinate once."""

    dimension: int
    blocks: tuple
    seed: int = 0

    def __post_init__(self):
        covered = sorted(i for blk in self.blocks for i in blk.indices)
        if covered != list(range(self.dimension)):
            raise ValueError("parameter blocks must cover each coordinate exactly once")

    def contains(self, theta, tol=1e-12):
        theta = np.asarray(theta)
        return all(blk.contains(theta[list(blk.indices)], tol) for blk in self.blocks)

    def to_dict(self):
        return {"dimension": self.dimension, "seed": self.seed,
                "blocks": [blk.to_dict() for blk in self.blocks]}

    @classmethod
    def from_dict(cls, spec):
        blocks = []
        for blk in spec["blocks"]:
            idx = tuple(int(i) for i in blk["indices"])
            if blk["type"] == "interval":
                blocks.append(Interval(idx, tuple(map(float, blk["lo"])), tuple(map(float, blk["hi"]))))
            elif blk["type"] == "ball":
                blocks.append(Ball(idx, tuple(map(float, blk["center"])), float(blk["radius"])))
            else:
                raise ValueError(f"unknown parameter block type {blk['type']!r}")
        return cls(int(spec["dimension"]), tuple(blocks), int(spec.get("seed", 0)))


class ParameterStream:
    """Sequential i.i.d. draws from a :class:`ParameterSpace`.

    Each sample consumes the generator in a fixed per-sample order, so taking
    ``k`` then ``k'`` samples yields the same sequence as taking ``k + k'``.
    """

    def __init__(self, space, seed):
        self.space = space
        self.rng = np.random.default_rng(seed)
        self.drawn = 0

    def take(self, count):
        out = np.empty((count, self.space.dimension))
        for s in range(count):
            for blk in self.space.blocks:
                out[s, list(blk.indices)] = blk.draw(self.rng)
        self.drawn += count
        return out


def sample_parameters(space: ParameterSpace, seed: int, count: int) -> np.ndarray:
    """Draw ``count`` i.i.d. parameter vectors (rows) from ``space``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    for blk in space.blocks:
        blk.__post_init__()
    return ParameterStream(space, seed).take(count)


def interval_space(lo: Sequence[float], hi: Sequence[float], seed=0):
    lo = tuple(float(v) for v in lo)
    hi = tuple(float(v) for v in hi)
    return ParameterSpace(len(lo), (Interval(tuple(range(len(lo))), lo, hi),), seed)
