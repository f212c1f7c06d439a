"""Seeded generators for the seven benchmark problem families.

Each generator returns a ``(ParametricProblem, ParameterSpace)`` pair. Fixed
problem data is drawn once from ``np.random.default_rng(spec.seed)``; the
instantiators are small picklable classes so problems can be shipped to
worker processes.
"""

from dataclasses import dataclass, field

import numpy as np

from ..problem import (
    EQ, GE, LE, Ball, Interval, MaxTerm, ModelData, ParameterSpace, ParametricProblem,
)

FAMILIES = ("inventory", "knapsack", "knapsack_ext", "supplier", "transportation",
            "portfolio", "facility", "hybrid")

KNAPSACK_COST = (0.42, 0.72, 0.0, 0.3, 0.15, 0.09, 0.19, 0.35, 0.4, 0.54)
SUPPLIER_COST = (0.42, 0.72, 0.0, 0.3, 0.15)
SUPPLIER_MAX = (1.09, 1.19, 1.35, 1.4, 1.54)
SUPPLIER_TAU0 = (2.0, 3.0, 2.5, 5.0, 1.0)
HYBRID_PDES = (
    0.05, 0.30, 0.55, 0.80, 1.05, 1.30, 1.55, 1.80, 1.95, 1.70,
    1.45, 1.20, 1.02, 1.12, 1.22, 1.32, 1.42, 1.52, 1.62, 1.72,
    1.73, 1.38, 1.03, 0.68, 0.33, -0.02, -0.37, -0.72, -0.94, -0.64,
    -0.34, -0.04, 0.18, 0.08, -0.02, -0.12, -0.22, -0.32, -0.42, -0.52,
)

DEFAULT_SIZES = {
    "inventory": {"T": 30},
    "knapsack": {"n": 10},
    "knapsack_ext": {"n": 10},
    "supplier": {"n": 5},
    "transportation": {"n": 5, "m": 5},
    "portfolio": {"n": 50, "p": 10},
    "facility": {"n": 10, "m": 10},
    "hybrid": {"T": 10},
}


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class BenchmarkSpec:
    family: str
    sizes: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise SpecError(f"unknown family {self.family!r}; choose from {', '.join(FAMILIES)}")
        merged = dict(DEFAULT_SIZES[self.family])
        for k, v in self.sizes.items():
            if k not in merged:
                raise SpecError(f"family {self.family} has no size parameter {k!r}")
            merged[k] = int(v)
        if any(v < 1 for v in merged.values()):
            raise SpecError("sizes must be >= 1")
        object.__setattr__(self, "sizes", merged)

    def to_dict(self):
        return {"family": self.family, "sizes": dict(self.sizes), "seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        return cls(d["family"], dict(d.get("sizes", {})), int(d.get("seed", 0)))

    def label(self):
        dims = "x".join(f"{k}{v}" for k, v in sorted(self.sizes.items()))
        return f"{self.family}-{dims}-s{self.seed}"


def _bounds(n, lo=-np.inf, hi=np.inf):
    return np.full(n, float(lo)), np.full(n, float(hi))


# ---------------------------------------------------------------------------
# instantiators


class _Inventory:
    def __init__(self, T, c=2.0, h=1.0, p=3.0, M=3.0):
        self.T, self.c, self.h, self.p, self.M = T, c, h, p, M

    def __call__(self, theta):
        T = self.T
        d, x_init = theta[:T], theta[T]
        n = 2 * T + 1  # u_0..u_{T-1}, x_0..x_T
        q = np.zeros(n)
        q[:T] = self.c
        A = np.zeros((T + 1, n))
        b = np.zeros(T + 1)
        A[0, T] = 1.0
        b[0] = x_init
        for t in range(T):
            A[t + 1, T + t + 1] = 1.0
            A[t + 1, T + t] = -1.0
            A[t + 1, t] = -1.0
            b[t + 1] = -d[t]
        lower, upper = _bounds(n)
        lower[:T] = 0.0
        upper[:T] = self.M
        terms = []
        for t in range(T):
            C = np.zeros((2, n))
            C[0, T + t] = self.h
            C[1, T + t] = -self.p
            terms.append(MaxTerm(C, np.zeros(2)))
        return ModelData(q=q, A=A, b=b, senses=(EQ,) * (T + 1), lower=lower, upper=upper,
                         max_terms=tuple(terms))


class _Knapsack:
    def __init__(self, c, cap):
        self.c = np.asarray(c, dtype=float)
        self.cap = float(cap)

    def __call__(self, theta):
        n = self.c.shape[0]
        a, u = theta[:n], theta[n:]
        return ModelData(q=self.c, A=a[None, :], b=np.array([self.cap]), senses=(LE,),
                         lower=np.zeros(n), upper=np.array(u, dtype=float))


class _Supplier:
    def __init__(self, c, m, gamma):
        self.c = np.asarray(c, dtype=float)
        self.m = np.asarray(m, dtype=float)
        self.gamma = gamma

    def __call__(self, theta):
        n = self.c.shape[0]
        d, tau = theta[0], theta[1:]
        N = 2 * n  # x_0..x_{n-1}, u_0..u_{n-1}
        q = np.zeros(N)
        q[n:] = self.c
        A = np.zeros((n + 1, N))
        b = np.zeros(n + 1)
        A[0, n:] = 1.0
        b[0] = d
        for i in range(n):
            A[i + 1, n + i] = 1.0
            A[i + 1, i] = -self.m[i]
        lower = np.zeros(N)
        upper = np.full(N, np.inf)
        upper[:n] = 1.0
        C = np.zeros((n, N))
        C[np.arange(n), np.arange(n)] = self.gamma * tau
        return ModelData(q=q, A=A, b=b, senses=(GE,) + (LE,) * n, lower=lower, upper=upper,
                         max_terms=(MaxTerm(C, np.zeros(n)),))


class _Transportation:
    def __init__(self, cost, supply):
        self.cost = np.asarray(cost, dtype=float)
        self.supply = np.asarray(supply, dtype=float)

    def __call__(self, theta):
        n, m = self.cost.shape
        N = n * m
        A = np.zeros((n + m, N))
        for i in range(n):
            A[i, i * m:(i + 1) * m] = 1.0
        for j in range(m):
            A[n + j, j::m] = 1.0
        b = np.concatenate([self.supply, theta])
        return ModelData(q=self.cost.ravel(), A=A, b=b, senses=(LE,) * n + (GE,) * m,
                         lower=np.zeros(N), upper=np.full(N, np.inf))


class _Portfolio:
    def __init__(self, sigma, gamma):
        self.P = 2.0 * gamma * np.asarray(sigma, dtype=float)

    def __call__(self, theta):
        n = self.P.shape[0]
        return ModelData(q=-np.asarray(theta, dtype=float), A=np.ones((1, n)),
                         b=np.array([1.0]), senses=(EQ,), lower=np.zeros(n),
                         upper=np.full(n, np.inf), P=self.P)


class _Facility:
    def __init__(self, cost, fixed, cap):
        self.cost = np.asarray(cost, dtype=float)
        self.fixed = np.asarray(fixed, dtype=float)
        self.cap = np.asarray(cap, dtype=float)

    def __call__(self, theta):
        n, m = self.cost.shape
        N = n * m + n  # x_ij row-major, then y_i
        q = np.concatenate([self.cost.ravel(), self.fixed])
        A = np.zeros((m + n, N))
        for j in range(m):
            A[j, j:n * m:m] = 1.0
        for i in range(n):
            A[m + i, i * m:(i + 1) * m] = 1.0
            A[m + i, n * m + i] = -self.cap[i]
        b = np.concatenate([theta, np.zeros(n)])
        upper = np.full(N, np.inf)
        upper[n * m:] = 1.0
        return ModelData(q=q, A=A, b=b, senses=(GE,) * m + (LE,) * n, lower=np.zeros(N),
                         upper=upper)


class _Hybrid:
    def __init__(self, T, tau=4.0, alpha=1.0, beta=1.0, gamma=1.0, delta=0.1,
                 e_max=50.0, p_max=1.0, eta=0.1):
        self.T = T
        self.tau, self.alpha, self.beta, self.gamma, self.delta = tau, alpha, beta, gamma, delta
        self.e_max, self.p_max, self.eta = e_max, p_max, eta

    def __call__(self, theta):
        T = self.T
        e0, p_des = theta[0], theta[1:]
        iE, iB, iP, iZ = 0, T + 1, 2 * T + 1, 3 * T + 1
        N = 4 * T + 1
        P = np.zeros((N, N))
        q = np.zeros(N)
        P[iE + T, iE + T] = 2.0 * self.eta
        q[iE + T] = -2.0 * self.eta * self.e_max
        r = self.eta * self.e_max ** 2
        for t in range(T):
            P[iP + t, iP + t] = 2.0 * self.alpha
            q[iP + t] = self.beta
            q[iZ + t] = self.gamma
        rows, rhs, senses = [], [], []

        def row():
            rows.append(np.zeros(N))
            return rows[-1]

        a = row()
        a[iE] = 1.0
        rhs.append(e0)
        senses.append(EQ)
        for t in range(T):
            a = row()
            a[iE + t + 1] = 1.0
            a[iE + t] = -1.0
            a[iB + t] = self.tau
            rhs.append(0.0)
            senses.append(EQ)
        for t in range(T):
            a = row()
            a[iP + t] = 1.0
            a[iZ + t] = -self.p_max
            rhs.append(0.0)
            senses.append(LE)
        for t in range(T):
            a = row()
            a[iB + t] = 1.0
            a[iP + t] = 1.0
            rhs.append(p_des[t])
            senses.append(GE)
        lower, upper = _bounds(N)
        lower[iE:iE + T + 1] = 0.0
        upper[iE:iE + T + 1] = self.e_max
        lower[iP:iP + T] = 0.0
        upper[iP:iP + T] = self.p_max
        lower[iZ:iZ + T] = 0.0
        upper[iZ:iZ + T] = 1.0
        terms = []
        for t in range(T):
            # delta * (z_t - z_{t-1})_+ with the engine off before the horizon
            C = np.zeros((2, N))
            C[0, iZ + t] = self.delta
            if t > 0:
                C[0, iZ + t - 1] = -self.delta
            terms.append(MaxTerm(C, np.zeros(2)))
        return ModelData(q=q, A=np.vstack(rows), b=np.array(rhs), senses=tuple(senses),
                         lower=lower, upper=upper, P=P, r=r, max_terms=tuple(terms))


# ---------------------------------------------------------------------------
# generators


def _inventory(spec, rng):
    T = spec.sizes["T"]
    prob = ParametricProblem(
        "inventory", 2 * T + 1, T + 1, _Inventory(T),
        var_names=tuple(f"u{t}" for t in range(T)) + tuple(f"x{t}" for t in range(T + 1)),
        param_names=tuple(f"d{t}" for t in range(T)) + ("x_init",),
    )
    space = ParameterSpace(T + 1, (
        Interval(tuple(range(T)), (1.0,) * T, (3.0,) * T),
        Interval((T,), (7.0,), (13.0,)),
    ), spec.seed)
    return prob, space


def _knapsack_problem(name, c, cap, seed):
    n = len(c)
    prob = ParametricProblem(
        name, n, 2 * n, _Knapsack(c, cap), integer=tuple(range(n)), sense="max",
        var_names=tuple(f"x{i + 1}" for i in range(n)),
        param_names=tuple(f"a{i + 1}" for i in range(n)) + tuple(f"u{i + 1}" for i in range(n)),
    )
    space = ParameterSpace(2 * n, (
        Ball(tuple(range(n)), (2.0,) * n, 1.0),
        Ball(tuple(range(n, 2 * n)), (2.0,) * n, 1.0),
    ), seed)
    return prob, space


def _knapsack(spec, rng):
    if spec.sizes["n"] != 10:
        raise SpecError("the knapsack family has n = 10 items; use knapsack_ext for other sizes")
    return _knapsack_problem("knapsack", KNAPSACK_COST, 5.0, spec.seed)


def _knapsack_ext(spec, rng):
    # extension: item values U(0, 1), capacity n / 2
    n = spec.sizes["n"]
    c = tuple(float(v) for v in rng.uniform(0.0, 1.0, n))
    return _knapsack_problem("knapsack_ext", c, n / 2.0, spec.seed)


def _supplier(spec, rng):
    if spec.sizes["n"] != 5:
        raise SpecError("the supplier family has n = 5 suppliers")
    n = 5
    prob = ParametricProblem(
        "supplier", 2 * n, n + 1, _Supplier(SUPPLIER_COST, SUPPLIER_MAX, 0.1),
        integer=tuple(range(n)),
        var_names=tuple(f"x{i + 1}" for i in range(n)) + tuple(f"u{i + 1}" for i in range(n)),
        param_names=("d",) + tuple(f"tau{i + 1}" for i in range(n)),
    )
    space = ParameterSpace(n + 1, (
        Interval((0,), (1.0,), (3.0,)),
        Ball(tuple(range(1, n + 1)), SUPPLIER_TAU0, 0.5),
    ), spec.seed)
    return prob, space


def _transportation(spec, rng):
    n, m = spec.sizes["n"], spec.sizes["m"]
    radius = 0.75
    for _ in range(1000):
        cost = rng.uniform(0.0, 5.0, (n, m))
        supply = rng.uniform(3.0, 13.0, n)
        d_bar = rng.normal(3.0, 1.0, m)
        # worst-case total demand over the ball
        if supply.sum() >= np.maximum(d_bar, 0.0).sum() + radius * np.sqrt(m):
            break
    else:
        raise SpecError("could not draw a transportation instance feasible over the ball")
    prob = ParametricProblem(
        "transportation", n * m, m, _Transportation(cost, supply),
        var_names=tuple(f"x{i + 1}_{j + 1}" for i in range(n) for j in range(m)),
        param_names=tuple(f"d{j + 1}" for j in range(m)),
    )
    space = ParameterSpace(m, (Ball(tuple(range(m)), tuple(map(float, d_bar)), radius),), spec.seed)
    return prob, space


def _portfolio(spec, rng):
    n, p = spec.sizes["n"], spec.sizes["p"]
    F = rng.normal(0.0, 1.0, (n, p)) * (rng.random((n, p)) < 0.5)
    D = rng.uniform(0.0, np.sqrt(p), n)
    sigma = F @ F.T + np.diag(D)
    sigma = 0.5 * (sigma + sigma.T)
    mu_bar = rng.normal(0.0, 1.0, n)
    prob = ParametricProblem(
        "portfolio", n, n, _Portfolio(sigma, 1.0),
        var_names=tuple(f"x{i + 1}" for i in range(n)),
        param_names=tuple(f"mu{i + 1}" for i in range(n)),
    )
    space = ParameterSpace(n, (Ball(tuple(range(n)), tuple(map(float, mu_bar)), 0.15),), spec.seed)
    return prob, space


def _facility(spec, rng):
    n, m = spec.sizes["n"], spec.sizes["m"]
    radius = 0.25
    for _ in range(1000):
        cost = rng.uniform(0.0, 1.0, (n, m))
        fixed = rng.uniform(0.0, 10.0, n)
        cap = rng.uniform(8.0, 18.0, n)
        d_bar = rng.normal(3.0, 1.0, m)
        if cap.sum() >= np.maximum(d_bar, 0.0).sum() + radius * np.sqrt(m):
            break
    else:
        raise SpecError("could not draw a facility instance feasible over the ball")
    prob = ParametricProblem(
        "facility", n * m + n, m, _Facility(cost, fixed, cap), integer=tuple(range(n * m, n * m + n)),
        var_names=tuple(f"x{i + 1}_{j + 1}" for i in range(n) for j in range(m))
        + tuple(f"y{i + 1}" for i in range(n)),
        param_names=tuple(f"d{j + 1}" for j in range(m)),
    )
    space = ParameterSpace(m, (Ball(tuple(range(m)), tuple(map(float, d_bar)), radius),), spec.seed)
    return prob, space


def _hybrid(spec, rng):
    T = spec.sizes["T"]
    if T > len(HYBRID_PDES):
        raise SpecError(f"hybrid horizon T must be <= {len(HYBRID_PDES)}")
    prob = ParametricProblem(
        "hybrid", 4 * T + 1, T + 1, _Hybrid(T), integer=tuple(range(3 * T + 1, 4 * T + 1)),
        var_names=tuple(f"E{t}" for t in range(T + 1)) + tuple(f"Pbatt{t}" for t in range(T))
        + tuple(f"Peng{t}" for t in range(T)) + tuple(f"z{t}" for t in range(T)),
        param_names=("E0",) + tuple(f"Pdes{t}" for t in range(T)),
    )
    space = ParameterSpace(T + 1, (
        Ball((0,), (40.0,), 0.5),
        Ball(tuple(range(1, T + 1)), HYBRID_PDES[:T], 0.5),
    ), spec.seed)
    return prob, space


_GENERATORS = {
    "inventory": _inventory,
    "knapsack": _knapsack,
    "knapsack_ext": _knapsack_ext,
    "supplier": _supplier,
    "transportation": _transportation,
    "portfolio": _portfolio,
    "facility": _facility,
    "hybrid": _hybrid,
}


def generate(spec):
    """Problem and parameter space for a benchmark spec (deterministic in the spec)."""
    if not isinstance(spec, BenchmarkSpec):
        spec = BenchmarkSpec.from_dict(spec)
    rng = np.random.default_rng(spec.seed)
    prob, space = _GENERATORS[spec.family](spec, rng)
    object.__setattr__(prob, "source", {"builtin": spec.to_dict()})
    return prob, space
