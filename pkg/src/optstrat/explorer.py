"""Strategy exploration with Good-Turing stopping.

Parameters are drawn in batches, every sample is solved and encoded, and the
strategies are inserted into a catalog in sample order. After each batch the
Good-Turing estimate ``G = N1 / N`` of the unseen-strategy mass is updated;
the run stops once ``G`` (estimate mode) or the high-confidence bound
``G + c sqrt(ln(3 / beta) / N)`` (full-bound mode) drops below ``epsilon``.
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .problem import ParameterStream, canonicalize
from .solver import solve
from .strategy import StrategyCatalog, encode

C_GT = 2.0 * math.sqrt(2.0) + math.sqrt(3.0)

MODES = ("estimate", "full-bound")


class ExplorationError(RuntimeError):
    """A sampled parameter could not be solved; carries the offending theta."""

    def __init__(self, message, theta=None, index=None):
        super().__init__(message)
        self.theta = None if theta is None else np.asarray(theta).copy()
        self.index = index


def good_turing(counts, N=None):
    """Fraction of samples whose label was seen exactly once."""
    counts = [int(c) for c in counts]
    total = sum(counts)
    if N is None:
        N = total
    if N < 1:
        raise ValueError("Good-Turing estimate needs N >= 1")
    if N != total:
        raise ValueError(f"counts sum to {total}, not N = {N}")
    n1 = sum(1 for c in counts if c == 1)
    return n1 / N


def missing_mass_bound(G, N, beta):
    """Upper confidence bound on the unseen-strategy probability."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if not beta > 0.0:
        raise ValueError("beta must be positive")
    return G + C_GT * math.sqrt(math.log(3.0 / beta) / N)


def required_samples(epsilon, beta, G=0.0):
    """Smallest N whose bound at estimate ``G`` is at most ``epsilon``."""
    slack = epsilon - G
    if slack <= 0.0:
        return math.inf
    n = math.ceil((C_GT / slack) ** 2 * math.log(3.0 / beta))
    # guard the ceiling against rounding at the boundary
    while n > 1 and missing_mass_bound(G, n - 1, beta) <= epsilon:
        n -= 1
    while missing_mass_bound(G, n, beta) > epsilon:
        n += 1
    return n


@dataclass(frozen=True)
class ExplorationConfig:
    epsilon: float = 0.005
    beta: float = 0.05
    batch_size: int = 5000
    mode: str = "estimate"
    max_samples: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.max_samples < 1:
            raise ValueError("max_samples must be >= 1")

    def to_dict(self):
        return {"epsilon": self.epsilon, "beta": self.beta, "batch_size": self.batch_size,
                "mode": self.mode, "max_samples": self.max_samples, "seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True, eq=False)
class ExplorationResult:
    thetas: np.ndarray
    labels: np.ndarray
    catalog: StrategyCatalog
    N: int
    G: float
    bound_value: float
    terminated_by: str
    config: ExplorationConfig
    history: tuple = field(default=())

    @property
    def samples(self):
        return list(zip(self.thetas, self.labels.tolist()))

    @property
    def M(self):
        return self.catalog.M


def default_workers():
    try:
        return max(1, int(os.environ.get("OPTSTRAT_THREADS", "1")))
    except ValueError:
        return 1


def _solve_encode(problem, theta):
    inst = canonicalize(problem, theta)
    res = solve(inst)
    if not res.ok:
        return None, res.status + (f" ({res.message})" if res.message else "")
    return encode(res, inst), ""


def _solve_chunk(args):
    problem, thetas = args
    return [_solve_encode(problem, t) for t in thetas]


def strategies_for(problem, thetas, workers=1):
    """Solve and encode each row of ``thetas``; results keep the input order."""
    if workers <= 1 or len(thetas) < 2 * workers:
        return [_solve_encode(problem, t) for t in thetas]
    chunks = np.array_split(np.asarray(thetas), workers * 4)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_solve_chunk, [(problem, c) for c in chunks])
        return [r for part in parts for r in part]


def explore(problem, space, cfg=None, workers=None, progress=None):
    """Sample, solve and catalog strategies until the stopping rule fires."""
    cfg = cfg or ExplorationConfig()
    workers = default_workers() if workers is None else workers
    stream = ParameterStream(space, cfg.seed)
    catalog = StrategyCatalog()
    thetas = []
    labels = []
    history = []
    N = 0
    while True:
        count = min(cfg.batch_size, cfg.max_samples - N)
        batch = stream.take(count)
        for k, (s, err) in enumerate(strategies_for(problem, batch, workers)):
            if s is None:
                raise ExplorationError(
                    f"sample {N + k} could not be solved: {err}; the problem must be "
                    f"feasible for every parameter in the support", batch[k], N + k)
            label, _ = catalog.insert(s)
            labels.append(label)
        thetas.append(batch)
        N += count
        G = good_turing(catalog.counts, N)
        bound = missing_mass_bound(G, N, cfg.beta)
        history.append((N, catalog.M, G, bound))
        if progress is not None:
            progress(N, catalog.M, G, bound)
        if cfg.mode == "estimate" and G <= cfg.epsilon:
            how = "estimate"
            break
        if cfg.mode == "full-bound" and bound <= cfg.epsilon:
            how = "bound"
            break
        if N >= cfg.max_samples:
            how = "cap"
            break
    return ExplorationResult(
        thetas=np.vstack(thetas),
        labels=np.asarray(labels, dtype=np.int64),
        catalog=catalog.freeze(),
        N=N,
        G=G,
        bound_value=bound,
        terminated_by=how,
        config=cfg,
        history=tuple(history),
    )
