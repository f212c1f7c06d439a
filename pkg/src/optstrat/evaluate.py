"""Online-path metrics: infeasibility, suboptimality, top-k selection and reports.

Objectives are compared in the canonical minimization sense, so the
suboptimality of a maximization problem is measured on the negated value.
"""

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .problem import canonicalize, sample_parameters
from .solver import OPTIMAL, solve, solve_reduced

DEN_FLOOR = 1e-10
TABLE_COLUMNS = ("n", "m", "n_var", "n_con", "learner", "N", "GT", "|S|", "acc [%]", "t_ratio",
                 "p_max", "d_max")


@dataclass(frozen=True)
class EvaluationConfig:
    eps_inf: float = 1e-3
    eps_sub: float = 1e-3
    k: int = 3
    n_test: int = 100
    seed: int = 1

    def __post_init__(self):
        if not (self.eps_inf > 0 and self.eps_sub > 0):
            raise ValueError("tolerances must be positive")
        if self.k < 1 or self.n_test < 1:
            raise ValueError("k and n_test must be >= 1")

    def to_dict(self):
        return {"eps_inf": self.eps_inf, "eps_sub": self.eps_sub, "k": self.k,
                "n_test": self.n_test, "seed": self.seed}


def infeasibility(inst, x):
    """``||(Ax - b)_+||_2 / max(||Ax||_2, ||b||_2)``; equality rows count ``|a_i x - b_i|``."""
    x = np.asarray(x, dtype=float)
    Ax = inst.A @ x
    r = Ax - inst.b
    viol = np.where(inst.is_eq, np.abs(r), np.maximum(r, 0.0))
    den = max(float(np.linalg.norm(Ax)), float(np.linalg.norm(inst.b)), DEN_FLOOR)
    return float(np.linalg.norm(viol)) / den


def suboptimality(f_hat, f_star):
    """Relative gap ``(f_hat - f_star) / |f_star|`` clamped at 0 (minimization)."""
    d = (f_hat - f_star) / max(abs(f_star), DEN_FLOOR)
    return max(d, 0.0)


def floor_active(f_star):
    return abs(f_star) < DEN_FLOOR


@dataclass(frozen=True, eq=False)
class Selection:
    index: int
    result: object
    p: float
    d: float
    candidates: tuple = ()


def select_best(inst, candidates, f_star, eps_inf=1e-3):
    """Reduced-solve every candidate strategy and keep the best one.

    Among candidates with ``p <= eps_inf`` the lowest objective wins; if none
    qualifies the lowest ``p`` wins. Ties keep the higher-ranked candidate.
    ``f_star`` is the canonical (minimization) optimum.
    """
    if not candidates:
        raise ValueError("need at least one candidate strategy")
    diag = []
    for rank, strat in enumerate(candidates):
        res = solve_reduced(inst, strat)
        if res.status == OPTIMAL:
            p = infeasibility(inst, res.x_star)
            f = inst.objective(res.x_star)
        else:
            p = math.inf
            f = math.inf
        diag.append((rank, res, p, f))
    ok = [c for c in diag if c[2] <= eps_inf]
    if ok:
        rank, res, p, f = min(ok, key=lambda c: (c[3], c[0]))
    else:
        rank, res, p, f = min(diag, key=lambda c: (c[2], c[0]))
    if not math.isfinite(p):
        raise RuntimeError("every candidate strategy failed: "
                           + "; ".join(f"#{c[0]}: {c[1].message}" for c in diag))
    d = suboptimality(f, f_star) if p <= eps_inf else 0.0
    info = tuple({"rank": c[0], "status": c[1].status, "p": c[2], "objective": c[3]} for c in diag)
    return Selection(rank, res, p, d, info)


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    records: tuple
    timings: tuple
    config: EvaluationConfig
    N: int = 0
    GT: float = float("nan")
    M: int = 0
    learner: str = ""
    dims: dict = field(default_factory=dict)

    @property
    def accuracy(self):
        return aggregate(self.records, self.timings, self.config)["accuracy"]

    def aggregates(self):
        return aggregate(self.records, self.timings, self.config)

    def table_row(self):
        agg = self.aggregates()
        d = self.dims
        return {
            "n": d.get("n", ""), "m": d.get("m", ""), "n_var": d.get("n_var", ""),
            "n_con": d.get("n_con", ""), "learner": self.learner, "N": self.N, "GT": self.GT,
            "|S|": self.M, "acc [%]": agg["accuracy"], "t_ratio": agg["t_ratio"],
            "p_max": agg["p_max"], "d_max": agg["d_max"],
        }

    def payload(self):
        """Deterministic part of the report (no wall-clock timings)."""
        agg = self.aggregates()
        agg.pop("t_ratio")
        return {"config": self.config.to_dict(), "learner": self.learner, "N": self.N,
                "GT": self.GT, "M": self.M, "dims": self.dims, "aggregates": agg,
                "records": list(self.records)}

    def timing_block(self):
        return {"t_ratio": self.aggregates()["t_ratio"], "samples": list(self.timings)}

    def to_dict(self):
        return {"format": "optstrat-report", "version": 1, "payload": self.payload(),
                "timing": self.timing_block(), "table": render_table([self.table_row()])}

    def dumps(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def aggregate(records, timings, cfg):
    """Accuracy, max infeasibility, max suboptimality (feasible records) and t_ratio."""
    n = len(records)
    correct = sum(1 for r in records if r["p"] <= cfg.eps_inf and r["d"] <= cfg.eps_sub)
    feas = [r["d"] for r in records if r["p"] <= cfg.eps_inf]
    ratios = [t["t_full"] / t["t_method"] for t in timings if t["t_method"] > 0]
    return {
        "accuracy": 100.0 * correct / n if n else float("nan"),
        "p_max": max((r["p"] for r in records), default=float("nan")),
        "d_max": max(feas, default=0.0),
        "t_ratio": float(np.mean(ratios)) if ratios else float("nan"),
        "n_test": n,
    }


def evaluate(predictor, problem, space, catalog, cfg=None, N=0, GT=float("nan"), dims=None):
    """Run the online path on ``cfg.n_test`` fresh samples and score it."""
    cfg = cfg or EvaluationConfig()
    thetas = sample_parameters(space, cfg.seed, cfg.n_test)
    k = min(cfg.k, predictor.M)
    records = []
    timings = []
    for i, theta in enumerate(thetas):
        inst = canonicalize(problem, theta)
        t0 = time.perf_counter()
        full = solve(inst)
        t_full = time.perf_counter() - t0
        if not full.ok:
            raise RuntimeError(f"full solve failed on test sample {i} ({full.status}): "
                               f"theta={theta.tolist()}")
        f_star = inst.objective(full.x_star)
        t0 = time.perf_counter()
        labels = predictor.predict_topk(theta, k)
        sel = select_best(inst, [catalog[lab] for lab in labels], f_star, cfg.eps_inf)
        t_method = time.perf_counter() - t0
        records.append({
            "theta": theta.tolist(), "f_star": f_star, "label": labels[sel.index],
            "rank": sel.index, "p": sel.p, "d": sel.d, "floor_active": floor_active(f_star),
        })
        timings.append({"t_full": t_full, "t_method": t_method})
    if dims is None:
        dims = problem_dims(problem, canonicalize(problem, thetas[0]))
    return EvaluationReport(tuple(records), tuple(timings), cfg, N, GT, catalog.M,
                            predictor.kind, dict(dims))


def problem_dims(problem, inst):
    """Table dimensions: the first two size parameters of a builtin family, if any."""
    sizes = list(problem.source.get("builtin", {}).get("sizes", {}).values())
    return {"n": sizes[0] if sizes else "", "m": sizes[1] if len(sizes) > 1 else "",
            "n_var": inst.n_var, "n_con": inst.n_con}


def _cell(v):
    if isinstance(v, float):
        if math.isnan(v):
            return "-"
        return f"{v:.2e}" if (v != 0 and (abs(v) < 1e-2 or abs(v) >= 1e4)) else f"{v:.2f}"
    return str(v)


def render_table(rows, columns=TABLE_COLUMNS):
    """Fixed-width text table in the benchmark column layout."""
    cells = [[_cell(r.get(c, "")) for c in columns] for r in rows]
    widths = [max([len(c)] + [len(row[k]) for row in cells]) for k, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in cells:
        lines.append("  ".join(v.rjust(w) for v, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


def render_csv(rows, columns=TABLE_COLUMNS):
    import csv
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([r.get(c, "") for c in columns])
    return buf.getvalue()
