import json
import math

import numpy as np
import pytest

from optstrat.bench import BenchmarkSpec, generate
from optstrat.evaluate import (
    TABLE_COLUMNS, EvaluationConfig, aggregate, evaluate, floor_active, infeasibility,
    render_csv, render_table, select_best, suboptimality,
)
from optstrat.problem import (
    EQ, LE, Ball, ModelData, ParameterSpace, ParametricProblem, canonicalize, sample_parameters,
)
from optstrat.solver import solve
from optstrat.strategy import Strategy, StrategyCatalog, encode


def _rows(A, b, senses):
    n = len(A[0])
    data = ModelData(q=np.zeros(n), A=np.asarray(A, float), b=np.asarray(b, float),
                     senses=tuple(senses), lower=np.full(n, -np.inf), upper=np.full(n, np.inf))
    return canonicalize(ParametricProblem("rows", n, 1, lambda th: data), np.zeros(1))


def test_infeasibility_feasible_point():
    inst = _rows([[1.0, 1.0]], [2.0], [LE])
    assert infeasibility(inst, [0.5, 0.5]) == 0.0


def test_infeasibility_hand_value():
    inst = _rows([[1.0]], [1.0], [LE])
    assert infeasibility(inst, [2.0]) == 0.5


def test_infeasibility_equality_rows_count_both_sides():
    inst = _rows([[1.0]], [1.0], [EQ])
    assert infeasibility(inst, [0.0]) == 1.0
    assert infeasibility(inst, [3.0]) == 2.0 / 3.0


def test_infeasibility_scale_invariant():
    inst = _rows([[1.0]], [1.0], [LE])
    big = _rows([[10.0]], [10.0], [LE])
    assert infeasibility(big, [2.0]) == infeasibility(inst, [2.0])
    rng = np.random.default_rng(0)
    for _ in range(50):
        A = rng.normal(size=(4, 3))
        b = rng.normal(size=4)
        x = rng.normal(size=3)
        s = float(rng.uniform(0.1, 100))
        a = infeasibility(_rows(A, b, [LE] * 4), x)
        c = infeasibility(_rows(A * s, b * s, [LE] * 4), x)
        assert c == pytest.approx(a, rel=1e-14, abs=1e-300)


def test_infeasibility_zero_denominator():
    inst = _rows([[1.0]], [0.0], [LE])
    assert infeasibility(inst, [0.0]) == 0.0


def test_suboptimality_examples():
    assert suboptimality(3.0, 3.0) == 0.0
    assert suboptimality(10.5, 10.0) == 0.05
    assert suboptimality(1e-12, 0.0) == pytest.approx(0.01, rel=1e-12)
    assert floor_active(0.0) and not floor_active(1.0)
    # clamp at zero
    assert suboptimality(9.0, 10.0) == 0.0
    assert suboptimality(-11.0, -10.0) == 0.0
    assert suboptimality(-9.0, -10.0) == pytest.approx(0.1)


def _inv_instance(seed=0):
    prob, space = generate(BenchmarkSpec("inventory", {"T": 6}))
    thetas = sample_parameters(space, seed, 400)
    cat = StrategyCatalog()
    for th in thetas:
        inst = canonicalize(prob, th)
        cat.insert(encode(solve(inst), inst))
    return prob, space, thetas, cat


def test_select_best_true_strategy_among_candidates():
    prob, _, thetas, cat = _inv_instance()
    assert cat.M >= 2
    for th in thetas[:20]:
        inst = canonicalize(prob, th)
        full = solve(inst)
        true = encode(full, inst)
        others = [s for s in cat.strategies if s != true][:2]
        f_star = inst.objective(full.x_star)
        sel = select_best(inst, others + [true], f_star)
        assert sel.p <= 1e-3
        assert sel.d <= 1e-6


def test_select_single_candidate_always_chosen():
    prob, _, thetas, cat = _inv_instance()
    inst = canonicalize(prob, thetas[0])
    f_star = inst.objective(solve(inst).x_star)
    for s in cat.strategies:
        sel = select_best(inst, [s], f_star)
        assert sel.index == 0


def test_select_prefers_lower_objective_and_higher_rank():
    # min x s.t. x >= theta: the strategy with the bound row tight is optimal
    def inst_fn(theta):
        return ModelData(q=np.array([1.0]), A=np.array([[-1.0], [-1.0]]),
                         b=np.array([-1.0, -0.9]), senses=(LE, LE), lower=np.full(1, -5.0),
                         upper=np.full(1, 5.0))

    inst = canonicalize(ParametricProblem("p", 1, 1, inst_fn), np.zeros(1))
    good, worse = Strategy((0,)), Strategy((2,))  # x = 1 vs x = 5
    sel = select_best(inst, [worse, good], 1.0)
    assert sel.index == 1 and sel.d == 0.0
    sel = select_best(inst, [good, good], 1.0)
    assert sel.index == 0
    # nothing admissible: smallest violation wins (x = -5 violates both rows)
    sel = select_best(inst, [Strategy((1,)), Strategy((1, 2))], 1.0, eps_inf=1e-12)
    assert sel.candidates[sel.index]["p"] == min(c["p"] for c in sel.candidates)


def test_select_requires_candidates():
    prob, _, thetas, _ = _inv_instance()
    with pytest.raises(ValueError):
        select_best(canonicalize(prob, thetas[0]), [], 0.0)


class _Oracle:
    """Predictor stub that always ranks the true strategy first."""

    kind = "oracle"

    def __init__(self, prob, catalog):
        self.prob = prob
        self.catalog = catalog

    @property
    def M(self):
        return self.catalog.M

    def predict_topk(self, theta, k):
        inst = canonicalize(self.prob, theta)
        label, _ = self.catalog.insert(encode(solve(inst), inst))
        rest = [lab for lab in range(self.catalog.M) if lab != label]
        return [label] + rest[:k - 1]


def test_oracle_predictor_is_perfect():
    prob, space, _, cat = _inv_instance()
    rep = evaluate(_Oracle(prob, cat), prob, space, cat, EvaluationConfig(n_test=30, seed=5))
    agg = rep.aggregates()
    assert agg["accuracy"] == 100.0
    assert agg["p_max"] <= 1e-6 and agg["d_max"] <= 1e-6
    assert len(rep.records) == 30


def test_radius_zero_space_single_strategy():
    prob, space = generate(BenchmarkSpec("supplier"))
    point = ParameterSpace(space.dimension, (Ball(tuple(range(space.dimension)),
                                                  (2.0, 2.0, 3.0, 2.5, 5.0, 1.0), 0.0),))
    theta = sample_parameters(point, 0, 1)[0]
    inst = canonicalize(prob, theta)
    cat = StrategyCatalog()
    cat.insert(encode(solve(inst), inst))

    class One:
        kind = "const"
        M = 1

        def predict_topk(self, theta, k):
            return [0]

    rep = evaluate(One(), prob, point, cat, EvaluationConfig(n_test=5))
    assert rep.accuracy == 100.0


def test_aggregates_follow_records():
    cfg = EvaluationConfig()
    records = [{"p": 0.0, "d": 0.0}, {"p": 0.5, "d": 0.0}, {"p": 1e-4, "d": 2e-3},
               {"p": 2e-4, "d": 1e-4}]
    timings = [{"t_full": 2.0, "t_method": 1.0}, {"t_full": 3.0, "t_method": 1.0}] * 2
    agg = aggregate(records, timings, cfg)
    assert agg["accuracy"] == 50.0
    assert agg["p_max"] == 0.5
    assert agg["d_max"] == 2e-3
    assert agg["t_ratio"] == 2.5


def test_report_regenerates_from_records():
    prob, space, _, cat = _inv_instance()
    rep = evaluate(_Oracle(prob, cat), prob, space, cat, EvaluationConfig(n_test=10, seed=3),
                   N=400, GT=0.0)
    doc = json.loads(rep.dumps())
    payload = doc["payload"]
    cfg = EvaluationConfig(**payload["config"])
    again = aggregate(payload["records"], doc["timing"]["samples"], cfg)
    for key in ("accuracy", "p_max", "d_max", "n_test"):
        assert again[key] == payload["aggregates"][key]
    assert "t_ratio" not in payload["aggregates"]
    header = doc["table"].splitlines()[0].split()
    assert header[:4] == ["n", "m", "n_var", "n_con"]


def test_table_layout():
    row = {"n": 5, "m": 5, "n_var": 25, "n_con": 35, "learner": "oct", "N": 5000, "GT": 0.0,
           "|S|": 2, "acc [%]": 100.0, "t_ratio": 3.2, "p_max": 1e-5, "d_max": 0.0}
    text = render_table([row])
    assert len(text.splitlines()) == 3
    csv = render_csv([row]).splitlines()
    assert csv[0].split(",") == list(TABLE_COLUMNS)
    assert csv[1].split(",")[4] == "oct"
    assert render_table([]).count("\n") == 2


def test_config_validation():
    with pytest.raises(ValueError):
        EvaluationConfig(eps_inf=0)
    with pytest.raises(ValueError):
        EvaluationConfig(k=0)
    assert math.isclose(EvaluationConfig().eps_sub, 1e-3)
