"""End-to-end acceptance checks, one test (or test group) per criterion.

Run alone with ``pytest tests/test_acceptance.py -v``; the terminal summary
ends with one PASS/FAIL line per criterion. The desk-scale table (C4) is the
long pole, well under two hours on one core.
"""

import math
import statistics
import sys
import time

import numpy as np
import pytest

from optstrat.artifacts import (
    DATASET_FORMAT, MODEL_FORMAT, REPORT_FORMAT, LoadedDataset, dataset_payload, manifest,
    model_payload, payload_bytes, write_artifact,
)
from optstrat.bench import BenchmarkSpec, PipelineSeeds, generate, reproduce_example, run_pipeline
from optstrat.evaluate import EvaluationConfig, infeasibility, suboptimality
from optstrat.explorer import (
    C_GT, ExplorationConfig, explore, good_turing, missing_mass_bound, required_samples,
)
from optstrat.learners import HYPERPLANE, PARALLEL, fit_tree, loss_and_grads, softmax
from optstrat.learners.nn import init_params
from optstrat.problem import (
    EQ, LE, Ball, ModelData, ParameterSpace, ParametricProblem, canonicalize, sample_parameters,
)
from optstrat.solver import OPTIMAL, max_violation, solve, solve_fixed, solve_mio, solve_reduced
from optstrat.strategy import encode

from oracles import (
    binary_enum, c_gt_mp, good_turing_exact, knapsack_enum, missing_mass_bound_mp,
)

pytestmark = pytest.mark.slow

DESK = {
    "inventory": {},
    "knapsack": {},
    "supplier": {},
    "transportation": {"n": 5, "m": 5},
    "portfolio": {"n": 50, "p": 10},
    "facility": {"n": 10, "m": 10},
    "hybrid": {"T": 10},
}
SEED = 0

# explorations shared between criteria, keyed by spec label
_EXPLORED = {}


def _spec(family):
    return BenchmarkSpec(family, DESK[family], SEED)


def _exploration(family):
    spec = _spec(family)
    if spec.label() not in _EXPLORED:
        prob, space = generate(spec)
        _EXPLORED[spec.label()] = explore(prob, space, ExplorationConfig(seed=SEED))
    return _EXPLORED[spec.label()]


# ---------------------------------------------------------------------------
# C1


@pytest.mark.criterion(1, "reduced solve recovers the full solve, 7 families x 100 theta")
def test_c1_strategy_recovery(note):
    t0 = time.perf_counter()
    worst_obj = worst_viol = 0.0
    for family in DESK:
        prob, space = generate(_spec(family))
        for theta in sample_parameters(space, 101, 100):
            inst = canonicalize(prob, theta)
            full = solve(inst)
            assert full.status == OPTIMAL, (family, theta)
            red = solve_reduced(inst, encode(full, inst))
            assert red.status == OPTIMAL, (family, theta, red.message)
            err = abs(red.objective - full.objective) / (1 + abs(full.objective))
            viol = max_violation(inst, red.x_star)
            worst_obj, worst_viol = max(worst_obj, err), max(worst_viol, viol)
            assert err <= 1e-6, (family, theta, err)
            assert viol <= 1e-6, (family, theta, viol)
    elapsed = time.perf_counter() - t0
    note(f"max rel obj gap {worst_obj:.1e}, max violation {worst_viol:.1e}, {elapsed:.0f} s")
    assert elapsed <= 600


# ---------------------------------------------------------------------------
# C2


@pytest.mark.criterion(2, "branch-and-bound matches enumeration on 50 instances")
def test_c2_mio_enumeration(note):
    t0 = time.perf_counter()
    worst = 0.0
    prob, space = generate(BenchmarkSpec("knapsack"))
    c = np.array([0.42, 0.72, 0.0, 0.3, 0.15, 0.09, 0.19, 0.35, 0.4, 0.54])
    for theta in sample_parameters(space, 202, 25):
        res = solve(canonicalize(prob, theta))
        _, best = knapsack_enum(c, theta[:10], 5.0, theta[10:])
        worst = max(worst, abs(res.objective - best))
        assert res.objective == pytest.approx(best, abs=1e-8)
    for i, T in enumerate([2, 3, 4] * 8 + [4]):
        prob, space = generate(BenchmarkSpec("hybrid", {"T": T}))
        theta = sample_parameters(space, 300 + i, 1)[0]
        inst = canonicalize(prob, theta)
        res = solve_mio(inst)
        ref = binary_enum(inst, solve_fixed)
        got = inst.objective(res.x_star)
        worst = max(worst, abs(got - ref))
        assert got == pytest.approx(ref, abs=1e-8)
    elapsed = time.perf_counter() - t0
    note(f"max |gap| {worst:.1e}, {elapsed:.0f} s")
    assert elapsed <= 300


# ---------------------------------------------------------------------------
# C3 and C10

_EXAMPLES = {}


def _example(family):
    if family not in _EXAMPLES:
        t0 = time.perf_counter()
        tree, report, run = reproduce_example(family, seed=SEED)
        _EXAMPLES[family] = (tree, report, run, time.perf_counter() - t0)
        _EXPLORED[_spec(family).label()] = run.exploration
    return _EXAMPLES[family]


@pytest.mark.criterion(3, "worked examples: OCT accuracy >= 95% with at most 20 strategies")
@pytest.mark.parametrize("family", ["inventory", "supplier", "knapsack"])
def test_c3_examples(family, note):
    tree, report, run, seconds = _example(family)
    acc = report.accuracy
    note(f"{family}: acc {acc:.0f}%, M {run.exploration.M}, {seconds:.0f} s")
    assert run.exploration.terminated_by == "estimate"
    assert report.aggregates()["n_test"] == 100
    assert run.exploration.M <= 20
    assert acc >= 95.0
    total = sum(v[3] for v in _EXAMPLES.values())
    assert total <= 1800


def _payloads(run, report, seeds, out_dir):
    prob, space, res = run.problem, run.space, run.exploration
    started = "1970-01-01T00:00:00+00:00"
    ds = dataset_payload(prob, space, res)
    files = {"dataset": out_dir / "ds.json", "model": out_dir / "model.json",
             "report": out_dir / "report.json"}
    write_artifact(files["dataset"], DATASET_FORMAT, ds, manifest("explore", {}, [], started))
    mp = model_payload(run.predictors["oct"], LoadedDataset(ds), seeds.split, seeds.train)
    write_artifact(files["model"], MODEL_FORMAT, mp, manifest("train", {}, [], started))
    write_artifact(files["report"], REPORT_FORMAT, report.payload(),
                   manifest("evaluate", {}, [], started), timing=report.timing_block())
    return {k: payload_bytes(v) for k, v in files.items()}


@pytest.mark.criterion(10, "repeated knapsack run gives byte-identical payloads")
def test_c10_determinism(tmp_path, note):
    _, rep1, run1, _ = _example("knapsack")
    _, rep2, run2 = reproduce_example("knapsack", seed=SEED)
    seeds = PipelineSeeds.from_base(SEED)
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    first = _payloads(run1, rep1, seeds, tmp_path / "a")
    second = _payloads(run2, rep2, seeds, tmp_path / "b")
    for key in first:
        assert first[key] == second[key], key
    note(", ".join(f"{k} {len(v)} B" for k, v in first.items()))


# ---------------------------------------------------------------------------
# C4

C4_FAMILIES = ["transportation", "portfolio", "facility", "hybrid"]
_C4_START = []


@pytest.fixture(scope="module")
def desk_runs():
    runs = {}
    _C4_START.append(time.perf_counter())
    for family in C4_FAMILIES:
        run = run_pipeline(_spec(family), ("oct", "oct-h", "nn"), PipelineSeeds.from_base(SEED),
                           keep_going=True)
        _EXPLORED[_spec(family).label()] = run.exploration
        runs[family] = run
    _C4_START.append(time.perf_counter())
    return runs


@pytest.mark.criterion(4, "desk table: acc >= 90%, p <= 1e-2, d <= 5e-2 for every learner")
@pytest.mark.parametrize("family", C4_FAMILIES)
def test_c4_desk_table(desk_runs, family, note):
    run = desk_runs[family]
    bad = []
    for learner in ("oct", "oct-h", "nn"):
        if learner in run.errors:
            bad.append(f"{learner} error {run.errors[learner]}")
            continue
        agg = run.reports[learner].aggregates()
        note(f"{family}/{learner}: acc {agg['accuracy']:.0f}% p {agg['p_max']:.1e} "
             f"d {agg['d_max']:.1e}")
        if agg["accuracy"] < 90.0 or agg["p_max"] > 1e-2 or agg["d_max"] > 5e-2:
            bad.append(f"{learner} {agg}")
    assert not bad, bad
    if family == C4_FAMILIES[-1]:
        assert _C4_START[1] - _C4_START[0] <= 7200


# ---------------------------------------------------------------------------
# C5


@pytest.mark.criterion(5, "Good-Turing estimate and bound against exact arithmetic")
def test_c5_good_turing(note):
    assert abs(C_GT - float(c_gt_mp())) <= math.ulp(C_GT)
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(1000):
        counts = rng.geometric(rng.uniform(0.05, 0.95), size=int(rng.integers(1, 80)))
        exact = good_turing_exact(counts)
        G = good_turing(counts)
        if exact != 0:
            worst = max(worst, abs(G - float(exact)) / float(exact))
        else:
            assert G == 0.0
        N, beta = int(counts.sum()), float(rng.uniform(1e-3, 0.5))
        ref = float(missing_mass_bound_mp(exact, N, beta))
        worst = max(worst, abs(missing_mass_bound(G, N, beta) - ref) / ref)
    assert worst <= 1e-12
    for G in (0.0, 0.01, 0.3):
        seq = [missing_mass_bound(G, N, 0.05) for N in range(1, 20000, 7)]
        assert all(b < a for a, b in zip(seq, seq[1:]))
    note(f"max rel error {worst:.1e}")


# ---------------------------------------------------------------------------
# C6


@pytest.mark.criterion(6, "exploration stops on the estimate; full bound needs the analytic count")
@pytest.mark.parametrize("family", list(DESK))
def test_c6_estimate_termination(family, note):
    res = _exploration(family)
    note(f"{family}: N {res.N}, M {res.M}, G {res.G:.4f}")
    assert res.terminated_by == "estimate"
    assert res.G <= 0.005
    assert res.N < 100000


@pytest.mark.criterion(6, "exploration stops on the estimate; full bound needs the analytic count")
def test_c6_full_bound_inversion():
    def inst(theta):
        return ModelData(q=np.array([1.0]), A=np.array([[-1.0]]), b=np.array([-theta[0]]),
                         senses=(LE,), lower=np.zeros(1), upper=np.full(1, 10.0))

    prob = ParametricProblem("point", 1, 1, inst)
    space = ParameterSpace(1, (Ball((0,), (2.0,), 0.0),))
    for eps, beta in ((0.2, 0.05), (0.1, 0.1)):
        need = (C_GT / eps) ** 2 * math.log(3 / beta)
        res = explore(prob, space, ExplorationConfig(epsilon=eps, beta=beta, batch_size=50,
                                                     mode="full-bound"), workers=1)
        assert res.M == 1 and res.terminated_by == "bound"
        assert need <= res.N < need + 50
        assert required_samples(eps, beta) == math.ceil(need)


# ---------------------------------------------------------------------------
# C7


def _blobs(seed, n, M, p, sep):
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(M, p)) * sep
    y = rng.integers(0, M, n)
    return centers[y] + rng.normal(size=(n, p)), y


@pytest.mark.criterion(7, "learner numerics: gradients, softmax, loss trace, parallel splits")
def test_c7_learner_numerics(note):
    rng = np.random.default_rng(7)
    Ws, bs = init_params([5, 10, 10, 4], rng)
    bs = [b + 0.1 * rng.normal(size=b.shape) for b in bs]
    X = rng.normal(size=(16, 5))
    y = rng.integers(0, 4, 16)
    _, gW, gb = loss_and_grads(Ws, bs, X, y)
    h, worst = 1e-5, 0.0
    for params, grads in ((Ws, gW), (bs, gb)):
        for P, G in zip(params, grads):
            for i in np.ndindex(P.shape):
                old = P[i]
                P[i] = old + h
                up = loss_and_grads(Ws, bs, X, y)[0]
                P[i] = old - h
                dn = loss_and_grads(Ws, bs, X, y)[0]
                P[i] = old
                num = (up - dn) / (2 * h)
                worst = max(worst, abs(num - G[i]) / max(abs(num), abs(G[i]), 1e-7))
    assert worst <= 1e-4

    S = softmax(rng.normal(size=(200, 9)) * 50)
    assert np.max(np.abs(S.sum(axis=1) - 1.0)) <= 1e-9

    for mode in (PARALLEL, HYPERPLANE):
        for seed in range(3):
            Xb, yb = _blobs(seed, 150, 3, 3, 1.5)
            tree = fit_tree(Xb, yb, 3, mode=mode, max_depth=4, min_bucket=2, alpha=0.005,
                            restarts=2, seed=seed)
            trace = tree.info["loss_trace"]
            assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))
            if mode == PARALLEL:
                assert all(np.count_nonzero(tree.A[t]) == 1 for t in tree.branch_nodes())
    note(f"max gradient rel error {worst:.1e}")


# ---------------------------------------------------------------------------
# C8


@pytest.mark.criterion(8, "metric formula examples")
def test_c8_metric_examples():
    def single_row(a, b, sense):
        data = ModelData(q=np.zeros(1), A=np.array([[a]]), b=np.array([b]), senses=(sense,),
                         lower=np.full(1, -np.inf), upper=np.full(1, np.inf))
        return canonicalize(ParametricProblem("row", 1, 1, lambda th: data), np.zeros(1))

    assert infeasibility(single_row(1.0, 1.0, LE), [0.5]) == 0.0
    assert infeasibility(single_row(1.0, 1.0, LE), [2.0]) == 0.5
    assert infeasibility(single_row(10.0, 10.0, LE), [2.0]) == 0.5
    assert infeasibility(single_row(1.0, 1.0, EQ), [0.0]) == 1.0
    assert suboptimality(10.5, 10.0) == 0.05
    assert suboptimality(7.0, 7.0) == 0.0
    assert suboptimality(9.0, 10.0) == 0.0
    assert suboptimality(1e-12, 0.0) == pytest.approx(0.01, rel=1e-12)
    assert EvaluationConfig().eps_inf == 1e-3


# ---------------------------------------------------------------------------
# C9


@pytest.mark.criterion(9, "hybrid T=20: median full/online time ratio >= 2")
def test_c9_speed(note):
    spec = BenchmarkSpec("hybrid", {"T": 20}, SEED)
    cfg = ExplorationConfig(seed=SEED, max_samples=5000)
    run = run_pipeline(spec, ("oct",), PipelineSeeds.from_base(SEED), explore_cfg=cfg,
                       eval_cfg=EvaluationConfig(n_test=100, seed=SEED + 1_000_003))
    timings = run.reports["oct"].timings
    ratios = [t["t_full"] / t["t_method"] for t in timings]
    med = statistics.median(ratios)
    note(f"median ratio {med:.1f} over {len(ratios)} samples, "
         f"acc {run.reports['oct'].accuracy:.0f}%")
    assert len(ratios) == 100
    assert med >= 2.0


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
