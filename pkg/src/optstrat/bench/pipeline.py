"""End-to-end runs: explore, train, evaluate, and the summary table."""

import time
import traceback
from dataclasses import dataclass, field

from ..evaluate import TABLE_COLUMNS, EvaluationConfig, evaluate, render_csv, render_table
from ..explorer import ExplorationConfig, explore
from ..learners import make_dataset, render_tree, train
from .families import BenchmarkSpec, generate

EXAMPLE_FAMILIES = ("inventory", "knapsack", "supplier")
# offsets from the base seed; evaluation draws from its own stream
SPLIT_OFFSET = 1
TRAIN_OFFSET = 2
EVAL_OFFSET = 1_000_003


@dataclass(frozen=True)
class PipelineSeeds:
    explore: int = 0
    split: int = SPLIT_OFFSET
    train: int = TRAIN_OFFSET
    evaluate: int = EVAL_OFFSET

    @classmethod
    def from_base(cls, seed):
        return cls(seed, seed + SPLIT_OFFSET, seed + TRAIN_OFFSET, seed + EVAL_OFFSET)

    def to_dict(self):
        return {"explore": self.explore, "split": self.split, "train": self.train,
                "evaluate": self.evaluate}


@dataclass(eq=False)
class PipelineRun:
    spec: BenchmarkSpec
    problem: object
    space: object
    exploration: object
    predictors: dict = field(default_factory=dict)
    reports: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    seconds: dict = field(default_factory=dict)


def run_pipeline(spec, learners=("oct",), seeds=None, explore_cfg=None, eval_cfg=None,
                 workers=None, restarts=None, keep_going=False):
    """Explore once, then train and evaluate each learner on the shared dataset.

    With ``keep_going`` a failing learner is recorded in ``errors`` instead of
    raising.
    """
    seeds = seeds or PipelineSeeds()
    prob, space = generate(spec)
    cfg = explore_cfg or ExplorationConfig(seed=seeds.explore)
    t0 = time.perf_counter()
    res = explore(prob, space, cfg, workers=workers)
    run = PipelineRun(spec, prob, space, res)
    run.seconds["explore"] = time.perf_counter() - t0
    data = make_dataset(res.thetas, res.labels, res.M, seed=seeds.split)
    ecfg = eval_cfg or EvaluationConfig(seed=seeds.evaluate)
    for learner in learners:
        try:
            t0 = time.perf_counter()
            pred = train(data, learner, seed=seeds.train, restarts=restarts,
                         param_names=prob.parameter_names)
            run.seconds[f"train-{learner}"] = time.perf_counter() - t0
            run.predictors[learner] = pred
            run.reports[learner] = evaluate(pred, prob, space, res.catalog, ecfg, N=res.N,
                                            GT=res.G)
        except Exception as exc:
            if not keep_going:
                raise
            run.errors[learner] = f"{type(exc).__name__}: {exc}"
            run.errors[learner + "-trace"] = traceback.format_exc()
    return run


def reproduce_example(family, seed=0, workers=None, restarts=None):
    """Run one of the introductory examples with OCT; returns ``(tree text, report)``."""
    if family not in EXAMPLE_FAMILIES:
        raise ValueError(f"example family must be one of {', '.join(EXAMPLE_FAMILIES)}")
    run = run_pipeline(BenchmarkSpec(family, {}, 0), ("oct",), PipelineSeeds.from_base(seed),
                       workers=workers, restarts=restarts)
    return render_tree(run.predictors["oct"]), run.reports["oct"], run


def desk_table(specs, learners, seed=0, workers=None, restarts=None, progress=None):
    """One table row per (spec, learner); failures land in the row's ``error`` field.

    ``specs`` holds :class:`BenchmarkSpec` objects (or family names for the
    default sizes). Returns ``(rows, text, csv)``.
    """
    rows = []
    for spec in specs:
        if not isinstance(spec, BenchmarkSpec):
            spec = BenchmarkSpec(spec)
        if not learners:
            continue
        try:
            run = run_pipeline(spec, tuple(learners), PipelineSeeds.from_base(seed),
                               workers=workers, restarts=restarts, keep_going=True)
        except Exception as exc:
            for learner in learners:
                rows.append({"family": spec.family, "learner": learner,
                             "error": f"{type(exc).__name__}: {exc}"})
            continue
        for learner in learners:
            if learner in run.reports:
                row = {"family": spec.family, **run.reports[learner].table_row()}
            else:
                row = {"family": spec.family, "learner": learner, "N": run.exploration.N,
                       "GT": run.exploration.G, "|S|": run.exploration.M,
                       "error": run.errors.get(learner, "")}
            rows.append(row)
            if progress is not None:
                progress(row)
    columns = ("family",) + TABLE_COLUMNS + ("error",)
    return rows, render_table(rows, columns), render_csv(rows, columns)

