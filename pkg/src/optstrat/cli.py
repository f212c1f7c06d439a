"""``optstrat`` command line: explore, train, evaluate, render, bench, solve.

Exit status is 0 on success, 1 for usage errors (bad flags, missing or
malformed input files) and 2 when the pipeline itself fails.
"""

import argparse
import datetime
import json
import os
import sys

import numpy as np

from . import __version__
from .artifacts import (
    DATASET_FORMAT, MODEL_FORMAT, REPORT_FORMAT, ArtifactError, atomic_write, dataset_payload,
    load_dataset, load_model, manifest, model_payload, write_artifact,
)
from .bench import FAMILIES, BenchmarkSpec, SpecError, generate
from .evaluate import EvaluationConfig, evaluate, infeasibility, select_best, suboptimality
from .explorer import MODES, ExplorationConfig, ExplorationError, explore
from .learners import LEARNERS, make_dataset, render_dot, render_tree, train
from .learners.data import VAL_FRACTION
from .problem import ProblemError, canonicalize
from .problem_io import load_problem
from .solver import solve

EXIT_USAGE = 1
EXIT_FAILURE = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def _log(args, msg):
    if not args.quiet:
        print(msg, file=sys.stderr, flush=True)


def _sizes(items):
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"size must look like name=value, got {item!r}")
        try:
            out[key] = int(val)
        except ValueError:
            raise UsageError(f"size {key} must be an integer, got {val!r}") from None
    return out


def _workers(args):
    if args.threads is not None:
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        return args.threads
    return None


def _config(args):
    skip = {"func", "quiet"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# ---------------------------------------------------------------------------
# subcommands


def cmd_explore(args):
    if (args.family is None) == (args.problem is None):
        raise UsageError("give exactly one of --family or --problem")
    if args.family is not None:
        prob, space = generate(BenchmarkSpec(args.family, _sizes(args.size), args.problem_seed))
    else:
        if args.size:
            raise UsageError("--size only applies to builtin families")
        prob, space = load_problem(args.problem)
    cfg = ExplorationConfig(epsilon=args.eps, beta=args.beta, batch_size=args.batch,
                            mode=args.mode, max_samples=args.max_samples, seed=args.seed)
    started = _now()

    def progress(N, M, G, bound):
        _log(args, f"N={N} strategies={M} G={G:.6g} bound={bound:.6g}")

    res = explore(prob, space, cfg, workers=_workers(args), progress=progress)
    write_artifact(args.out, DATASET_FORMAT, dataset_payload(prob, space, res),
                   manifest("explore", _config(args), [args.out], started))
    _log(args, f"wrote {args.out}: N={res.N} M={res.M} G={res.G:.6g} "
               f"(stopped by {res.terminated_by})")
    if res.terminated_by == "cap":
        _log(args, "warning: sample cap reached before the stopping rule fired")
    return 0


def cmd_train(args):
    ds = load_dataset(args.dataset)
    started = _now()
    data = make_dataset(ds.thetas, ds.labels, ds.M, seed=args.split_seed,
                        val_fraction=args.val_fraction)
    pred = train(data, args.learner, seed=args.seed, restarts=args.restarts,
                 param_names=ds.param_names)
    write_artifact(args.out, MODEL_FORMAT, model_payload(pred, ds, args.split_seed, args.seed),
                   manifest("train", _config(args), [args.out], started))
    _log(args, f"wrote {args.out}: {args.learner} validation accuracy "
               f"{pred.val_accuracy:.4f} {json.dumps(pred.hyperparams, sort_keys=True)}")
    return 0


def cmd_evaluate(args):
    lm = load_model(args.model)
    cfg = EvaluationConfig(eps_inf=args.eps_inf, eps_sub=args.eps_sub, k=args.k,
                           n_test=args.samples, seed=args.seed)
    started = _now()
    rep = evaluate(lm.predictor, lm.problem(), lm.space, lm.catalog, cfg, N=lm.N, GT=lm.G)
    table = rep.to_dict()["table"]
    write_artifact(args.out, REPORT_FORMAT, rep.payload(),
                   manifest("evaluate", _config(args), [args.out], started),
                   timing=rep.timing_block(), table=table)
    print(table, end="")
    return 0


def cmd_render(args):
    lm = load_model(args.model)
    if lm.predictor.kind == "nn":
        raise UsageError("only tree models can be rendered")
    text = render_dot(lm.predictor) if args.format == "dot" else render_tree(lm.predictor)
    if args.out:
        atomic_write(args.out, text)
    else:
        print(text, end="")
    return 0


def cmd_bench(args):
    from .bench.pipeline import desk_table, reproduce_example

    started = _now()
    if args.example:
        tree, rep, run = reproduce_example(args.example, seed=args.seed, workers=_workers(args),
                                           restarts=args.restarts)
        text = tree + "\n" + rep.to_dict()["table"]
        if args.out:
            write_artifact(args.out, REPORT_FORMAT, rep.payload(),
                           manifest("bench", _config(args), [args.out], started),
                           timing=rep.timing_block(), table=rep.to_dict()["table"], tree=tree)
        print(text, end="")
        return 0
    specs = []
    for item in args.families:
        fam, _, rest = item.partition(":")
        sizes = _sizes(rest.split(",")) if rest else {}
        specs.append(BenchmarkSpec(fam, sizes, args.problem_seed))
    learners = [s for s in args.learners.split(",") if s] if args.learners else []
    for lrn in learners:
        if lrn not in LEARNERS:
            raise UsageError(f"unknown learner {lrn!r}; choose from {', '.join(LEARNERS)}")

    def progress(row):
        _log(args, f"{row['family']} {row.get('learner')}: acc={row.get('acc [%]')} "
                   f"{row.get('error', '')}")

    rows, text, csv_text = desk_table(specs, learners, seed=args.seed, workers=_workers(args),
                                      restarts=args.restarts, progress=progress)
    if args.out:
        atomic_write(args.out, text)
    if args.csv:
        atomic_write(args.csv, csv_text)
    print(text, end="")
    return EXIT_FAILURE if any(r.get("error") for r in rows) else 0


def _theta(args, p):
    if args.theta is not None:
        try:
            vals = [float(v) for v in args.theta.replace(",", " ").split()]
        except ValueError:
            raise UsageError("--theta must be a list of numbers") from None
    else:
        try:
            with open(args.theta_file) as fh:
                vals = [float(v) for v in json.load(fh)]
        except (OSError, ValueError, TypeError) as exc:
            raise UsageError(f"cannot read --theta-file: {exc}") from None
    if len(vals) != p:
        raise UsageError(f"theta needs {p} values, got {len(vals)}")
    return np.array(vals)


def cmd_solve(args):
    lm = load_model(args.model)
    prob = lm.problem()
    theta = _theta(args, prob.p)
    inst = canonicalize(prob, theta)
    k = min(args.k, lm.predictor.M)
    labels = lm.predictor.predict_topk(theta, k)
    out = {"theta": theta.tolist(), "candidates": labels}
    f_star = None
    if args.check:
        full = solve(inst)
        if not full.ok:
            raise RuntimeError(f"full solve failed ({full.status}) {full.message}")
        f_star = inst.objective(full.x_star)
    sel = select_best(inst, [lm.catalog[lab] for lab in labels],
                      f_star if f_star is not None else 0.0, args.eps_inf)
    x = inst.user_solution(sel.result.x_star)
    p = infeasibility(inst, sel.result.x_star)
    out.update({"strategy": labels[sel.index], "x": x.tolist(),
                "objective": sel.result.objective, "p": p,
                "feasible": p <= args.eps_inf})
    if f_star is not None:
        out["d"] = suboptimality(inst.objective(sel.result.x_star), f_star)
        out["optimal_objective"] = inst.obj_sign * f_star
    if prob.var_names:
        out["names"] = list(prob.var_names)
    print(json.dumps(out, indent=1))
    if not out["feasible"]:
        print(f"warning: solution violates the constraints (p={p:.3g})", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------


def build_parser():
    ap = _Parser(prog="optstrat", description="Learn optimal strategies of parametric "
                 "optimization problems and solve new instances online.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help="worker processes (default: $OPTSTRAT_THREADS or 1)")
    common.add_argument("-q", "--quiet", action="store_true")
    sub = ap.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("explore", parents=[common], help="sample parameters and collect strategies")
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--size", action="append", metavar="NAME=VALUE",
                   help="family size parameter (repeatable)")
    p.add_argument("--problem-seed", type=int, default=0, help="seed of the family data")
    p.add_argument("--problem", metavar="FILE", help="JSON problem file")
    p.add_argument("--eps", type=float, default=0.005)
    p.add_argument("--beta", type=float, default=0.05)
    p.add_argument("--batch", type=int, default=5000)
    p.add_argument("--mode", choices=MODES, default="estimate")
    p.add_argument("--max-samples", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("train", parents=[common], help="fit a strategy classifier")
    p.add_argument("--dataset", required=True)
    p.add_argument("--learner", choices=LEARNERS, default="oct")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split-seed", type=int, default=1)
    p.add_argument("--val-fraction", type=float, default=VAL_FRACTION)
    p.add_argument("--restarts", type=int, default=None, help="tree restarts (default 10)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="score a model on fresh samples")
    p.add_argument("--model", required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=1_000_003)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--eps-inf", type=float, default=1e-3)
    p.add_argument("--eps-sub", type=float, default=1e-3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("render", parents=[common], help="print a tree model")
    p.add_argument("--model", required=True)
    p.add_argument("--format", choices=("text", "dot"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("bench", parents=[common], help="run benchmark pipelines")
    p.add_argument("--example", choices=("inventory", "knapsack", "supplier"),
                   help="reproduce one introductory example with OCT")
    p.add_argument("--families", nargs="*", default=["transportation", "portfolio", "facility",
                                                     "hybrid"],
                   metavar="FAMILY[:k=v,...]")
    p.add_argument("--learners", default="oct,oct-h,nn")
    p.add_argument("--problem-seed", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--out", help="text table (or report file with --example)")
    p.add_argument("--csv", help="comma-separated table")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("solve", parents=[common], help="predict a strategy and solve one instance")
    p.add_argument("--model", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--theta", help="parameter values, comma or space separated")
    g.add_argument("--theta-file", help="JSON list of parameter values")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--eps-inf", type=float, default=1e-3)
    p.add_argument("--no-check", dest="check", action="store_false",
                   help="skip the full solve used to report suboptimality")
    p.set_defaults(func=cmd_solve)
    return ap


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None) is not None and args.threads >= 1:
        os.environ["OPTSTRAT_THREADS"] = str(args.threads)
    try:
        return args.func(args)
    except (UsageError, ArtifactError, SpecError, ProblemError, FileNotFoundError) as exc:
        print(f"optstrat {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ExplorationError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"optstrat {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except KeyboardInterrupt:
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
