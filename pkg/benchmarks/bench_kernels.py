"""Time the numba kernels against the pure-numpy fallback.

Each path runs in its own interpreter because the switch is read at import
time::

    python benchmarks/bench_kernels.py            # both paths, summary table
    python benchmarks/bench_kernels.py --child    # current path only, JSON out

The child output also carries the computed results so the two paths can be
compared for agreement (see tests/test_accel.py).
"""

import argparse
import json
import os
import statistics
import subprocess
import sys
import time

import numpy as np

WORKLOADS = ("simplex", "active_set", "branch_and_bound", "tree")


def _timed(fn, repeats):
    fn()  # warm-up, includes compilation
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return out, statistics.median(times)


def _solve_many(family, sizes, count):
    from optstrat.bench import BenchmarkSpec, generate
    from optstrat.problem import canonicalize, sample_parameters
    from optstrat.solver import solve
    from optstrat.strategy import encode

    prob, space = generate(BenchmarkSpec(family, sizes, 0))
    insts = [canonicalize(prob, th) for th in sample_parameters(space, 3, count)]

    def run():
        out = []
        for inst in insts:
            res = solve(inst)
            s = encode(res, inst)
            out.append([inst.objective(res.x_star), list(s.tight_rows), list(s.integer_values)])
        return out

    return run


def _tree_job(mode):
    from optstrat.bench import BenchmarkSpec, generate
    from optstrat.explorer import ExplorationConfig, explore
    from optstrat.learners import make_dataset
    from optstrat.learners.tree import train_oct, tree_to_dict

    prob, space = generate(BenchmarkSpec("inventory", {"T": 6}))
    res = explore(prob, space, ExplorationConfig(batch_size=400, mode="full-bound",
                                                 max_samples=400, seed=2), workers=1)
    data = make_dataset(res.thetas, res.labels, res.M, seed=1)

    def run():
        tree = train_oct(data, grid=[(4, 1)], mode=mode, restarts=2, seed=0)
        return tree_to_dict(tree)

    return run


def child(repeats):
    from optstrat._accel import NUMBA_ENABLED

    jobs = {
        "simplex": _solve_many("transportation", {"n": 5, "m": 5}, 40),
        "active_set": _solve_many("portfolio", {"n": 30, "p": 5}, 20),
        "branch_and_bound": _solve_many("knapsack", {}, 20),
        "tree": _tree_job("hyperplane"),
    }
    out = {"numba": NUMBA_ENABLED, "seconds": {}, "results": {}}
    for name, fn in jobs.items():
        res, t = _timed(fn, repeats)
        out["seconds"][name] = t
        out["results"][name] = res
    return out


def run_child(disable, repeats):
    env = dict(os.environ)
    env.pop("OPTSTRAT_DISABLE_NUMBA", None)
    if disable:
        env["OPTSTRAT_DISABLE_NUMBA"] = "1"
    proc = subprocess.run([sys.executable, os.path.abspath(__file__), "--child",
                           "--repeats", str(repeats)],
                          capture_output=True, text=True, env=env, check=True)
    return json.loads(proc.stdout)


def compare(a, b, tol=1e-9):
    """Names of workloads whose results differ between two child runs."""
    bad = []
    for name in WORKLOADS[:3]:
        for (fa, ta, ia), (fb, tb, ib) in zip(a["results"][name], b["results"][name]):
            if abs(fa - fb) > tol * (1 + abs(fa)) or ta != tb or ia != ib:
                bad.append(name)
                break
    ta, tb = a["results"]["tree"], b["results"]["tree"]
    if ta["left"] != tb["left"] or ta["label"] != tb["label"] or not np.allclose(
            ta["A"], tb["A"], rtol=0, atol=1e-9) or not np.allclose(ta["B"], tb["B"], atol=1e-9):
        bad.append("tree")
    return bad


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)
    if args.child:
        json.dump(child(args.repeats), sys.stdout)
        return 0
    fast = run_child(False, args.repeats)
    slow = run_child(True, args.repeats)
    print(f"{'workload':<18}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for name in WORKLOADS:
        a, b = fast["seconds"][name], slow["seconds"][name]
        print(f"{name:<18}{a:>12.4f}{b:>12.4f}{b / a:>10.1f}")
    bad = compare(fast, slow)
    print("results agree" if not bad else "results differ: " + ", ".join(bad))
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
