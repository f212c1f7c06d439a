import logging
import math

import numpy as np
import pytest

from optstrat.bench import (
    DEFAULT_SIZES, FAMILIES, BenchmarkSpec, PipelineSeeds, SpecError, desk_table, generate,
)
from optstrat.evaluate import TABLE_COLUMNS
from optstrat.explorer import ExplorationConfig, explore
from optstrat.problem import ROW_LOWER, canonicalize, sample_parameters

log = logging.getLogger(__name__)

# desired engine power profile, typed in independently of the package constant
PDES = [0.05, 0.30, 0.55, 0.80, 1.05, 1.30, 1.55, 1.80, 1.95, 1.70, 1.45, 1.20, 1.02,
        1.12, 1.22, 1.32, 1.42, 1.52, 1.62, 1.72, 1.73, 1.38, 1.03, 0.68, 0.33, -0.02,
        -0.37, -0.72, -0.94, -0.64, -0.34, -0.04, 0.18, 0.08, -0.02, -0.12,
        -0.22, -0.32, -0.42, -0.52]


def test_knapsack_cost_vector():
    prob, space = generate(BenchmarkSpec("knapsack"))
    inst = canonicalize(prob, np.full(20, 2.0))
    # max problem: the canonical cost is negated
    assert list(-inst.q[:10]) == [0.42, 0.72, 0.0, 0.3, 0.15, 0.09, 0.19, 0.35, 0.4, 0.54]
    assert inst.b[0] == 5.0
    with pytest.raises(SpecError):
        generate(BenchmarkSpec("knapsack", {"n": 12}))


def test_knapsack_ext_other_sizes():
    prob, space = generate(BenchmarkSpec("knapsack_ext", {"n": 6}, 3))
    inst = canonicalize(prob, sample_parameters(space, 0, 1)[0])
    assert prob.n == 6 and np.all((-inst.q[:6] >= 0) & (-inst.q[:6] <= 1))
    assert inst.b[0] == 3.0


@pytest.mark.parametrize("n,m", [(2, 3), (5, 5), (4, 1)])
def test_transportation_counts(n, m):
    prob, space = generate(BenchmarkSpec("transportation", {"n": n, "m": m}))
    inst = canonicalize(prob, sample_parameters(space, 0, 1)[0])
    assert inst.n_var == n * m
    assert inst.n_con == n + m + n * m


def test_hybrid_profile_full_horizon():
    prob, space = generate(BenchmarkSpec("hybrid", {"T": 40}))
    centre = space.blocks[1].center
    assert len(centre) == 40
    assert list(centre) == PDES
    _, short = generate(BenchmarkSpec("hybrid", {"T": 7}))
    assert list(short.blocks[1].center) == PDES[:7]
    with pytest.raises(SpecError):
        generate(BenchmarkSpec("hybrid", {"T": 41}))


@pytest.mark.parametrize("family", FAMILIES)
def test_generator_determinism(family):
    spec = BenchmarkSpec(family, seed=7)
    p1, s1 = generate(spec)
    p2, s2 = generate(BenchmarkSpec.from_dict(spec.to_dict()))
    assert s1.to_dict() == s2.to_dict()
    for theta in sample_parameters(s1, 0, 2):
        a, b = canonicalize(p1, theta), canonicalize(p2, theta)
        for name in ("P", "q", "A", "b"):
            assert np.array_equal(getattr(a, name), getattr(b, name))


def test_seed_changes_random_families():
    a, _ = generate(BenchmarkSpec("transportation", seed=0))
    b, _ = generate(BenchmarkSpec("transportation", seed=1))
    theta = np.full(5, 3.0)
    assert not np.array_equal(canonicalize(a, theta).q, canonicalize(b, theta).q)


@pytest.mark.parametrize("seed", range(5))
def test_portfolio_covariance_psd(seed):
    prob, space = generate(BenchmarkSpec("portfolio", seed=seed))
    inst = canonicalize(prob, sample_parameters(space, 0, 1)[0])
    assert np.linalg.eigvalsh(inst.P[:50, :50]).min() >= 0.0
    # F has roughly half its entries nonzero
    F_mask_density = np.count_nonzero(inst.P - np.diag(np.diag(inst.P))) / (50 * 49)
    assert F_mask_density > 0.5


@pytest.mark.parametrize("family", ["transportation", "facility"])
def test_feasible_over_support(family):
    prob, space = generate(BenchmarkSpec(family, {"n": 4, "m": 4}, 3))
    from optstrat.solver import OPTIMAL, solve

    for theta in sample_parameters(space, 1, 10):
        assert solve(canonicalize(prob, theta)).status == OPTIMAL


def test_spec_validation():
    with pytest.raises(SpecError):
        BenchmarkSpec("nope")
    with pytest.raises(SpecError):
        BenchmarkSpec("transportation", {"k": 3})
    with pytest.raises(SpecError):
        BenchmarkSpec("inventory", {"T": 0})
    assert BenchmarkSpec("portfolio").sizes == DEFAULT_SIZES["portfolio"]


def test_inventory_strategies_order_after_a_zero_prefix():
    T = DEFAULT_SIZES["inventory"]["T"]
    prob, space = generate(BenchmarkSpec("inventory"))
    res = explore(prob, space, ExplorationConfig(seed=0, batch_size=1000), workers=1)
    inst = canonicalize(prob, res.thetas[0])
    good = 0
    for s in res.catalog.strategies:
        zero = sorted(int(inst.row_ref[r]) for r in s.tight_rows
                      if inst.row_kind[r] == ROW_LOWER and inst.row_ref[r] < T)
        # the last order never pays off, so u_{T-1} = 0 is an end-of-horizon effect
        body = [t for t in zero if t != T - 1]
        if body == list(range(len(body))):
            good += 1
        else:
            log.warning("inventory strategy outside the prefix pattern: u=0 at %s", zero)
    assert good >= math.ceil(0.9 * res.M)


def test_seeds_from_base():
    s = PipelineSeeds.from_base(10)
    assert (s.explore, s.split, s.train, s.evaluate) == (10, 11, 12, 1_000_013)


def test_desk_table_empty_learners_is_header_only():
    rows, text, csv = desk_table([BenchmarkSpec("transportation")], [])
    assert rows == []
    assert len(text.splitlines()) == 2
    assert csv.splitlines() == [",".join(("family",) + TABLE_COLUMNS + ("error",))]


@pytest.mark.slow
def test_desk_table_rows_share_exploration():
    spec = BenchmarkSpec("transportation", {"n": 4, "m": 4}, 1)
    rows, text, csv = desk_table([spec], ["oct", "nn"], seed=0, workers=1, restarts=2)
    assert [r["learner"] for r in rows] == ["oct", "nn"]
    for r in rows:
        assert not r.get("error")
        assert r["n"] == 4 and r["m"] == 4 and r["n_var"] == 16 and r["n_con"] == 24
        for key in ("acc [%]", "t_ratio", "p_max", "d_max"):
            assert isinstance(r[key], float) and math.isfinite(r[key])
    assert rows[0]["N"] == rows[1]["N"] and rows[0]["|S|"] == rows[1]["|S|"]
    assert rows[0]["GT"] == rows[1]["GT"]
    assert len(csv.splitlines()) == 3


def test_desk_table_records_failures():
    spec = BenchmarkSpec("transportation", {"n": 2, "m": 2})
    rows, _, _ = desk_table([spec], ["bogus"], workers=1)
    assert len(rows) == 1 and "bogus" in rows[0]["error"]
