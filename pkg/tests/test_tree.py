import itertools

import numpy as np
import pytest

from hscop.classification import Dataset, TreeAdapter, TreeModel, predict_tree, synthetic_blobs
from hscop.classification.tree import (
    TreeLayout,
    build_tree_problem,
    core_binary_counts,
    fixed_label_problem,
    routing_consistent,
    tree_feasible_original,
    tree_margin_objective,
    tree_warm_start,
)
from hscop.idsa import IDSAConfig, idsa_run
from hscop.milp import MILPConfig, solve_milp
from hscop.oracle import enumerate_optimum


def test_binary_counts():
    d = synthetic_blobs(10, 3, 2, seed=0)
    c = core_binary_counts(build_tree_problem(d, 2, precisions={0: 0.5}))
    assert c["xi"] == 40
    assert c["zp"] + c["zm"] == 80
    assert c["c"] == 12
    assert c["xi"] + c["zp"] + c["zm"] + c["c"] == (3 * 10 + 3) * 4


def test_l0_indicators():
    # the l0 row is only active for p > 5
    d = synthetic_blobs(10, 2, 3, seed=0)
    assert core_binary_counts(build_tree_problem(d, 1, tau0=1))["l0"] == 0
    d = synthetic_blobs(10, 2, 6, seed=0)
    assert core_binary_counts(build_tree_problem(d, 1, tau0=2))["l0"] == 6


def test_routing():
    m = TreeModel(np.array([[1.0, 0.0]]), np.array([0.0]), np.array([0, 1]), 1)
    # a.x - b >= 0 goes right
    assert list(m.route([[1.0, 0.0], [-1.0, 0.0], [0.0, 5.0]])) == [1, 0, 1]
    assert list(predict_tree(m, [[1.0, 0.0], [-1.0, 0.0]])) == [1, 0]


def test_tiny_optimum_and_one_hot():
    d = Dataset.from_arrays([[-1.0, 0.0], [1.0, 0.0]], [0, 1])
    ip = build_tree_problem(d, 1)
    sol = solve_milp(ip.model, MILPConfig(gap_tol=1e-9))
    assert sol.status == "Optimal"
    assert sol.objective == pytest.approx(1.0)  # L-sum 2 over N = 2
    x = ip.extract(sol.values)
    _, _, c = TreeLayout(2, 1, 2).split(x)
    assert (c.sum(axis=0) == 1).all()
    assert routing_consistent(ip, sol.values)[0]
    assert tree_margin_objective(ip.sub.lay.decode(x), d) == 1.0


def _oracle_best(d, depth, eps):
    T = 2 ** depth
    best = -np.inf
    for labels in itertools.product(range(d.J), repeat=T):
        res = enumerate_optimum(fixed_label_problem(d, depth, labels, eps), limit_bits=20)
        if res.feasible:
            best = max(best, res.value)
    return best


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_full_ip_matches_oracle(seed):
    d = synthetic_blobs(3, 2, 1, seed=seed, spread=1.0)
    eps = 1e-3
    ip = build_tree_problem(d, 1, eps=eps)
    sol = solve_milp(ip.model, MILPConfig(gap_tol=1e-9))
    assert sol.objective == pytest.approx(_oracle_best(d, 1, eps), abs=1e-6)
    assert routing_consistent(ip, sol.values)[0]


def test_warm_start_feasible_for_ip():
    d = synthetic_blobs(20, 2, 2, seed=3, spread=0.8)
    x = tree_warm_start(d, 2)
    ip = build_tree_problem(d, 2, precisions={1: 0.6})
    v = ip.warm_start(x)
    assert v is not None and ip.model.is_feasible(v, tol=1e-7)


def test_routing_consistency_detects_tamper():
    d = synthetic_blobs(12, 2, 2, seed=4, spread=0.8)
    ip = build_tree_problem(d, 2)
    v = ip.warm_start(tree_warm_start(d, 2))
    assert routing_consistent(ip, v)[0]
    s, t = 0, int(ip.sub.lay.decode(ip.extract(v)).route(d.X)[0])
    flipped = v.copy()
    other = (t + 1) % 4
    k = ip.var[next(iter(ip.var))][s, other]
    if k >= 0:
        flipped[k] = 1.0
        ok, bad = routing_consistent(ip, flipped)
        assert not ok and bad


def test_idsa_tree_run():
    d = synthetic_blobs(20, 2, 2, seed=5, spread=0.8)
    ad = TreeAdapter(d, 2, {1: 0.7})
    x, tr = idsa_run(ad, IDSAConfig(), ad.default_start())
    m = ad.lay.decode(x)
    assert tree_feasible_original(m, d, {1: 0.7})
    assert tr.thetas() == sorted(tr.thetas())
