import math

import numpy as np
import pytest

from hscop.core_model import AHSProblem, Box, HeavisideExpression
from hscop.idsa import bootstrap_feasible
from hscop.instances import random_ahs
from hscop.ipbuild import FREE, ONE, WARM_TOL, ZERO, HeavisideSubproblem, IndexPartition
from hscop.milp import solve_milp
from hscop.oracle import enumerate_optimum
from hscop.pip import PIPConfig, partition_from_incumbent, pip_solve, quantile_threshold
from hscop.reformulation import eps_problem


def test_quantile_examples():
    assert quantile_threshold([0.1, 0.5, 2.0, 3.0], 0.5) == 0.5
    assert quantile_threshold([], 0.5) == math.inf
    assert quantile_threshold([3.0, 1.0, 2.0], 1.0) == 3.0
    assert quantile_threshold([1.0, 2.0], 0.0) == -math.inf
    assert quantile_threshold([-0.1, -0.5, -2.0, -3.0], 0.5, "upper") == -0.5
    with pytest.raises(ValueError):
        quantile_threshold([1.0], 1.5)


class _Stub:
    """Minimal subproblem exposing only what the partitioner reads."""

    def __init__(self, vals, signs=None, blocks=None):
        self.vals = np.asarray(vals, float)
        self.n_terms = len(vals)
        self.signs = np.ones(self.n_terms, int) if signs is None else np.asarray(signs)
        self.blocks_of = np.zeros(self.n_terms, int) if blocks is None else np.asarray(blocks)

    def term_values(self, x):
        return self.vals


def test_partition_r_one_all_free():
    part = partition_from_incumbent(_Stub([0.3, 1.0, 2.0, -0.5, -1.0]), None, 1.0)
    assert (part.states == FREE).all()


def test_partition_equal_values_all_free():
    part = partition_from_incumbent(_Stub([0.7] * 6), None, 0.5)
    assert (part.states == FREE).all()


def test_partition_fixes_beyond_threshold():
    part = partition_from_incumbent(_Stub([0.1, 0.5, 2.0, 3.0, -0.2, -4.0]), None, 0.5)
    assert list(part.states) == [FREE, FREE, ONE, ONE, FREE, ZERO]


def test_partition_random_cover():
    rng = np.random.default_rng(0)
    for seed in range(20):
        sub = HeavisideSubproblem(eps_problem(random_ahs(seed, n=2, n_terms=6), 0.01))
        x = rng.uniform(-1, 1, 2)
        part = partition_from_incumbent(sub, x, float(rng.uniform(0.1, 1)), rng)
        assert len(part.states) == sub.n_terms
        assert set(np.unique(part.states)) <= {FREE, ONE, ZERO}
        vals = sub.term_values(x)
        assert (vals[part.states == ONE] >= 0).all()
        assert (vals[part.states == ZERO] < 0).all()


def test_ties_use_seeded_rng():
    a = partition_from_incumbent(_Stub([0.0] * 8 + [1.0, 2.0]), None, 0.3, np.random.default_rng(5))
    b = partition_from_incumbent(_Stub([0.0] * 8 + [1.0, 2.0]), None, 0.3, np.random.default_rng(5))
    assert list(a.states) == list(b.states)


def test_no_terms_one_lp():
    p = AHSProblem(HeavisideExpression([1.0, -1.0], 0.0, []), [], Box([-1.0, -1.0], [1.0, 1.0]))
    res = pip_solve(HeavisideSubproblem(eps_problem(p, 0.01)), np.zeros(2))
    assert res.objective == pytest.approx(2.0)
    np.testing.assert_allclose(res.x, [1.0, -1.0])


def _start(p, eps):
    return bootstrap_feasible(p, eps)


def test_sandwich_and_monotone():
    n_done = 0
    for seed in range(30):
        p = eps_problem(random_ahs(seed, n=2, n_terms=6, n_cons=1), 0.01)
        sub = HeavisideSubproblem(p)
        full = enumerate_optimum(p)
        if not full.feasible:
            continue
        try:
            x0 = _start(random_ahs(seed, n=2, n_terms=6, n_cons=1), 0.01)
        except Exception:
            continue
        if not sub.feasible(x0):
            continue
        res = pip_solve(sub, x0, PIPConfig(seed=seed))
        assert res.trace.is_monotone(1e-9)
        assert sub.objective(x0) - 1e-9 <= res.objective <= full.value + 1e-6
        assert res.iterations <= PIPConfig().mu_max
        assert sub.feasible(res.x)
        n_done += 1
    assert n_done >= 10


def test_stops_at_optimum():
    p = eps_problem(random_ahs(3, n=2, n_terms=5, n_cons=0), 0.01)
    sub = HeavisideSubproblem(p)
    ip = sub.build()
    x_opt = ip.extract(solve_milp(ip.model).values)
    cfg = PIPConfig(mu_tilde_max=2)
    res = pip_solve(sub, x_opt, cfg)
    assert res.objective == pytest.approx(sub.objective(x_opt), abs=1e-9)
    assert res.stop_reason != "mu_max"


def test_reproducible_trace():
    p = eps_problem(random_ahs(9, n=2, n_terms=6, n_cons=0), 0.01)
    sub = HeavisideSubproblem(p)
    a = pip_solve(sub, np.zeros(2), PIPConfig(seed=1)).trace.to_jsonl()
    b = pip_solve(sub, np.zeros(2), PIPConfig(seed=1)).trace.to_jsonl()
    assert a == b


def test_config_validation():
    with pytest.raises(ValueError):
        PIPConfig(r0=0.9, r_max=0.5)
    with pytest.raises(ValueError):
        PIPConfig(r_delta=0)


def test_ties_never_fixed_against_incumbent():
    vals = [-1e-16, 6e-17, 0.0, -3e-12, 0.4, -0.3, -0.9]
    for seed in range(50):
        part = partition_from_incumbent(_Stub(vals, signs=[-1] * 7), None, 0.5, np.random.default_rng(seed))
        on = np.asarray(vals) >= -WARM_TOL
        assert not (part.states[:4] == ZERO).any()
        assert not ((part.states == ZERO) & on).any() and not ((part.states == ONE) & ~on).any()
