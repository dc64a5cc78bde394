import numpy as np
import pytest

from hscop.core_model import check_feasible, evaluate_objective
from hscop.instances import random_ahs, two_term_1d
from hscop.oracle import OracleBudgetError, enumerate_optimum
from hscop.reformulation import eps_problem


def test_two_term_1d():
    res = enumerate_optimum(two_term_1d())
    assert res.value == pytest.approx(1.0)
    assert tuple(res.pattern.bits) == (1, 0)
    assert 0.0 <= res.x[0] < 0.5


def test_dominates_samples():
    rng = np.random.default_rng(10)
    for seed in range(40):
        p = random_ahs(seed, n=2, n_terms=4, n_cons=1)
        res = enumerate_optimum(p)
        xs = rng.uniform(-1, 1, (400, 2))
        feas = [evaluate_objective(p, x) for x in xs if check_feasible(p, x)]
        if feas:
            assert res.feasible
            assert res.value >= max(feas) - 1e-9
        if res.feasible:
            assert check_feasible(p, res.x, tol=1e-7)


def test_eps_value_below_original():
    for seed in range(20):
        p = random_ahs(seed, n=2, n_terms=4)
        a = enumerate_optimum(p)
        b = enumerate_optimum(eps_problem(p, 0.05))
        if b.feasible:
            assert a.feasible and b.value <= a.value + 1e-9


def test_budget():
    p = random_ahs(0, n=2, n_terms=6, n_cons=1)
    with pytest.raises(OracleBudgetError):
        enumerate_optimum(p, limit_bits=3)
