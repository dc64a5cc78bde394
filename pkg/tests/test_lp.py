import numpy as np
import pytest

from helpers import random_lp
from hscop.lp import EQ, GE, INFEASIBLE, LE, OPTIMAL, LinearProgram, duality_check, solve_lp
from hscop.oracle import lp_vertex_optimum


def test_one_variable_bound_row():
    lp = LinearProgram([1.0], [[1.0]], [LE], [1.0], [0.0], [2.0])
    sol = solve_lp(lp, backend="simplex")
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(1.0)
    assert sol.x[0] == pytest.approx(1.0)
    assert duality_check(lp, sol)


def test_contradictory_rows():
    lp = LinearProgram([1.0], [[1.0], [1.0]], [LE, GE], [0.0, 1.0], [-5.0], [5.0])
    assert solve_lp(lp, backend="simplex").status == INFEASIBLE
    assert solve_lp(lp, backend="highs").status == INFEASIBLE


def test_crossed_bounds():
    lp = LinearProgram([1.0], np.zeros((0, 1)), [], [], [0.0], [1.0])
    assert solve_lp(lp, lb=[1.0], ub=[0.0]).status == INFEASIBLE


def test_no_rows():
    lp = LinearProgram([1.0, -2.0], np.zeros((0, 2)), [], [], [-1.0, -1.0], [3.0, 1.0], 0.5)
    sol = solve_lp(lp, backend="simplex")
    assert sol.objective == pytest.approx(3.0 + 2.0 + 0.5)


def test_rejects_infinite_bounds():
    with pytest.raises(ValueError):
        LinearProgram([1.0], [[1.0]], [LE], [1.0], [0.0], [np.inf])


def test_random_against_vertices():
    rng = np.random.default_rng(2024)
    seen = {OPTIMAL: 0, INFEASIBLE: 0}
    for _ in range(150):
        lp = random_lp(rng, eq=True)
        status, val, _ = lp_vertex_optimum(lp)
        sol = solve_lp(lp, backend="simplex")
        assert sol.status == status
        seen[status] += 1
        if status == OPTIMAL:
            assert sol.objective == pytest.approx(val, abs=1e-7 * (1 + abs(val)))
            assert lp.row_violation(sol.x).max(initial=0) <= 1e-7
            assert duality_check(lp, sol)
    assert seen[OPTIMAL] > 50 and seen[INFEASIBLE] > 0


def test_simplex_matches_highs():
    rng = np.random.default_rng(7)
    for _ in range(60):
        lp = random_lp(rng, n=6, m=6, eq=True)
        a, b = solve_lp(lp, backend="simplex"), solve_lp(lp, backend="highs")
        assert a.status == b.status
        if a.ok:
            assert a.objective == pytest.approx(b.objective, abs=1e-7)
            assert duality_check(lp, b)


def test_degenerate_vertex():
    # many rows through the optimum
    A = [[1, 1], [1, 2], [2, 1], [1, 0], [0, 1], [3, 3]]
    lp = LinearProgram([1.0, 1.0], A, [LE] * 6, [2, 3, 3, 1, 1, 6], [0.0, 0.0], [5.0, 5.0])
    sol = solve_lp(lp, backend="simplex")
    assert sol.objective == pytest.approx(2.0)
    assert duality_check(lp, sol)


def test_equality_duals_free_sign():
    lp = LinearProgram([-1.0, 0.0], [[1.0, 1.0]], [EQ], [1.0], [0.0, 0.0], [2.0, 2.0])
    sol = solve_lp(lp, backend="simplex")
    assert sol.objective == pytest.approx(0.0)
    assert duality_check(lp, sol)
