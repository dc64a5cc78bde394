import numpy as np
import pytest

from helpers import milp_by_enumeration, random_milp
from hscop.milp import MILPConfig, ModelBuilder, read_lp_format, solve_milp, write_lp_format


def test_no_binaries_is_one_lp():
    b = ModelBuilder()
    x = b.add_var("x", 0.0, 2.0, obj=1.0)
    b.add_row([x], [1.0], "<=", 1.0)
    sol = solve_milp(b.build())
    assert sol.status == "Optimal"
    assert sol.objective == pytest.approx(1.0)
    assert sol.stats["nodes"] <= 1


def test_single_binary_picks_one():
    b = ModelBuilder()
    x = b.add_var("x", -1.0, 1.0)
    z = b.add_var("z", 0, 1, obj=1.0, binary=True)
    b.add_row([x, z], [1.0, -10.0], ">=", -10.0)  # x >= -10 (1 - z)
    sol = solve_milp(b.build())
    assert sol.status == "Optimal"
    assert list(sol.z) == [1] and sol.objective == pytest.approx(1.0)


def test_infeasible_model():
    b = ModelBuilder()
    z = b.add_vars("z", 2, 0, 1, binary=True)
    b.add_row(z, [1.0, 1.0], "==", 1.5)
    assert solve_milp(b.build()).status == "Infeasible"


def test_random_against_enumeration():
    rng = np.random.default_rng(31)
    n_feas = 0
    for _ in range(100):
        model, nb = random_milp(rng, n_bin=int(rng.integers(1, 7)))
        want = milp_by_enumeration(model, nb)
        sol = solve_milp(model, MILPConfig(gap_tol=1e-9))
        if want == -np.inf:
            assert sol.status == "Infeasible"
            continue
        n_feas += 1
        assert sol.status == "Optimal"
        assert sol.objective == pytest.approx(want, abs=1e-6)
        assert model.is_feasible(sol.values, tol=1e-6)
    assert n_feas > 40


def test_incumbent_is_kept():
    rng = np.random.default_rng(4)
    model, nb = random_milp(rng, n_bin=5, n_cont=0, m=2)
    sol = solve_milp(model)
    inc = sol.values.copy()
    again = solve_milp(model, MILPConfig(node_limit=1), incumbent=inc)
    assert again.objective >= model.objective(inc) - 1e-12


def test_node_limit_status():
    rng = np.random.default_rng(12)
    for _ in range(30):
        model, _ = random_milp(rng, n_bin=6, n_cont=2, m=4)
        sol = solve_milp(model, MILPConfig(node_limit=1))
        assert sol.status in ("Optimal", "Infeasible", "NodeLimit")


def test_lp_text_roundtrip():
    rng = np.random.default_rng(5)
    for _ in range(20):
        model, _ = random_milp(rng)
        model.const = float(rng.uniform(-1, 1))
        back = read_lp_format(write_lp_format(model))
        assert np.array_equal(back.binary, model.binary)
        np.testing.assert_allclose(back.c, model.c)
        np.testing.assert_allclose(back.A, model.A)
        np.testing.assert_allclose(back.rhs, model.rhs)
        assert back.const == model.const
        assert solve_milp(back).objective == pytest.approx(solve_milp(model).objective, abs=1e-9)


def test_highs_backend_agrees():
    pytest.importorskip("highspy")
    rng = np.random.default_rng(77)
    for _ in range(40):
        model, _ = random_milp(rng, n_bin=5)
        a = solve_milp(model, MILPConfig(solver="bnb"))
        b = solve_milp(model, MILPConfig(solver="highs"))
        assert a.status == b.status
        if a.status == "Optimal":
            assert a.objective == pytest.approx(b.objective, abs=1e-6)


def test_bad_solver_name():
    with pytest.raises(ValueError):
        MILPConfig(solver="cplex")
