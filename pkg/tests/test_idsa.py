import copy

import numpy as np
import pytest

from hscop.core_model import (
    AHSProblem,
    Box,
    HeavisideExpression,
    HeavisideTerm,
    PAFunction,
    check_feasible,
    evaluate_objective,
)
from hscop.idsa import (
    IDSAConfig,
    InfeasibleStartError,
    RunTrace,
    as_adapter,
    bootstrap_feasible,
    idsa_run,
    verify_run,
)
from hscop.instances import random_ahs, two_term_1d
from hscop.oracle import enumerate_optimum

BOX1 = Box([-1.0], [1.0])
X = PAFunction.affine([1.0])


def _no_terms():
    return AHSProblem(HeavisideExpression([1.0, -0.5], 0.0, []), [], Box([-1.0, 0.0], [1.0, 2.0]))


def test_unconstrained_bootstrap_is_center():
    np.testing.assert_allclose(bootstrap_feasible(_no_terms()), [0.0, 1.0])


def test_bootstrap_single_constraint():
    cons = HeavisideExpression([0.0], -1.0, [HeavisideTerm(1.0, X)])
    p = AHSProblem(HeavisideExpression([0.0], 0.0, []), [cons], BOX1)
    x = bootstrap_feasible(p, 0.01, x_start=[-1.0])
    assert x[0] >= 0 and check_feasible(p, x)


def test_bootstrap_infeasible_residual():
    cons = HeavisideExpression([0.0], -2.0, [HeavisideTerm(1.0, X)])
    p = AHSProblem(HeavisideExpression([0.0], 0.0, []), [cons], BOX1)
    with pytest.raises(InfeasibleStartError) as info:
        bootstrap_feasible(p, 0.01)
    assert info.value.residual == pytest.approx(1.0, abs=1e-6)


def test_no_terms_converges_at_once():
    x, tr = idsa_run(_no_terms(), IDSAConfig(rho=0.0))
    np.testing.assert_allclose(x, [1.0, 0.0])
    assert len(tr.records) <= 2
    assert verify_run(tr, _no_terms()).passed


def test_two_term_example():
    p = two_term_1d()
    x, tr = idsa_run(p, IDSAConfig(), x0=[-1.0])
    assert evaluate_objective(p, x) == 1.0
    assert x[0] - 0.5 < 0
    rep = verify_run(tr, p)
    assert rep.passed, rep.summary()
    assert rep.checks["e"].passed


def test_negative_control_decrease():
    p = two_term_1d()
    _, tr = idsa_run(p, IDSAConfig(), x0=[-1.0])
    bad = copy.deepcopy(tr)
    bad.records.append(dict(bad.records[-1], nu=len(bad.records), theta=bad.records[-1]["theta_next"] - 1.0))
    bad.records[-1]["theta_next"] = bad.records[-1]["theta"]
    rep = verify_run(bad, p)
    assert not rep.checks["a"].passed
    assert rep.checks["a"].where == len(bad.records) - 1


def test_trace_jsonl_roundtrip():
    _, tr = idsa_run(two_term_1d(), IDSAConfig(), x0=[-1.0])
    back = RunTrace.from_jsonl(tr.to_jsonl())
    assert back.to_jsonl() == tr.to_jsonl()
    assert back.thetas() == tr.thetas()


def test_random_runs_verify():
    for seed in range(12):
        p = random_ahs(seed, n=2, n_terms=4, n_cons=1)
        try:
            x0 = bootstrap_feasible(p)
        except InfeasibleStartError:
            continue
        # the iterate tracks a boundary that moves with eps, so steps only
        # vanish once eps stops shrinking: two extra passes at the last eps
        x, tr = idsa_run(p, IDSAConfig(nu_max=6), x0)
        rep = verify_run(tr, p)
        assert rep.passed, rep.summary()
        ad = as_adapter(p)
        for r in tr.records:
            assert r["theta"] <= ad.objective_bound(r["x"]) + 1e-9
        opt = enumerate_optimum(p)
        assert evaluate_objective(p, x) <= opt.value + 1e-9


def test_all_dominates_single():
    for seed in range(10):
        p = random_ahs(seed, n=2, n_terms=4, n_cons=1, max_pieces=3)
        try:
            x0 = bootstrap_feasible(p)
        except InfeasibleStartError:
            continue
        xa, _ = idsa_run(p, IDSAConfig(selection_mode="all", delta=0.1), x0)
        xs, _ = idsa_run(p, IDSAConfig(selection_mode="single", delta=0.1), x0)
        assert evaluate_objective(p, xa) >= evaluate_objective(p, xs) - 1e-9, seed


def test_score_40_feasible():
    from hscop.classification import ScoreAdapter, build_score_problem, synthetic_blobs

    d = synthetic_blobs(40, 2, 2, seed=0, spread=0.8)
    prob = build_score_problem(d, {1: 0.7}, tau=10.0)
    ad = ScoreAdapter(prob, d)
    x, tr = idsa_run(ad, IDSAConfig())
    assert ad.feasible_original(x)


def test_config_validation():
    with pytest.raises(ValueError):
        IDSAConfig(eps_schedule=(1e-3, 1e-2))
    with pytest.raises(ValueError):
        IDSAConfig(lam=0)
    assert IDSAConfig(eps_schedule=(0.1,), nu_max=3).eps_at(2) == 0.1
