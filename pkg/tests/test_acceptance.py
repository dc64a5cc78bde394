"""Acceptance criteria 1-9.  Each test prints one PASS/FAIL line."""
import subprocess
import sys
import time

import numpy as np
import pytest

from helpers import random_lp
from hscop.core_model import check_feasible, eval_pa, evaluate_objective
from hscop.idsa import IDSAConfig, InfeasibleStartError, bootstrap_feasible, idsa_run, verify_run
from hscop.instances import random_ahs, random_pa
from hscop.ipbuild import HeavisideSubproblem
from hscop.lp import OPTIMAL, duality_check, solve_lp
from hscop.milp import MILPConfig, solve_milp
from hscop.oracle import enumerate_optimum, lp_vertex_optimum
from hscop.pip import PIPConfig, pip_solve
from hscop.reformulation import eps_problem, surrogates


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    return emit


def test_c1_oracle_equivalence(report):
    t0 = time.perf_counter()
    n_inst, worst, mismatches = 0, 0.0, []
    for seed in range(120):
        rng = np.random.default_rng(seed)
        p = random_ahs(seed, n=int(rng.integers(1, 4)), n_terms=int(rng.integers(2, 5)),
                       n_cons=int(rng.integers(0, 2)), max_pieces=int(rng.integers(1, 3)))
        e = eps_problem(p, 1e-2)
        if sum(1 for _ in e.iter_terms()) > 6:
            continue
        n_inst += 1
        want = enumerate_optimum(e)
        sol = solve_milp(HeavisideSubproblem(e).build().model, MILPConfig(gap_tol=1e-9))
        if not want.feasible:
            if sol.status != "Infeasible":
                mismatches.append(seed)
            continue
        err = abs(sol.objective - want.value) / max(1.0, abs(want.value))
        worst = max(worst, err)
        if sol.status != "Optimal" or err > 1e-6:
            mismatches.append(seed)
    dt = time.perf_counter() - t0
    ok = n_inst >= 100 and not mismatches and dt < 120
    report(1, ok, f"{n_inst} instances, worst rel err {worst:.2e}, mismatches {mismatches}, {dt:.1f}s")
    assert ok


def test_c2_approximation_chain(report):
    eps_grid = np.geomspace(1e-4, 0.3, 12)
    bad, total = 0, 0
    for seed in range(20):
        p = random_ahs(1000 + seed, n=2, n_terms=5, n_cons=1, max_pieces=2)
        probs = [eps_problem(p, e) for e in eps_grid]
        rng = np.random.default_rng(seed)
        for _ in range(1000):
            i, j = sorted(rng.choice(len(eps_grid), 2, replace=False))
            x = rng.uniform(-1, 1, 2)
            lo, hi = probs[i], probs[j]  # eps_i < eps_j
            total += 1
            if not evaluate_objective(p, x) >= lo.theta(x) >= hi.theta(x):
                bad += 1
            if hi.feasible(x) and not lo.feasible(x):
                bad += 1
            if lo.feasible(x) and not check_feasible(p, x):
                bad += 1
    report(2, bad == 0, f"{total} samples over 20 instances, {bad} violations")
    assert bad == 0


def test_c3_surrogate_sandwich(report):
    rng = np.random.default_rng(3)
    bad = 0
    n = 10_000
    for _ in range(n):
        dim = int(rng.integers(1, 4))
        f = random_pa(rng, dim, int(rng.integers(1, 4)), int(rng.integers(1, 4)))
        k, l = int(rng.integers(f.K)), int(rng.integers(f.L))
        plus, minus = surrogates(f, k, l)
        x = rng.uniform(-3, 3, dim)
        if not eval_pa(minus, x) >= eval_pa(f, x) >= eval_pa(plus, x):
            bad += 1
    report(3, bad == 0, f"{n} evaluations, {bad} violations")
    assert bad == 0


def test_c4_pip(report):
    done, bad, seed, sandwiched = 0, [], 0, 0
    while done < 50 and seed < 500:
        seed += 1
        p = random_ahs(2000 + seed, n=2, n_terms=7, n_cons=1, max_pieces=2)
        e = eps_problem(p, 1e-2)
        sub = HeavisideSubproblem(e)
        try:
            x0 = bootstrap_feasible(p, 1e-2)
        except InfeasibleStartError:
            continue
        if not sub.feasible(x0):
            continue
        res = pip_solve(sub, x0, PIPConfig(seed=seed))
        done += 1
        ok = res.trace.is_monotone(1e-9) and res.iterations <= 10
        opt = enumerate_optimum(e)
        if opt.feasible:
            sandwiched += 1
            ok = ok and sub.objective(x0) - 1e-9 <= res.objective <= opt.value + 1e-6
        if not ok:
            bad.append(seed)
    ok = done >= 50 and not bad
    report(4, ok, f"{done} instances ({sandwiched} oracle sandwiches), failures {bad}")
    assert ok


def test_c5_idsa_properties(report):
    # two extra passes at the last eps let the step criterion fire, see (c)
    cfg = IDSAConfig(nu_max=len(IDSAConfig().eps_schedule) + 2)
    done, bad, seed = 0, [], 0
    while done < 20 and seed < 200:
        seed += 1
        p = random_ahs(3000 + seed, n=2, n_terms=5, n_cons=1, max_pieces=2)
        try:
            x0 = bootstrap_feasible(p)
        except InfeasibleStartError:
            continue
        x, tr = idsa_run(p, cfg, x0)
        rep = verify_run(tr, p)
        done += 1
        if not (rep.passed and check_feasible(p, x, tol=0.0)):
            bad.append((seed, rep.summary()))
    ok = done >= 20 and not bad
    report(5, ok, f"{done} runs, failures {bad}")
    assert ok


def test_c6_score_experiment(report):
    from hscop.classification.data import metrics, synthetic_blobs
    from hscop.classification.pareto import TrainConfig, predict, train

    d = synthetic_blobs(60, 3, 2, seed=0, spread=0.8)
    beta = 0.85
    out = {}
    for method, limit in (("idsa-pip", 5.0), ("full-mip", 120.0)):
        mc = MILPConfig(time_limit=limit)
        cfg = TrainConfig(model="score", method=method, idsa=IDSAConfig(milp=mc, pip=PIPConfig(milp=mc)))
        t = time.perf_counter()
        r = train(d, {1: beta}, cfg)
        m = metrics(predict(r.model, d.X), d.y, 3)
        out[method] = (r, m, time.perf_counter() - t)
    (ri, mi, ti), (rf, mf, tf) = out["idsa-pip"], out["full-mip"]
    prec = mi.precision[1]
    checks = {
        "acc>=0.95": mi.accuracy >= 0.95,
        "precision": ri.feasible and prec is not None and prec >= beta,
        "obj within 2%": ri.objective >= 0.98 * rf.objective,
        "time ratio<=0.6": ti <= 0.6 * tf,
        "budget<10min": ti + tf < 600,
    }
    ok = all(checks.values())
    report(6, ok, f"idsa obj {ri.objective:.4f} acc {mi.accuracy:.3f} prec {prec} {ti:.1f}s; "
                  f"full-mip obj {rf.objective:.4f} ({rf.status}) {tf:.1f}s; ratio {ti / tf:.2f}; "
                  f"failed {[k for k, v in checks.items() if not v]}")
    assert ok


def test_c7_tree_experiment(report):
    from hscop.classification.data import synthetic_blobs
    from hscop.classification.pareto import TrainConfig, train
    from hscop.classification.tree import build_tree_problem, routing_consistent, tree_warm_start

    d = synthetic_blobs(40, 2, 2, seed=0, spread=1.3)
    pre = {1: 0.8}
    ip = build_tree_problem(d, 2, precisions=pre)
    # feasibility certificate for the full IP: a vector checked row by row
    cert = ip.warm_start(tree_warm_start(d, 2))
    ip_feasible = cert is not None and ip.model.is_feasible(cert, tol=1e-7)
    r = train(d, pre, TrainConfig(model="tree", method="idsa-pip"))
    v = ip.warm_start(r.x)
    vec_ok = v is not None and ip.model.is_feasible(v, tol=1e-7)
    route_idsa = vec_ok and routing_consistent(ip, v)[0]
    sol = solve_milp(ip.model, MILPConfig(time_limit=30.0), incumbent=cert)
    route_full = sol.has_solution and routing_consistent(ip, sol.values)[0]
    ok = ip_feasible and r.feasible and route_idsa and route_full
    report(7, ok, f"IP feasible {ip_feasible}; idsa feasible {r.feasible} obj {r.objective:.3f} "
                  f"routing {route_idsa}; full-mip {sol.status} obj {sol.objective:.3f} routing {route_full}")
    assert ok


def _cli(out, *args):
    cmd = [sys.executable, "-m", "hscop", *args, "--no-timing", "--out", str(out)]
    return subprocess.run(cmd, capture_output=True, text=True, timeout=600)


def test_c8_determinism(report, tmp_path):
    jobs = {
        "solve": (["solve", "--method", "idsa-pip", "--seed", "7"], ["trace.jsonl", "solution.json", "metrics.csv"]),
        "pareto": (["pareto", "--synthetic", "24,2,2", "--spread", "0.6", "--beta", "0.6,0.8", "--folds", "2",
                    "--seed", "3"], ["pareto_all.csv", "pareto.csv", "pareto.tsv"]),
    }
    diffs = []
    for name, (args, files) in jobs.items():
        runs = []
        for k in range(2):
            out = tmp_path / f"{name}{k}"
            res = _cli(out, *args)
            assert res.returncode in (0, 2), res.stderr
            runs.append({f: (out / f).read_bytes() for f in files})
        diffs += [f"{name}/{f}" for f in files if runs[0][f] != runs[1][f]]
    report(8, not diffs, f"differing files: {diffs}")
    assert not diffs


def test_c9_lp_engine(report):
    rng = np.random.default_rng(99)
    bad, n_opt = [], 0
    for i in range(200):
        lp = random_lp(rng, n=int(rng.integers(1, 7)), m=int(rng.integers(0, 7)), eq=True)
        status, val, _ = lp_vertex_optimum(lp)
        sol = solve_lp(lp, backend="simplex")
        if sol.status != status:
            bad.append(i)
            continue
        if status == OPTIMAL:
            n_opt += 1
            if abs(sol.objective - val) > 1e-6 * max(1.0, abs(val)) or not duality_check(lp, sol):
                bad.append(i)
    report(9, not bad, f"200 LPs ({n_opt} optimal), failures {bad}")
    assert not bad
