"""Outer loops: shrinking epsilon with decomposed, proximal subproblems.

Each outer step builds subproblems at the current iterate for the current
epsilon (one per piece selection, or a single undecomposed one), solves
them with the full integer program or with progressive fixing, and moves
to the best result.  A step is only accepted if it satisfies the descent
inequality under exact evaluation; otherwise the iterate stays put.

The loop talks to the problem through an adapter so the tree model can
reuse it; :class:`AHSAdapter` covers problems given as expressions.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core_model import AHSProblem, HeavisideTerm, check_feasible, evaluate_objective, zero_index_sets
from .ipbuild import HeavisideSubproblem
from .milp import MILPConfig, solve_milp
from .pip import PIPConfig, PIPError, pip_solve
from .reformulation import (
    build_decomposed,
    count_selections,
    enumerate_selections,
    eps_problem,
)

log = logging.getLogger(__name__)

DEFAULT_EPS = (1e-2, 1e-3, 1e-4, 1e-5)


class InfeasibleStartError(RuntimeError):
    """No point with zero residual was found at the first epsilon."""

    def __init__(self, residual: float, x=None):
        super().__init__(f"no feasible point for the first approximation (residual {residual:.6g})")
        self.residual = residual
        self.x = x


@dataclass
class IDSAConfig:
    eps_schedule: tuple = DEFAULT_EPS
    rho: float = 1e-3
    delta: float = 0.0
    lam: float = 1e4
    nu_max: int | None = None
    step_tol: float = 1e-6
    selection_mode: str = "single"
    inner: str = "pip"
    decompose: bool = True
    segments: int = 8
    selection_cap: int = 64
    full_ip_max_terms: int = 40
    pip: PIPConfig = field(default_factory=PIPConfig)
    milp: MILPConfig = field(default_factory=MILPConfig)

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_schedule)
        if not eps or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps_schedule must be positive and strictly decreasing")
        self.eps_schedule = eps
        if self.lam <= 0 or self.rho < 0:
            raise ValueError("need lam > 0 and rho >= 0")
        if self.selection_mode not in ("all", "single"):
            raise ValueError("selection_mode must be 'all' or 'single'")
        if self.inner not in ("pip", "full"):
            raise ValueError("inner must be 'pip' or 'full'")
        if self.nu_max is None:
            self.nu_max = len(eps)

    def eps_at(self, nu: int) -> float:
        return self.eps_schedule[min(nu, len(self.eps_schedule) - 1)]


@dataclass
class RunTrace:
    records: list = field(default_factory=list)
    start: list | None = None
    final: list | None = None
    config: dict = field(default_factory=dict)

    def thetas(self) -> list:
        return [r["theta"] for r in self.records]

    def to_jsonl(self) -> str:
        head = {"kind": "start", "x": self.start, "config": self.config}
        lines = [json.dumps(head, sort_keys=True)]
        lines += [json.dumps({"kind": "iter", **r}, sort_keys=True) for r in self.records]
        lines.append(json.dumps({"kind": "final", "x": self.final}, sort_keys=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "RunTrace":
        tr = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            d = json.loads(line)
            kind = d.pop("kind")
            if kind == "start":
                tr.start, tr.config = d["x"], d.get("config", {})
            elif kind == "final":
                tr.final = d["x"]
            else:
                tr.records.append(d)
        return tr


# --------------------------------------------------------------- adapter


class AHSAdapter:
    """Connects the outer loop to an expression-based problem."""

    def __init__(self, problem: AHSProblem):
        self.problem = problem
        self._eps_cache = {}

    @property
    def n(self) -> int:
        return self.problem.n

    def default_start(self) -> np.ndarray:
        return self.problem.domain.center.copy()

    def eps_problem(self, eps: float):
        if eps not in self._eps_cache:
            self._eps_cache[eps] = eps_problem(self.problem, eps)
        return self._eps_cache[eps]

    def theta(self, x, eps: float) -> float:
        return self.eps_problem(eps).theta(x)

    def feasible(self, x, eps: float) -> bool:
        return self.eps_problem(eps).feasible(x)

    def theta_original(self, x) -> float:
        return evaluate_objective(self.problem, x)

    def feasible_original(self, x) -> bool:
        return check_feasible(self.problem, x)

    def objective_bound(self, x) -> float:
        return self.eps_problem(1.0).upper_bound(x)

    def count_selections(self, x, eps: float, delta) -> int:
        return count_selections(self.eps_problem(eps), x, delta)

    def selections(self, x, eps: float, delta, mode: str) -> list:
        return list(enumerate_selections(self.eps_problem(eps), x, delta, "first" if mode == "single" else "all"))

    @staticmethod
    def describe(sel) -> list:
        return sel.as_list()

    def subproblem(self, eps: float, sel, center, rho: float, segments: int, gamma_penalty=None):
        epsp = self.eps_problem(eps)
        base = epsp if sel is None else build_decomposed(epsp, sel, center, rho)
        return HeavisideSubproblem(base, center=center, rho=rho, segments=segments, gamma_penalty=gamma_penalty)

    def singleton(self, x, eps: float) -> bool:
        return self.count_selections(x, eps, 0.0) == 1

    def zero_negative_empty(self, x) -> bool | None:
        if any(not isinstance(t, HeavisideTerm) for e in self.problem.blocks for t in e.terms):
            return None
        return not zero_index_sets(self.problem, x).zero_negcoeff


def as_adapter(p):
    return AHSAdapter(p) if isinstance(p, AHSProblem) else p


# ------------------------------------------------------------- bootstrap


def _solve_sub(sub, x, cfg: IDSAConfig, use_full: bool):
    """Returns (x_new, stats) for one subproblem started at x."""
    if use_full:
        ip = sub.build()
        sol = solve_milp(ip.model, cfg.milp, incumbent=ip.warm_start(x))
        if not sol.has_solution:
            return None, {"status": sol.status, "nodes": sol.stats["nodes"], "lp_solves": sol.stats["lp_solves"]}
        return ip.extract(sol.values), {"status": sol.status, "nodes": sol.stats["nodes"], "lp_solves": sol.stats["lp_solves"]}
    res = pip_solve(sub, x, cfg.pip)
    last = res.trace.records[-1]
    return res.x, {"status": last["status"], "pip_iterations": res.iterations, "stop": res.stop_reason,
                   "nodes": sum(r["nodes"] for r in res.trace.records),
                   "lp_solves": sum(r["lp_solves"] for r in res.trace.records),
                   "delta_prime": res.delta_prime}


def bootstrap_feasible(p, eps0: float = DEFAULT_EPS[0], lam: float = 1e4, x_start=None,
                       cfg: IDSAConfig | None = None) -> np.ndarray:
    """A point feasible for the first approximation, via the residual variable.

    Starts at ``x_start`` (default: box center) and returns it unchanged if
    it is already feasible.  Otherwise maximizes the objective minus
    ``lam`` times the largest constraint shortfall.
    """
    ad = as_adapter(p)
    cfg = cfg or IDSAConfig()
    x = ad.default_start() if x_start is None else np.asarray(x_start, float)
    if ad.feasible(x, eps0):
        return x
    sub = ad.subproblem(eps0, None, None, 0.0, cfg.segments, gamma_penalty=lam)
    use_full = cfg.inner == "full" or sub.n_terms <= cfg.full_ip_max_terms
    x_new, _ = _solve_sub(sub, x, cfg, use_full)
    if x_new is None:
        raise InfeasibleStartError(math.inf)
    gam = sub.residual(x_new)
    if gam > 1e-9 or not ad.feasible(x_new, eps0):
        raise InfeasibleStartError(max(gam, 0.0), x_new)
    return x_new


# ---------------------------------------------------------------- main loop


def idsa_run(p, cfg: IDSAConfig | None = None, x0=None):
    """Run the outer loop; returns ``(x_final, RunTrace)``."""
    ad = as_adapter(p)
    cfg = cfg or IDSAConfig()
    eps0 = cfg.eps_at(0)
    if x0 is None:
        x0 = bootstrap_feasible(ad, eps0, cfg.lam, cfg=cfg)
    x = np.asarray(x0, float).copy()
    if not ad.feasible(x, eps0):
        raise InfeasibleStartError(math.nan, x)
    trace = RunTrace(start=[float(v) for v in x], config={
        "eps_schedule": list(cfg.eps_schedule), "rho": cfg.rho, "delta": cfg.delta,
        "nu_max": cfg.nu_max, "step_tol": cfg.step_tol, "selection_mode": cfg.selection_mode,
        "inner": cfg.inner, "decompose": cfg.decompose, "segments": cfg.segments})
    for nu in range(cfg.nu_max):
        eps, eps_next = cfg.eps_at(nu), cfg.eps_at(nu + 1)
        theta = ad.theta(x, eps)
        mode = cfg.selection_mode
        fallback = False
        if cfg.decompose:
            if mode == "all" and ad.count_selections(x, eps, cfg.delta) > cfg.selection_cap:
                log.info("selection set exceeds %d at nu=%d; using a single selection", cfg.selection_cap, nu)
                mode, fallback = "single", True
            sels = ad.selections(x, eps, cfg.delta, mode)
        else:
            sels = [None]
        best = None
        for q, sel in enumerate(sels):
            sub = ad.subproblem(eps, sel, x, cfg.rho, cfg.segments)
            if not sub.feasible(x):
                # rounding at a link margin can cut x off; the residual form still accepts it
                sub = ad.subproblem(eps, sel, x, cfg.rho, cfg.segments, gamma_penalty=cfg.lam)
            try:
                x_new, stats = _solve_sub(sub, x, cfg, cfg.inner == "full")
            except PIPError as exc:
                raise RuntimeError(f"inner solver failed at nu={nu}, selection {q}: {exc}") from exc
            if x_new is None:
                continue
            val = sub.objective(x_new)
            pen = sub.prox.penalty(x_new) if sub.prox is not None else 0.0
            if best is None or val > best[0]:
                best = (val, q, sel, x_new, pen, stats)
        accepted = False
        x_next, pen, stats, q_best, sel_best = x, 0.0, {}, None, None
        if best is not None:
            _, q_best, sel_best, cand, cpen, stats = best
            if ad.feasible(cand, eps_next) and ad.theta(cand, eps_next) - cpen >= theta:
                x_next, pen, accepted = cand, cpen, True
        step = float(np.linalg.norm(x_next - x))
        theta_next = ad.theta(x_next, eps_next)
        trace.records.append({
            "nu": nu,
            "eps": eps,
            "eps_next": eps_next,
            "theta": theta,
            "theta_next": theta_next,
            "prox_penalty": pen,
            "step": step,
            "accepted": accepted,
            "n_selections": len(sels),
            "fallback": fallback,
            "selection": None if sel_best is None else ad.describe(sel_best),
            "inner": {k: v for k, v in stats.items()},
            "delta_prime": stats.get("delta_prime"),
            "x": [float(v) for v in x],
            "x_next": [float(v) for v in x_next],
        })
        x = x_next
        if step <= cfg.step_tol:
            break
    trace.final = [float(v) for v in x]
    return x, trace


# ---------------------------------------------------------------- checks


@dataclass
class CheckResult:
    passed: bool
    detail: str = ""
    where: int | None = None


@dataclass
class VerifyReport:
    checks: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for k, c in self.checks.items() if k in "abcd")

    def summary(self) -> str:
        return "; ".join(f"({k}) {'ok' if c.passed else 'FAIL'} {c.detail}".strip() for k, c in sorted(self.checks.items()))


def verify_run(trace: RunTrace, p, tol: float = 1e-9, step_tol: float | None = None) -> VerifyReport:
    """Check the recorded run against the convergence guarantees.

    (a) theta^{eps_nu}(x^nu) is nondecreasing; (b) every step satisfies the
    descent inequality with the piecewise-linear proximal penalty; (c) the
    last step is below the step tolerance; (d) the final iterate is
    feasible for the original problem; (e) the active piece selection at
    the final iterate is unique and no negative-coefficient inner function
    vanishes there (reported, not required).
    """
    ad = as_adapter(p)
    step_tol = trace.config.get("step_tol", 1e-6) if step_tol is None else step_tol
    recs = trace.records
    checks = {}
    th = [r["theta"] for r in recs]
    bad = next((nu for nu in range(1, len(th)) if th[nu] < th[nu - 1] - tol), None)
    checks["a"] = CheckResult(bad is None, "" if bad is None else f"objective decreased at nu={recs[bad]['nu']}", bad)
    bad = next((i for i, r in enumerate(recs) if r["theta_next"] < r["theta"] - r["prox_penalty"] - tol), None)
    checks["b"] = CheckResult(bad is None, "" if bad is None else f"descent violated at nu={recs[bad]['nu']}", bad)
    last = recs[-1]["step"] if recs else 0.0
    checks["c"] = CheckResult(last <= step_tol, f"last step {last:.3g}")
    xf = trace.final if trace.final is not None else (recs[-1]["x_next"] if recs else trace.start)
    if xf is None:
        checks["d"] = CheckResult(True, "empty trace")
        checks["e"] = CheckResult(True, "empty trace")
        return VerifyReport(checks)
    xf = np.asarray(xf, float)
    checks["d"] = CheckResult(bool(ad.feasible_original(xf)), "")
    eps_last = recs[-1]["eps_next"] if recs else trace.config.get("eps_schedule", [DEFAULT_EPS[-1]])[-1]
    single = ad.singleton(xf, eps_last)
    zneg = ad.zero_negative_empty(xf)
    checks["e"] = CheckResult(bool(single) and zneg is not False,
                              f"singleton={single} zero_negative_empty={zneg}")
    return VerifyReport(checks)
