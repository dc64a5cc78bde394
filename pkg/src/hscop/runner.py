"""One-shot solving of a problem by name of method."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .core_model import AHSProblem
from .idsa import IDSAConfig, InfeasibleStartError, as_adapter, bootstrap_feasible, idsa_run
from .milp import INFEASIBLE, solve_milp, write_lp_format
from .oracle import enumerate_optimum
from .pip import PIPError, pip_solve

METHODS = ("full-mip", "pip", "isa-pip", "idsa-pip", "oracle")


@dataclass
class SolveResult:
    method: str
    status: str
    x: np.ndarray | None
    objective: float | None
    feasible: bool
    trace_jsonl: str
    wall_ms: float
    extra: dict = field(default_factory=dict)

    def to_json(self, timing: bool = True) -> dict:
        doc = {
            "method": self.method,
            "status": self.status,
            "x": None if self.x is None else [float(v) for v in self.x],
            "objective": self.objective,
            "feasible": self.feasible,
            **self.extra,
        }
        if timing:
            doc["time_ms"] = self.wall_ms
        return doc


def _one_line(**kw) -> str:
    return json.dumps(kw, sort_keys=True) + "\n"


def solve_problem(p, method: str = "idsa-pip", cfg: IDSAConfig | None = None, oracle_bits: int = 16,
                  lp_dump=None) -> SolveResult:
    """Solve ``p`` (an additive/product problem or an adapter) with one method.

    Single-shot methods (full-mip, pip) work on the approximation at the
    last epsilon of the schedule.  ``lp_dump`` is an optional path that
    receives the first integer program in LP text format.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    cfg = cfg or IDSAConfig()
    ad = as_adapter(p)
    t0 = time.perf_counter()
    extra = {}
    if method == "oracle":
        if not isinstance(p, AHSProblem):
            raise ValueError("the oracle needs an expression problem")
        res = enumerate_optimum(p, limit_bits=oracle_bits, lp_backend=cfg.milp.lp_backend)
        ms = 1000 * (time.perf_counter() - t0)
        if res.x is None:
            return SolveResult(method, INFEASIBLE, None, None, False, _one_line(kind="oracle", status=INFEASIBLE), ms)
        trace = _one_line(kind="oracle", value=res.value, pattern=list(res.pattern.bits), lp_solves=res.lp_solves)
        return SolveResult(method, "Optimal", res.x, float(res.value), bool(ad.feasible_original(res.x)), trace, ms)

    if method in ("isa-pip", "idsa-pip"):
        icfg = IDSAConfig(**{**cfg.__dict__, "decompose": method == "idsa-pip"})
        x0 = bootstrap_feasible(ad, icfg.eps_at(0), icfg.lam, cfg=icfg)
        if lp_dump is not None:
            write_lp_format(ad.subproblem(icfg.eps_at(0), None, x0, icfg.rho, icfg.segments).build().model, lp_dump)
        x, trace = idsa_run(ad, icfg, x0)
        ms = 1000 * (time.perf_counter() - t0)
        extra["outer_iterations"] = len(trace.records)
        return SolveResult(method, "ok", x, float(ad.theta_original(x)), bool(ad.feasible_original(x)),
                           trace.to_jsonl(), ms, extra)

    eps = cfg.eps_schedule[-1]
    x0 = bootstrap_feasible(ad, eps, cfg.lam, cfg=cfg)
    sub = ad.subproblem(eps, None, None, 0.0, cfg.segments)
    if method == "full-mip":
        ip = sub.build()
        if lp_dump is not None:
            write_lp_format(ip.model, lp_dump)
        sol = solve_milp(ip.model, cfg.milp, incumbent=ip.warm_start(x0))
        x = ip.extract(sol.values) if sol.has_solution else None
        st = {k: v for k, v in sol.stats.items() if k != "wall_time"}
        trace = _one_line(kind="milp", status=sol.status, objective=sol.objective, bound=sol.bound, **st)
        status = sol.status
    else:
        if lp_dump is not None:
            write_lp_format(sub.build().model, lp_dump)
        try:
            res = pip_solve(sub, x0, cfg.pip)
        except PIPError:
            # the link margin can exclude the start; switch to the residual form
            sub = ad.subproblem(eps, None, None, 0.0, cfg.segments, gamma_penalty=cfg.lam)
            res = pip_solve(sub, x0, cfg.pip)
        x, trace, status = res.x, res.trace.to_jsonl(), res.stop_reason
        extra["pip_iterations"] = res.iterations
    ms = 1000 * (time.perf_counter() - t0)
    if x is None:
        return SolveResult(method, status, None, None, False, trace, ms)
    return SolveResult(method, status, x, float(ad.theta_original(x)), bool(ad.feasible_original(x)), trace, ms, extra)


__all__ = ["METHODS", "SolveResult", "solve_problem", "InfeasibleStartError"]
