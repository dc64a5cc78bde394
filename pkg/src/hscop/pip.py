"""Progressive integer programming.

At the current point every term's link slack is known.  Terms whose slack
is confidently positive are fixed to one, confidently negative ones are
fixed to zero, and only the band in between keeps a binary.  The smaller
integer program is solved, and the fraction of free terms grows whenever
the objective stalls.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .ipbuild import FREE, ONE, WARM_TOL, ZERO, IndexPartition
from .milp import MILPConfig, OPTIMAL, solve_milp

OBJ_TOL = 1e-9


class PIPError(RuntimeError):
    pass


@dataclass
class PIPConfig:
    r0: float = 0.4
    r_max: float = 0.75
    r_min: float = 0.3
    r_delta: float = 0.1
    mu_max: int = 10
    mu_tilde_max: int = 4
    seed: int = 0
    milp: MILPConfig = field(default_factory=MILPConfig)

    def __post_init__(self):
        if not (0 < self.r0 <= self.r_max <= 1):
            raise ValueError("need 0 < r0 <= r_max <= 1")
        if not (0 < self.r_min <= self.r_max):
            raise ValueError("need 0 < r_min <= r_max")
        if self.r_delta <= 0:
            raise ValueError("r_delta must be positive")
        if self.mu_max < 1 or self.mu_tilde_max < 1:
            raise ValueError("iteration limits must be positive")


@dataclass
class PIPTrace:
    records: list = field(default_factory=list)

    def objectives(self) -> list:
        return [r["obj"] for r in self.records]

    def is_monotone(self, tol: float = 0.0) -> bool:
        obj = self.objectives()
        return all(b >= a - tol for a, b in zip(obj, obj[1:]))

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)


@dataclass
class PIPResult:
    x: np.ndarray
    objective: float
    start_objective: float
    iterations: int
    stop_reason: str
    delta_prime: float | None
    partition: IndexPartition
    trace: PIPTrace


# ------------------------------------------------------------ quantiles


def quantile_threshold(values, r: float, side: str = "lower") -> float:
    """Nearest-rank quantile used as a strict fixing threshold.

    ``lower``: the element of rank ceil(r * |values|) in ascending order;
    r = 0 gives -inf and an empty pool gives +inf (nothing is fixed).
    ``upper``: the mirror image, computed on the negated pool.
    """
    if not 0 <= r <= 1:
        raise ValueError("r must lie in [0, 1]")
    v = np.sort(np.asarray(list(values), float))
    if side == "upper":
        return -quantile_threshold(-v, r, "lower")
    if side != "lower":
        raise ValueError(f"unknown side {side!r}")
    if len(v) == 0:
        return math.inf
    rank = math.ceil(r * len(v))
    if rank == 0:
        return -math.inf
    return float(v[rank - 1])


def partition_from_incumbent(sub, x, r: float, rng=None) -> IndexPartition:
    """Fix terms whose link slack at x lies strictly beyond the pool quantiles.

    Pools are formed per (block, coefficient sign).  Slack values within
    WARM_TOL of zero are assigned to the positive or negative pool by
    ``rng`` (default: a fresh generator with seed 0).
    """
    rng = np.random.default_rng(0) if rng is None else rng
    vals = sub.term_values(x)
    states = np.full(sub.n_terms, FREE, dtype=np.int8)
    thresholds = {}
    ties = np.abs(vals) <= WARM_TOL
    coin = rng.random(sub.n_terms) < 0.5
    pos = np.where(ties, coin, vals > 0)
    for b in np.unique(sub.blocks_of) if sub.n_terms else []:
        for sg in (1, -1):
            fam = (sub.blocks_of == b) & (sub.signs == sg)
            hi = np.flatnonzero(fam & pos)
            lo = np.flatnonzero(fam & ~pos)
            d_hi = quantile_threshold(vals[hi], r, "lower") if len(hi) else math.inf
            d_lo = quantile_threshold(vals[lo], r, "upper") if len(lo) else -math.inf
            thresholds[(int(b), sg)] = (d_hi, d_lo)
            states[hi[vals[hi] > d_hi]] = ONE
            states[lo[vals[lo] < d_lo]] = ZERO
    # fixing must agree with x so that x stays feasible for the partial IP;
    # this matters for ties sent to the wrong pool by the coin
    states[(states == ONE) & (vals < -WARM_TOL)] = FREE
    states[(states == ZERO) & (vals >= -WARM_TOL)] = FREE
    return IndexPartition(states, thresholds)


def delta_prime(part: IndexPartition) -> float | None:
    """Smallest finite fixing threshold magnitude over all pools; None if none."""
    mags = [abs(t) for pair in part.thresholds.values() for t in pair if math.isfinite(t)]
    return min(mags) if mags else None


def _fmt_thresholds(th: dict) -> dict:
    out = {}
    for (b, sg), (hi, lo) in sorted(th.items()):
        out[f"{b}{'+' if sg > 0 else '-'}"] = [hi if math.isfinite(hi) else None, lo if math.isfinite(lo) else None]
    return out


def pip_solve(sub, x0, cfg: PIPConfig | None = None) -> PIPResult:
    """Run the fixing loop on a subproblem from a point it accepts.

    ``sub`` must expose ``term_values``, ``objective``, ``build`` and the
    ``n_terms``/``blocks_of``/``signs`` attributes (see
    :class:`hscop.ipbuild.HeavisideSubproblem`).
    """
    cfg = cfg or PIPConfig()
    rng = np.random.default_rng(cfg.seed)
    x = np.asarray(x0, float).copy()
    obj = sub.objective(x)
    if obj == -math.inf:
        raise PIPError("start point is infeasible for the subproblem; bootstrap with the residual variable")
    start = obj
    r = cfg.r0
    mu_tilde = 0
    trace = PIPTrace()
    part = None
    reason = "mu_max"
    mu = 0
    for mu in range(cfg.mu_max):
        part = partition_from_incumbent(sub, x, r, rng)
        ip = sub.build(part)
        warm = ip.warm_start(x)
        sol = solve_milp(ip.model, cfg.milp, incumbent=warm)
        if not sol.has_solution:
            raise PIPError(f"partial IP returned no solution at iteration {mu} ({sol.status})")
        x_new = ip.extract(sol.values)
        obj_new = sub.objective(x_new)
        accepted = obj_new >= obj
        if accepted:
            improved = obj_new > obj + OBJ_TOL
            x, obj = x_new, obj_new
        else:
            improved = False
        if improved:
            mu_tilde = 0
        else:
            mu_tilde += 1
        counts = part.counts()
        trace.records.append({
            "mu": mu,
            "r": r,
            "obj": obj,
            "accepted": bool(accepted),
            "free": counts["free"],
            "fixed_one": counts["one"],
            "fixed_zero": counts["zero"],
            "families": part.families(sub.signs),
            "thresholds": _fmt_thresholds(part.thresholds),
            "status": sol.status,
            "nodes": sol.stats["nodes"],
            "lp_solves": sol.stats["lp_solves"],
            "x": [float(v) for v in x],
        })
        if sub.n_terms == 0:
            reason = "no_terms"
            break
        if counts["free"] == sub.n_terms and sol.status == OPTIMAL and not improved:
            reason = "full_ip_optimal"
            break
        if not improved:
            r = max(cfg.r_min, min(r + cfg.r_delta, cfg.r_max))
        if mu_tilde >= cfg.mu_tilde_max:
            reason = "stalled"
            break
    return PIPResult(x, obj, start, mu + 1, reason, delta_prime(part), part, trace)
