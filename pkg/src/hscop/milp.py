"""Mixed-binary linear programs and a best-first branch-and-bound solver."""
from __future__ import annotations

import heapq
import itertools
import math
import re
import time
from dataclasses import dataclass, field

import numpy as np

from .lp import EQ, GE, LE, LinearProgram, solve_lp

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
GAP_LIMIT = "GapLimit"
NODE_LIMIT = "NodeLimit"
TIME_LIMIT = "TimeLimit"

_SENSE = {"<=": LE, ">=": GE, "==": EQ, "=": EQ}


@dataclass(eq=False)
class MILPModel:
    """maximize c @ v + const over rows and bounds, with some v binary."""

    c: np.ndarray
    A: np.ndarray
    sense: np.ndarray
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    binary: np.ndarray
    const: float = 0.0
    names: list = field(default_factory=list)
    tags: dict = field(default_factory=dict)
    big_m: float = 0.0
    _lp: LinearProgram | None = field(default=None, repr=False)

    @property
    def n_vars(self) -> int:
        return len(self.c)

    @property
    def n_binary(self) -> int:
        return int(self.binary.sum())

    @property
    def lp(self) -> LinearProgram:
        if self._lp is None:
            self._lp = LinearProgram(self.c, self.A, self.sense, self.rhs, self.lb, self.ub, self.const)
        return self._lp

    def objective(self, v) -> float:
        return float(self.c @ v + self.const)

    def is_feasible(self, v, tol: float = 1e-9) -> bool:
        v = np.asarray(v, float)
        if v.shape != (self.n_vars,):
            return False
        if np.any(v < self.lb - tol) or np.any(v > self.ub + tol):
            return False
        b = v[self.binary]
        if np.any(np.abs(b - np.round(b)) > tol):
            return False
        viol = self.lp.row_violation(v)
        return bool(np.all(viol <= tol * np.maximum(1.0, np.abs(self.rhs))))

    def count_tags(self) -> dict:
        out: dict = {}
        for idx in np.flatnonzero(self.binary):
            fam = self.tags.get(int(idx), ("untagged",))[0]
            out[fam] = out.get(fam, 0) + 1
        return out


class ModelBuilder:
    """Incremental construction of a :class:`MILPModel`."""

    def __init__(self):
        self.lb, self.ub, self.obj, self.is_bin, self.names = [], [], [], [], []
        self.rows, self.sense, self.rhs = [], [], []
        self.tags: dict = {}
        self.const = 0.0

    def add_var(self, name: str, lb: float, ub: float, obj: float = 0.0, binary: bool = False, tag=None) -> int:
        self.lb.append(float(lb)); self.ub.append(float(ub)); self.obj.append(float(obj))
        self.is_bin.append(bool(binary)); self.names.append(name)
        idx = len(self.lb) - 1
        if tag is not None:
            self.tags[idx] = tag
        return idx

    def add_vars(self, prefix: str, count: int, lb, ub, binary: bool = False, tag=None) -> np.ndarray:
        lbs = np.broadcast_to(np.asarray(lb, float), (count,))
        ubs = np.broadcast_to(np.asarray(ub, float), (count,))
        return np.array([
            self.add_var(f"{prefix}{k}", lbs[k], ubs[k], binary=binary,
                         tag=None if tag is None else (*tag, k))
            for k in range(count)
        ], dtype=int)

    def add_obj(self, idx, coef) -> None:
        for i, c in zip(np.atleast_1d(idx), np.broadcast_to(coef, np.shape(np.atleast_1d(idx)))):
            self.obj[int(i)] += float(c)

    def add_row(self, idx, coef, sense: str, rhs: float) -> int:
        idx = np.asarray(idx, dtype=int).reshape(-1)
        coef = np.broadcast_to(np.asarray(coef, float), idx.shape).copy()
        self.rows.append((idx, coef)); self.sense.append(_SENSE[sense]); self.rhs.append(float(rhs))
        return len(self.rows) - 1

    def build(self, big_m: float = 0.0) -> MILPModel:
        n = len(self.lb)
        A = np.zeros((len(self.rows), n))
        for r, (idx, coef) in enumerate(self.rows):
            np.add.at(A[r], idx, coef)
        return MILPModel(
            np.array(self.obj), A, np.array(self.sense, dtype=int), np.array(self.rhs),
            np.array(self.lb), np.array(self.ub), np.array(self.is_bin, dtype=bool),
            self.const, list(self.names), dict(self.tags), float(big_m),
        )


@dataclass
class MILPConfig:
    gap_tol: float = 1e-6
    gap_limit: float | None = None
    node_limit: int = 200_000
    time_limit: float | None = None
    int_tol: float = 1e-6
    heuristic_every: int = 20
    lp_backend: str = "auto"
    solver: str = "bnb"  # "bnb", "highs", or "auto" (highs above auto_binaries)
    auto_binaries: int = 30

    def __post_init__(self):
        if self.solver not in ("auto", "bnb", "highs"):
            raise ValueError("solver must be 'auto', 'bnb' or 'highs'")


@dataclass
class MILPSolution:
    status: str
    values: np.ndarray | None
    objective: float
    bound: float
    binary: np.ndarray
    stats: dict = field(default_factory=dict)

    @property
    def has_solution(self) -> bool:
        return self.values is not None

    @property
    def x(self) -> np.ndarray | None:
        return None if self.values is None else self.values[~self.binary]

    @property
    def z(self) -> np.ndarray | None:
        return None if self.values is None else np.round(self.values[self.binary]).astype(int)


def solve_milp(model: MILPModel, cfg: MILPConfig | None = None, incumbent=None) -> MILPSolution:
    """Best-first branch and bound with most-fractional branching.

    ``incumbent`` is an optional full variable vector; it is used when it
    satisfies every row and bound.  The returned solution is never worse
    than an accepted incumbent.
    """
    cfg = cfg or MILPConfig()
    if cfg.solver == "highs" or (cfg.solver == "auto" and model.n_binary > cfg.auto_binaries):
        return _solve_highs_milp(model, cfg, incumbent)
    t0 = time.perf_counter()
    lp = model.lp
    bins = np.flatnonzero(model.binary)
    stats = {"nodes": 0, "lp_solves": 0, "lp_iterations": 0, "incumbent_accepted": False}
    best_v, best_obj = None, -math.inf

    if incumbent is not None:
        v = np.asarray(incumbent, float).copy()
        if model.is_feasible(v):
            v[bins] = np.round(v[bins])
            best_v, best_obj = v, model.objective(v)
            stats["incumbent_accepted"] = True

    def run_lp(lb, ub):
        sol = solve_lp(lp, lb, ub, backend=cfg.lp_backend)
        stats["lp_solves"] += 1
        stats["lp_iterations"] += sol.iterations
        return sol

    def fixed_lp(x, lb, ub):
        lb2, ub2 = lb.copy(), ub.copy()
        r = np.round(x[bins])
        lb2[bins] = r
        ub2[bins] = r
        return run_lp(lb2, ub2)

    def offer(sol):
        nonlocal best_v, best_obj
        if sol.ok and sol.objective > best_obj:
            v = sol.x.copy()
            v[bins] = np.round(v[bins])
            best_v, best_obj = v, model.objective(v)

    def closed(bound):
        return best_v is not None and bound - best_obj <= cfg.gap_tol * max(1.0, abs(best_obj))

    counter = itertools.count()
    heap = [(-math.inf, 0, next(counter), model.lb.copy(), model.ub.copy())]
    status = None
    while heap:
        top = -heap[0][0]
        if closed(top):
            heap.clear()
            break
        if cfg.time_limit is not None and time.perf_counter() - t0 > cfg.time_limit:
            status = TIME_LIMIT
            break
        if stats["nodes"] >= cfg.node_limit:
            status = NODE_LIMIT
            break
        if cfg.gap_limit is not None and best_v is not None and top - best_obj <= cfg.gap_limit * max(1.0, abs(best_obj)):
            status = GAP_LIMIT
            break
        key, negdepth, _, lb, ub = heapq.heappop(heap)
        sol = run_lp(lb, ub)
        stats["nodes"] += 1
        if not sol.ok:
            continue
        bound = sol.objective
        if closed(bound):
            continue
        xb = sol.x[bins]
        frac = np.abs(xb - np.round(xb))
        if np.all(frac <= cfg.int_tol):
            offer(fixed_lp(sol.x, lb, ub))
            continue
        if stats["nodes"] == 1 or (cfg.heuristic_every and stats["nodes"] % cfg.heuristic_every == 0):
            offer(fixed_lp(sol.x, lb, ub))
        score = np.minimum(xb - np.floor(xb), np.ceil(xb) - xb)
        j = bins[int(np.argmax(score))]
        depth = -negdepth + 1
        for val in (1.0, 0.0):
            lb2, ub2 = lb.copy(), ub.copy()
            lb2[j] = ub2[j] = val
            heapq.heappush(heap, (-bound, -depth, next(counter), lb2, ub2))

    open_bound = max((-h[0] for h in heap), default=-math.inf)
    if status is None:
        status = OPTIMAL if best_v is not None else INFEASIBLE
        bound = best_obj
    else:
        bound = max(open_bound, best_obj)
    stats["wall_time"] = time.perf_counter() - t0
    return MILPSolution(status, best_v, best_obj, bound, model.binary.copy(), stats)


def _solve_highs_milp(model: MILPModel, cfg: MILPConfig, incumbent=None) -> MILPSolution:
    """HiGHS branch and cut, followed by a fixed-binary LP polish."""
    import highspy
    from scipy.sparse import csc_matrix

    t0 = time.perf_counter()
    bins = np.flatnonzero(model.binary)
    stats = {"nodes": 0, "lp_solves": 0, "lp_iterations": 0, "incumbent_accepted": False}
    inc_v, inc_obj = None, -math.inf
    if incumbent is not None:
        v = np.asarray(incumbent, float).copy()
        if model.is_feasible(v):
            v[bins] = np.round(v[bins])
            inc_v, inc_obj = v, model.objective(v)
            stats["incumbent_accepted"] = True

    h = highspy.Highs()
    opts = {"output_flag": False, "random_seed": 0, "mip_feasibility_tolerance": 1e-9,
            "primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9,
            "mip_rel_gap": max(cfg.gap_tol, cfg.gap_limit or 0.0), "mip_abs_gap": 1e-12,
            "mip_max_nodes": int(cfg.node_limit)}
    if cfg.time_limit is not None:
        opts["time_limit"] = float(cfg.time_limit)
    for k, v in opts.items():
        h.setOptionValue(k, v)
    lp = highspy.HighsLp()
    n, m = model.n_vars, len(model.rhs)
    lp.num_col_, lp.num_row_ = n, m
    lp.col_cost_ = np.asarray(model.c, float)
    lp.col_lower_ = np.asarray(model.lb, float)
    lp.col_upper_ = np.asarray(model.ub, float)
    lo = np.where(model.sense == LE, -highspy.kHighsInf, model.rhs)
    hi = np.where(model.sense == GE, highspy.kHighsInf, model.rhs)
    lp.row_lower_, lp.row_upper_ = lo.astype(float), hi.astype(float)
    A = csc_matrix(model.A)
    lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    lp.a_matrix_.start_ = A.indptr
    lp.a_matrix_.index_ = A.indices
    lp.a_matrix_.value_ = A.data
    lp.sense_ = highspy.ObjSense.kMaximize
    lp.offset_ = float(model.const)
    lp.integrality_ = [highspy.HighsVarType.kInteger if b else highspy.HighsVarType.kContinuous
                       for b in model.binary]
    h.passModel(lp)
    if inc_v is not None:
        sol0 = highspy.HighsSolution()
        sol0.col_value = list(inc_v)
        sol0.value_valid = True
        h.setSolution(sol0)
    h.run()
    ms = h.getModelStatus()
    info = h.getInfo()
    stats["nodes"] = int(info.mip_node_count)
    stats["lp_iterations"] = int(max(info.simplex_iteration_count, 0))
    best_v, best_obj = inc_v, inc_obj
    if info.primal_solution_status == 2:  # feasible point available
        v = np.asarray(h.getSolution().col_value, float)
        lb2, ub2 = model.lb.copy(), model.ub.copy()
        r = np.clip(np.round(v[bins]), model.lb[bins], model.ub[bins])
        lb2[bins] = ub2[bins] = r
        pol = solve_lp(model.lp, lb2, ub2, backend=cfg.lp_backend)
        stats["lp_solves"] += 1
        if pol.ok:
            w = pol.x.copy()
            w[bins] = r
            if model.is_feasible(w, tol=1e-7) and model.objective(w) > best_obj:
                best_v, best_obj = w, model.objective(w)
    bound = float(info.mip_dual_bound) if np.isfinite(info.mip_dual_bound) else math.inf
    K = highspy.HighsModelStatus
    if ms == K.kOptimal:
        gap = bound - best_obj if best_v is not None else math.inf
        if best_v is None:
            status = INFEASIBLE
        elif gap <= cfg.gap_tol * max(1.0, abs(best_obj)) + 1e-9:
            status = OPTIMAL
        else:
            status = GAP_LIMIT
    elif ms == K.kInfeasible:
        status = INFEASIBLE if best_v is None else OPTIMAL
    elif ms == K.kTimeLimit:
        status = TIME_LIMIT
    else:
        status = NODE_LIMIT
    if status == OPTIMAL:
        bound = best_obj
    else:
        bound = max(bound, best_obj)
    stats["wall_time"] = time.perf_counter() - t0
    stats["solver"] = "highs"
    return MILPSolution(status, best_v, best_obj, bound, model.binary.copy(), stats)


# ------------------------------------------------------------ LP format


def _fmt(x: float) -> str:
    return repr(float(x))


def write_lp_format(model: MILPModel, path=None, name: str = "model") -> str:
    """Render the model in the common "Maximize / Subject To / Bounds / Binaries" text format."""
    names = model.names or [f"v{i}" for i in range(model.n_vars)]

    def expr(coefs):
        parts = []
        for i in np.flatnonzero(coefs):
            c = coefs[i]
            parts.append(f"{'-' if c < 0 else '+'} {_fmt(abs(c))} {names[i]}")
        return " ".join(parts) if parts else f"+ 0 {names[0]}"

    lines = [f"\\ {name}", f"\\ objective constant: {_fmt(model.const)}", "Maximize", f" obj: {expr(model.c)}", "Subject To"]
    sym = {LE: "<=", GE: ">=", EQ: "="}
    for r in range(len(model.rhs)):
        lines.append(f" r{r}: {expr(model.A[r])} {sym[int(model.sense[r])]} {_fmt(model.rhs[r])}")
    lines.append("Bounds")
    for i in range(model.n_vars):
        if not model.binary[i]:
            lines.append(f" {_fmt(model.lb[i])} <= {names[i]} <= {_fmt(model.ub[i])}")
    lines.append("Binaries")
    lines.extend(f" {names[i]}" for i in np.flatnonzero(model.binary))
    lines.append("End")
    text = "\n".join(lines) + "\n"
    if path is not None:
        from pathlib import Path

        Path(path).write_text(text)
    return text


_TERM = re.compile(r"([+-])\s*([0-9.eE+-]+|inf|nan)\s+(\S+)")


def read_lp_format(text: str) -> MILPModel:
    """Parse text produced by :func:`write_lp_format`."""
    section = None
    const = 0.0
    obj: dict = {}
    rows = []
    bounds: dict = {}
    binaries: list = []
    order: list = []

    def note(v):
        if v not in order:
            order.append(v)

    def terms(s):
        out = {}
        for sign, num, var in _TERM.findall(s):
            out[var] = out.get(var, 0.0) + (-1 if sign == "-" else 1) * float(num)
            note(var)
        return out

    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("\\"):
            if "objective constant:" in line:
                const = float(line.split(":", 1)[1])
            continue
        head = line.lower()
        if head in ("maximize", "subject to", "bounds", "binaries", "end"):
            section = head
            continue
        if section == "maximize":
            obj = terms(line.split(":", 1)[1])
        elif section == "subject to":
            body = line.split(":", 1)[1]
            m = re.match(r"(.*)\s(<=|>=|=)\s(\S+)$", body)
            rows.append((terms(m.group(1)), m.group(2), float(m.group(3))))
        elif section == "bounds":
            lo, var, hi = re.match(r"(\S+)\s*<=\s*(\S+)\s*<=\s*(\S+)", line).groups()
            bounds[var] = (float(lo), float(hi))
            note(var)
        elif section == "binaries":
            binaries.append(line)
            note(line)
    b = ModelBuilder()
    index = {}
    for v in order:
        lo, hi = bounds.get(v, (0.0, 1.0))
        index[v] = b.add_var(v, lo, hi, obj.get(v, 0.0), binary=v in binaries)
    b.const = const
    for coefs, s, rhs in rows:
        b.add_row([index[v] for v in coefs], list(coefs.values()), s, rhs)
    return b.build()
