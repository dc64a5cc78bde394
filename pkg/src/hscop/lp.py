"""Linear programming: a dense two-phase primal simplex and a HiGHS backend.

All LPs are maximizations with finite variable bounds::

    maximize    c @ x + const
    subject to  A[i] @ x  (<=, >=, ==)  rhs[i]
                lb <= x <= ub

Row senses are encoded as -1 (<=), +1 (>=) and 0 (==).  Duals ``pi`` are
reported with the sign convention d(objective)/d(rhs), so ``<=`` rows
have ``pi >= 0`` and ``>=`` rows ``pi <= 0`` at optimality.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

LE, GE, EQ = -1, 1, 0
OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
ITERATION_LIMIT = "IterationLimit"

# LPs with at most this many rows + columns go to the in-repo simplex
# under backend="auto"; larger ones go to HiGHS.
AUTO_SIMPLEX_SIZE = 150


@dataclass(eq=False)
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    sense: np.ndarray
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    const: float = 0.0
    _sparse: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.c = np.asarray(self.c, float)
        n = len(self.c)
        self.A = np.asarray(self.A, float).reshape(-1, n)
        self.sense = np.asarray(self.sense, int).reshape(-1)
        self.rhs = np.asarray(self.rhs, float).reshape(-1)
        self.lb = np.asarray(self.lb, float)
        self.ub = np.asarray(self.ub, float)
        if not (len(self.sense) == len(self.rhs) == len(self.A)):
            raise ValueError("row data have inconsistent lengths")
        if not (np.all(np.isfinite(self.lb)) and np.all(np.isfinite(self.ub))):
            raise ValueError("LP variables need finite bounds")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.rhs))):
            raise ValueError("LP data contain non-finite values")

    @property
    def n(self) -> int:
        return len(self.c)

    @property
    def m(self) -> int:
        return len(self.rhs)

    def row_violation(self, x) -> np.ndarray:
        """Nonnegative violation of each row at x."""
        ax = self.A @ x
        v = np.zeros(self.m)
        v[self.sense == LE] = np.maximum(ax - self.rhs, 0)[self.sense == LE]
        v[self.sense == GE] = np.maximum(self.rhs - ax, 0)[self.sense == GE]
        v[self.sense == EQ] = np.abs(ax - self.rhs)[self.sense == EQ]
        return v

    def objective(self, x) -> float:
        return float(self.c @ x + self.const)


@dataclass
class LPSolution:
    status: str
    x: np.ndarray | None = None
    objective: float = float("nan")
    duals: np.ndarray | None = None
    iterations: int = 0
    backend: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def dual_bound(lp: LinearProgram, pi: np.ndarray, lb=None, ub=None) -> float:
    """Lagrangian upper bound  pi @ rhs + max_{lb<=x<=ub} (c - A^T pi) @ x."""
    lb = lp.lb if lb is None else lb
    ub = lp.ub if ub is None else ub
    d = lp.c - lp.A.T @ pi
    return float(pi @ lp.rhs + np.sum(np.maximum(d * ub, d * lb)) + lp.const)


def duality_check(lp: LinearProgram, sol: LPSolution, tol: float = 1e-6, lb=None, ub=None) -> bool:
    """Dual signs are right and the dual bound meets the primal objective."""
    if not sol.ok or sol.duals is None:
        return False
    pi = sol.duals
    scale = 1.0 + abs(sol.objective)
    if np.any(pi[lp.sense == LE] < -tol) or np.any(pi[lp.sense == GE] > tol):
        return False
    pi = pi.copy()
    pi[lp.sense == LE] = np.maximum(pi[lp.sense == LE], 0)
    pi[lp.sense == GE] = np.minimum(pi[lp.sense == GE], 0)
    return abs(dual_bound(lp, pi, lb, ub) - sol.objective) <= tol * scale


def solve_lp(lp: LinearProgram, lb=None, ub=None, backend: str = "auto", **kw) -> LPSolution:
    """Solve ``lp`` with optional replacement bounds."""
    lb = lp.lb if lb is None else np.asarray(lb, float)
    ub = lp.ub if ub is None else np.asarray(ub, float)
    if np.any(lb > ub + 1e-12):
        return LPSolution(INFEASIBLE, backend="bounds")
    if backend == "auto":
        backend = "simplex" if lp.m + lp.n <= AUTO_SIMPLEX_SIZE else "highs"
    if backend == "simplex":
        return simplex(lp.c, lp.A, lp.sense, lp.rhs, lb, ub, const=lp.const, **kw)
    if backend == "highs":
        return _solve_highs(lp, lb, ub)
    raise ValueError(f"unknown LP backend {backend!r}")


# ------------------------------------------------------------ simplex


def simplex(c, A, sense, rhs, lb, ub, const: float = 0.0, tol: float = 1e-7,
            max_iter: int | None = None, degenerate_switch: int = 25) -> LPSolution:
    """Dense two-phase tableau simplex with a Bland's-rule anti-cycling fallback.

    Variables are shifted to ``y = x - lb`` and their upper bounds become
    explicit ``<=`` rows, giving a standard form with ``y >= 0``.
    """
    c = np.asarray(c, float)
    A = np.asarray(A, float).reshape(-1, len(c))
    sense = np.asarray(sense, int)
    lb = np.asarray(lb, float)
    ub = np.asarray(ub, float)
    n, m = len(c), len(sense)
    width = ub - lb
    b0 = np.asarray(rhs, float) - A @ lb

    le_rows, le_rhs, le_src = [], [], []
    for i in range(m):
        if sense[i] == LE:
            le_rows.append(A[i]); le_rhs.append(b0[i]); le_src.append((i, 1.0))
        elif sense[i] == GE:
            le_rows.append(-A[i]); le_rhs.append(-b0[i]); le_src.append((i, -1.0))
    for j in range(n):
        e = np.zeros(n); e[j] = 1.0
        le_rows.append(e); le_rhs.append(width[j]); le_src.append((None, 1.0))
    eq_idx = [i for i in range(m) if sense[i] == EQ]
    m1, m2 = len(le_rows), len(eq_idx)
    M = m1 + m2
    S = np.zeros((M, n + m1))
    S[:m1, :n] = np.array(le_rows).reshape(m1, n)
    S[:m1, n:] = np.eye(m1)
    if m2:
        S[m1:, :n] = A[eq_idx]
    b = np.concatenate([le_rhs, b0[eq_idx]]) if M else np.zeros(0)

    flip = np.where(b < 0, -1.0, 1.0)
    S *= flip[:, None]
    b = b * flip
    need_art = [r for r in range(M) if r >= m1 or flip[r] < 0]
    n_art = len(need_art)
    N = n + m1 + n_art
    T = np.zeros((M + 1, N + 1))
    T[:M, :n + m1] = S
    T[:M, -1] = b
    basis = np.empty(M, dtype=int)
    for r in range(M):
        basis[r] = n + r
    for a, r in enumerate(need_art):
        T[r, n + m1 + a] = 1.0
        basis[r] = n + m1 + a
    art_start = n + m1

    max_iter = max_iter or 50 * (M + N + 10)
    iters = 0
    state = {"bland": False, "degenerate": 0}

    def set_cost(cost):
        T[M, :N] = cost - cost[basis] @ T[:M, :N]
        T[M, -1] = -(cost[basis] @ T[:M, -1])

    def pivot(r, s):
        T[r] /= T[r, s]
        col = T[:, s].copy()
        col[r] = 0.0
        T[:] -= np.outer(col, T[r])
        basis[r] = s

    def run(allowed):
        nonlocal iters
        while True:
            if iters >= max_iter:
                return ITERATION_LIMIT
            d = np.where(allowed, T[M, :N], 0.0)
            cand = np.flatnonzero(d > tol)
            if len(cand) == 0:
                return OPTIMAL
            s = int(cand[0]) if state["bland"] else int(cand[np.argmax(d[cand])])
            colv = T[:M, s]
            rows = np.flatnonzero(colv > 1e-9)
            if len(rows) == 0:
                return UNBOUNDED
            ratios = T[rows, -1] / colv[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12]
            r = int(ties[np.argmin(basis[ties])])
            state["degenerate"] = state["degenerate"] + 1 if best <= 1e-12 else 0
            if state["degenerate"] > degenerate_switch and not state["bland"]:
                state["bland"] = True
                log.debug("simplex: switching to Bland's rule after degenerate pivots")
            pivot(r, s)
            iters += 1

    if n_art:
        cost1 = np.zeros(N)
        cost1[art_start:] = -1.0
        set_cost(cost1)
        st = run(np.ones(N, bool))
        if st == ITERATION_LIMIT:
            return LPSolution(ITERATION_LIMIT, iterations=iters, backend="simplex")
        infeas = -T[M, -1]
        if -infeas > tol * max(1.0, np.abs(b).max(initial=0.0)):
            return LPSolution(INFEASIBLE, iterations=iters, backend="simplex")
        for r in range(M):
            if basis[r] >= art_start:
                cand = np.flatnonzero(np.abs(T[r, :art_start]) > 1e-9)
                if len(cand):
                    pivot(r, int(cand[0]))
    cost2 = np.zeros(N)
    cost2[:n] = c
    set_cost(cost2)
    allowed = np.ones(N, bool)
    allowed[art_start:] = False
    st = run(allowed)
    if st != OPTIMAL:
        return LPSolution(st, iterations=iters, backend="simplex")

    # Recompute the basic solution and duals from the original columns.
    full = np.zeros((M, N))
    full[:, :n + m1] = S
    for a, r in enumerate(need_art):
        full[r, art_start + a] = 1.0
    B = full[:, basis]
    try:
        xb = np.linalg.solve(B, b) if M else np.zeros(0)
        y_flip = np.linalg.solve(B.T, cost2[basis]) if M else np.zeros(0)
    except np.linalg.LinAlgError:
        xb = T[:M, -1]
        y_flip = None
    y = np.zeros(N)
    y[basis] = xb
    x = np.clip(lb + y[:n], lb, ub)
    duals = None
    if y_flip is not None:
        pi_std = y_flip * flip
        duals = np.zeros(m)
        for r, (src, sgn) in enumerate(le_src):
            if src is not None:
                duals[src] = sgn * pi_std[r]
        for q, i in enumerate(eq_idx):
            duals[i] = pi_std[m1 + q]
    obj = float(c @ x + const)
    return LPSolution(OPTIMAL, x, obj, duals, iters, "simplex")


# -------------------------------------------------------------- HiGHS


def _solve_highs(lp: LinearProgram, lb, ub) -> LPSolution:
    from scipy.optimize import linprog
    from scipy.sparse import csr_matrix

    if "ub" not in lp._sparse:
        le = lp.sense == LE
        ge = lp.sense == GE
        eq = lp.sense == EQ
        Aub = np.vstack([lp.A[le], -lp.A[ge]])
        bub = np.concatenate([lp.rhs[le], -lp.rhs[ge]])
        lp._sparse["ub"] = (csr_matrix(Aub) if len(bub) else None, bub if len(bub) else None)
        lp._sparse["eq"] = (csr_matrix(lp.A[eq]) if eq.any() else None, lp.rhs[eq] if eq.any() else None)
        lp._sparse["rows"] = (np.flatnonzero(le), np.flatnonzero(ge), np.flatnonzero(eq))
    Aub, bub = lp._sparse["ub"]
    Aeq, beq = lp._sparse["eq"]
    res = linprog(
        -lp.c, A_ub=Aub, b_ub=bub, A_eq=Aeq, b_eq=beq,
        bounds=np.column_stack([lb, ub]), method="highs",
        options={"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9},
    )
    if res.status == 2:
        return LPSolution(INFEASIBLE, backend="highs")
    if res.status == 3:
        return LPSolution(UNBOUNDED, backend="highs")
    if res.status != 0:
        return LPSolution(ITERATION_LIMIT, backend="highs")
    x = np.clip(res.x, lb, ub)
    le_i, ge_i, eq_i = lp._sparse["rows"]
    duals = np.zeros(lp.m)
    if Aub is not None:
        marg = -np.asarray(res.ineqlin.marginals)
        duals[le_i] = marg[:len(le_i)]
        duals[ge_i] = -marg[len(le_i):]
    if Aeq is not None:
        duals[eq_i] = -np.asarray(res.eqlin.marginals)
    return LPSolution(OPTIMAL, x, float(lp.c @ x + lp.const), duals, int(res.nit), "highs")
