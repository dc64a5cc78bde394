"""Brute-force global optima for tiny instances.

``enumerate_optimum`` fixes every indicator to a bit, linearizes each
fixed indicator by enumerating which affine piece certifies it, and
solves one LP per combination.  ``lp_vertex_optimum`` enumerates the basic
feasible points of a small LP directly.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core_model import AHSProblem
from .ipbuild import encode_prox
from .lp import EQ, GE, LE, LinearProgram, solve_lp
from .reformulation import ResolvedProblem, original_problem

TAU_STRICT = 1e-7


class OracleBudgetError(ValueError):
    pass


@dataclass(frozen=True)
class SignPattern:
    bits: tuple

    def __len__(self) -> int:
        return len(self.bits)


@dataclass
class OracleResult:
    x: np.ndarray | None
    value: float
    pattern: SignPattern | None
    lp_solves: int = 0

    @property
    def feasible(self) -> bool:
        return self.x is not None


def _alternatives(t, bit: int):
    """Row blocks (A, rhs) any one of which certifies the indicator value ``bit``.

    Rows are returned in ``A x >= rhs`` form.
    """
    f = t.inner
    A, c = f.pair_pieces()
    K, L = f.K, f.L
    if bit:
        target = t.threshold + (TAU_STRICT if t.strict else 0.0)
        return [(A[k * L:(k + 1) * L], target - c[k * L:(k + 1) * L]) for k in range(K)]
    target = t.threshold - (0.0 if t.strict else TAU_STRICT)
    out = []
    for l in range(L):
        rows = [k * L + l for k in range(K)]
        out.append((-A[rows], -(target - c[rows])))
    return out


def enumerate_optimum(problem, limit_bits: int = 16, center=None, rho: float = 0.0,
                      segments: int = 8, gamma_penalty: float | None = None,
                      lp_backend: str = "auto") -> OracleResult:
    """Global maximum of a resolved problem (or an additive original problem)."""
    if isinstance(problem, AHSProblem):
        problem = original_problem(problem)
    if not isinstance(problem, ResolvedProblem):
        raise TypeError("expected a resolved or additive problem")
    if center is None and hasattr(problem, "center"):
        center, rho = problem.center, problem.rho
    terms = list(problem.iter_terms())
    B = len(terms)
    if B > limit_bits:
        raise OracleBudgetError(f"{B} terms exceed the oracle budget of {limit_bits} bits")
    n = problem.n
    box = problem.domain
    prox = encode_prox(center, rho, box, segments) if rho > 0 and center is not None else None

    # variable layout: x, prox t's, gamma
    cols = n
    t_cols = []
    if prox is not None:
        for i, (s, _) in enumerate(prox.lines):
            if len(s):
                t_cols.append((i, cols))
                cols += 1
    g_col = -1
    if gamma_penalty is not None:
        g_col = cols
        cols += 1
    lb = np.concatenate([box.lower, [prox.lower[i] for i, _ in t_cols], [0.0] if g_col >= 0 else []])
    gmax = 1.0 + sum(abs(t.psi) for _, t in terms) + sum(
        abs(e.offset) + float(np.abs(e.linear) @ np.maximum(np.abs(box.lower), np.abs(box.upper)))
        for e in problem.constraints)
    ub = np.concatenate([box.upper, [0.0] * len(t_cols), [gmax] if g_col >= 0 else []])
    c = np.zeros(cols)
    c[:n] = problem.objective.linear
    for _, tc in t_cols:
        c[tc] = 1.0
    if g_col >= 0:
        c[g_col] = -gamma_penalty

    base_A, base_s, base_b = [], [], []
    for row, sense, rhs in box.rows:
        r = np.zeros(cols); r[:n] = row
        base_A.append(r); base_s.append({"<=": LE, ">=": GE, "==": EQ}[sense]); base_b.append(rhs)
    for i, tc in t_cols:
        s, b = prox.lines[i]
        for sk, bk in zip(s, b):
            r = np.zeros(cols); r[tc] = 1.0; r[i] = -sk
            base_A.append(r); base_s.append(LE); base_b.append(bk)
    cons_rows = []
    for e in problem.constraints:
        r = np.zeros(cols); r[:n] = e.linear
        if g_col >= 0:
            r[g_col] = 1.0
        cons_rows.append(r)

    alts = [[_alternatives(t, 0), _alternatives(t, 1)] for _, t in terms]
    psi = np.array([t.psi for _, t in terms])
    blk = np.array([k[0] for k, _ in terms], dtype=int)

    cons_max = [float(np.maximum(e.linear * box.lower, e.linear * box.upper).sum())
                for e in problem.constraints]
    lin_max = float(np.maximum(problem.objective.linear * box.lower, problem.objective.linear * box.upper).sum())
    patterns = list(itertools.product((0, 1), repeat=B))
    obj_gain = [float(np.sum(psi[(blk == 0)] * np.array(p)[blk == 0])) if B else 0.0 for p in patterns]
    order = sorted(range(len(patterns)), key=lambda q: (-obj_gain[q], patterns[q]))

    best = OracleResult(None, -math.inf, None)
    solves = 0
    for q in order:
        pat = patterns[q]
        ub_val = lin_max + problem.objective.offset + obj_gain[q]
        if best.x is not None and ub_val <= best.value + 1e-12:
            break
        bits = np.array(pat, dtype=float)
        need = [-e.offset - float(np.sum(psi[blk == i] * bits[blk == i]))
                for i, e in enumerate(problem.constraints, start=1)]
        if g_col < 0 and any(r > cmax + 1e-12 for r, cmax in zip(need, cons_max)):
            continue  # some row cannot reach its level anywhere in the box
        rows_A = list(base_A)
        rows_s = list(base_s)
        rows_b = list(base_b)
        for i, e in enumerate(problem.constraints, start=1):
            rows_A.append(cons_rows[i - 1])
            rows_s.append(GE)
            rows_b.append(-e.offset - float(np.sum(psi[blk == i] * bits[blk == i])))
        choice_lists = [alts[k][pat[k]] for k in range(B)]
        for combo in itertools.product(*choice_lists):
            A_extra = [np.hstack([a, np.zeros((len(a), cols - n))]) for a, _ in combo]
            b_extra = [r for _, r in combo]
            A = np.vstack(rows_A + A_extra) if (rows_A or A_extra) else np.zeros((0, cols))
            sense = np.array(rows_s + [GE] * sum(len(r) for r in b_extra), dtype=int)
            rhs = np.concatenate([np.array(rows_b, float)] + b_extra) if (rows_b or b_extra) else np.zeros(0)
            const = problem.objective.offset + float(np.sum(psi[blk == 0] * bits[blk == 0]))
            lp = LinearProgram(c, A, sense, rhs, lb, ub, const)
            sol = solve_lp(lp, backend=lp_backend)
            solves += 1
            if sol.ok and sol.objective > best.value + 1e-12:
                best = OracleResult(sol.x[:n].copy(), sol.objective, SignPattern(tuple(pat)))
    best.lp_solves = solves
    return best


# ------------------------------------------------------------ LP vertices


def lp_vertex_optimum(lp: LinearProgram, tol: float = 1e-9, chunk: int = 20000):
    """Best basic feasible point of a small LP by exhaustive enumeration.

    Every constraint (rows and bounds) is written as ``g @ x <= h`` and
    equality rows are always active.  Each choice of further active rows
    that pins down a unique point is solved; the batch is vectorized.
    Returns ``(status, value, x)``.
    """
    n = lp.n
    G, h, eq = [], [], []
    for i in range(lp.m):
        if lp.sense[i] == LE:
            G.append(lp.A[i]); h.append(lp.rhs[i])
        elif lp.sense[i] == GE:
            G.append(-lp.A[i]); h.append(-lp.rhs[i])
        else:
            eq.append(i)
    for j in range(n):
        e = np.zeros(n); e[j] = 1.0
        G.append(e); h.append(lp.ub[j])
        G.append(-e); h.append(-lp.lb[j])
    G, h = np.array(G), np.array(h)
    E = lp.A[eq] if eq else np.zeros((0, n))
    e_rhs = lp.rhs[eq] if eq else np.zeros(0)
    need = n - len(eq)
    if need < 0:
        raise ValueError("more equality rows than variables")
    best_val, best_x = -math.inf, None
    combos = itertools.combinations(range(len(G)), need)
    while True:
        S = np.array(list(itertools.islice(combos, chunk)), dtype=int).reshape(-1, need)
        if len(S) == 0:
            break
        M = np.concatenate([np.broadcast_to(E, (len(S),) + E.shape), G[S]], axis=1)
        r = np.concatenate([np.broadcast_to(e_rhs, (len(S), len(e_rhs))), h[S]], axis=1)
        ok = np.abs(np.linalg.det(M)) > 1e-10
        if not ok.any():
            continue
        X = np.linalg.solve(M[ok], r[ok][..., None])[..., 0]
        feas = np.all(X @ G.T <= h + tol, axis=1)
        if len(eq):
            feas &= np.all(np.abs(X @ E.T - e_rhs) <= tol, axis=1)
        if not feas.any():
            continue
        X = X[feas]
        vals = X @ lp.c + lp.const
        q = int(np.argmax(vals))
        if vals[q] > best_val:
            best_val, best_x = float(vals[q]), X[q]
    if best_x is None:
        return "Infeasible", -math.inf, None
    return "Optimal", best_val, best_x
