"""Big-M integer programs for resolved Heaviside problems.

Each resolved term gets one binary ``z``:

* positive coefficient: ``z = 1`` forces ``f(x) >= threshold + margin``
  and contributes ``psi * z``;
* negative coefficient: ``z = 1`` forces ``f(x) <= threshold - margin``,
  certifying that the indicator is zero, and contributes
  ``psi + |psi| * z``.

Setting ``z = 0`` is always allowed and pessimistic, and every binary has a
nonnegative coefficient in the objective and the constraint rows, so the
best binaries for a fixed ``x`` are "one whenever the link allows it".
``margin`` keeps exact sign evaluation of a returned point consistent with
its binaries despite floating-point rounding.

When the inequality ``f >= c`` (or ``f <= c``) is not convex because the
function has several pieces on the relevant side, extra selection binaries
choose which piece certifies it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core_model import Box, eval_pa
from .milp import MILPModel, ModelBuilder
from .reformulation import DecomposedProblem, ResolvedProblem

LINK_MARGIN = 1e-8
WARM_TOL = 1e-10
FREE, ONE, ZERO = 0, 1, 2
STATE_NAMES = {FREE: "free", ONE: "one", ZERO: "zero"}


def interval_bound(A: np.ndarray, c: np.ndarray, lower, upper) -> float:
    """max over rows and over the box of |A[r] @ x + c[r]|."""
    lo = c + np.minimum(A * lower, A * upper).sum(axis=1)
    hi = c + np.maximum(A * lower, A * upper).sum(axis=1)
    return float(max(np.abs(lo).max(initial=0.0), np.abs(hi).max(initial=0.0)))


def term_bound(f, box: Box) -> float:
    A, c = f.pair_pieces()
    return interval_bound(A, c, box.lower, box.upper)


def compute_bigM(problem: ResolvedProblem, inflate: float = 1.05) -> float:
    """Uniform bound on |inner function| over the box, inflated by 5%."""
    box = problem.domain
    vals = [term_bound(t.inner, box) for _, t in problem.iter_terms()]
    return inflate * max(vals, default=0.0)


# ---------------------------------------------------------------- prox


@dataclass(frozen=True, eq=False)
class ProxEncoding:
    """Piecewise-linear stand-in for -(rho/2)||x - center||^2.

    Per coordinate the function is the chord interpolant of the quadratic
    through breakpoints that include the center, so it equals the
    quadratic at every breakpoint and lies below it in between.
    """

    center: np.ndarray
    rho: float
    lines: tuple  # per coordinate: (slopes, intercepts), empty arrays if fixed
    lower: np.ndarray

    def value(self, x) -> float:
        x = np.asarray(x, float)
        tot = 0.0
        for i, (s, b) in enumerate(self.lines):
            if len(s):
                tot += float(np.min(s * x[i] + b))
        return tot

    def coord_values(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        return np.array([float(np.min(s * x[i] + b)) if len(s) else 0.0 for i, (s, b) in enumerate(self.lines)])

    def penalty(self, x) -> float:
        """Nonnegative penalty, zero at the center."""
        return -self.value(x)

    @property
    def n_cuts(self) -> int:
        return sum(len(s) for s, _ in self.lines)


def encode_prox(center, rho: float, box: Box, segments: int = 8) -> ProxEncoding | None:
    if segments < 1 or rho < 0:
        raise ValueError("segments must be >= 1 and rho >= 0")
    if rho == 0:
        return None
    center = np.clip(np.asarray(center, float), box.lower, box.upper)
    lines, lower = [], []
    for c, lo, hi in zip(center, box.lower, box.upper):
        pts = []
        if c > lo:
            pts.extend(np.linspace(lo, c, segments + 1)[:-1])
        pts.append(c)
        if hi > c:
            pts.extend(np.linspace(c, hi, segments + 1)[1:])
        pts = np.array(pts)
        gap = 1e-9 * max(1.0, hi - lo)
        keep = (np.abs(pts - c) > gap) | (pts == c)
        pts = pts[keep]
        pts = pts[np.concatenate([[True], np.diff(pts) > gap])]
        f = -0.5 * rho * (pts - c) ** 2
        if len(pts) < 2:
            lines.append((np.zeros(0), np.zeros(0)))
            lower.append(0.0)
            continue
        s = np.diff(f) / np.diff(pts)
        b = f[:-1] - s * pts[:-1]
        lines.append((s, b))
        lower.append(float(f.min()))
    center.setflags(write=False)
    return ProxEncoding(center, float(rho), tuple(lines), np.array(lower))


# ------------------------------------------------------------ partition


@dataclass(frozen=True, eq=False)
class IndexPartition:
    """Per-term binary state: FREE, ONE (fixed to one) or ZERO (fixed to zero)."""

    states: np.ndarray
    thresholds: dict = field(default_factory=dict)

    @classmethod
    def all_free(cls, n_terms: int) -> "IndexPartition":
        return cls(np.zeros(n_terms, dtype=np.int8))

    def counts(self) -> dict:
        return {STATE_NAMES[s]: int(np.sum(self.states == s)) for s in (FREE, ONE, ZERO)}

    def families(self, signs) -> dict:
        """Sizes of the six (state, sign) families."""
        out = {}
        for s in (FREE, ONE, ZERO):
            for sg, lab in ((1, "+"), (-1, "-")):
                out[f"{STATE_NAMES[s]}{lab}"] = int(np.sum((self.states == s) & (np.asarray(signs) == sg)))
        return out


# ------------------------------------------------------------ subproblem


@dataclass
class HeavisideIP:
    """A built model plus the maps between problem points and model vectors."""

    model: MILPModel
    sub: "HeavisideSubproblem"
    states: np.ndarray
    x_idx: np.ndarray
    z_idx: np.ndarray  # -1 where the term has no binary
    sel_idx: list  # per term, selection binaries (possibly empty)
    t_idx: np.ndarray
    gamma_idx: int
    agg_rows: dict  # block -> row index

    def extract(self, values) -> np.ndarray:
        return np.asarray(values, float)[self.x_idx].copy()

    def warm_start(self, x) -> np.ndarray | None:
        """Model vector for point x with every binary set as high as the links allow."""
        sub = self.sub
        x = np.asarray(x, float)
        v = np.zeros(self.model.n_vars)
        v[self.x_idx] = x
        vals = sub.term_values(x)
        for q, t in enumerate(sub.terms):
            st = self.states[q]
            on = vals[q] >= -WARM_TOL
            if st == ONE and not on:
                return None
            if st == FREE:
                v[self.z_idx[q]] = 1.0 if on else 0.0
            if self.sel_idx[q] and (on or st == ONE):
                if sub.signs[q] > 0:
                    pick = int(np.argmax(t.inner.cvx_values(x)))
                else:
                    pick = int(np.argmin(t.inner.cve_values(x)))
                if pick < len(self.sel_idx[q]):
                    v[self.sel_idx[q][pick]] = 1.0
        if len(self.t_idx):
            v[self.t_idx] = sub.prox.coord_values(x)[sub.prox_coords]
        if self.gamma_idx >= 0:
            viol = self.model.lp.row_violation(v)
            need = max((viol[r] for r in self.agg_rows.values()), default=0.0)
            v[self.gamma_idx] = need
        return v


class HeavisideSubproblem:
    """A resolved problem with optional proximal term and residual variable.

    This is the object the progressive fixing loop works on: it exposes per
    term link slacks at a point, builds the partial IP for a partition, and
    evaluates the objective the IP assigns to a point.
    """

    def __init__(self, problem: ResolvedProblem, center=None, rho: float | None = None,
                 segments: int = 8, gamma_penalty: float | None = None,
                 big_m: float | None = None, margin: float = LINK_MARGIN):
        self.problem = problem
        if isinstance(problem, DecomposedProblem):
            center = problem.center if center is None else center
            rho = problem.rho if rho is None else rho
        rho = 0.0 if rho is None else float(rho)
        self.center = None if center is None else np.asarray(center, float)
        self.rho = rho
        self.prox = encode_prox(self.center, rho, problem.domain, segments) if rho > 0 and center is not None else None
        self.prox_coords = np.array([i for i, (s, _) in enumerate(self.prox.lines) if len(s)], dtype=int) if self.prox else np.zeros(0, int)
        self.gamma_penalty = gamma_penalty
        self.margin = margin
        self.keys, self.terms, self.blocks_of, self.signs = [], [], [], []
        for key, t in problem.iter_terms():
            self.keys.append(key)
            self.terms.append(t)
            self.blocks_of.append(key[0])
            self.signs.append(1 if t.psi > 0 else -1)
        self.signs = np.array(self.signs, dtype=int)
        self.blocks_of = np.array(self.blocks_of, dtype=int)
        box = problem.domain
        self.term_m = np.array([
            (big_m if big_m is not None else 1.05 * term_bound(t.inner, box)) + abs(t.threshold) + margin
            for t in self.terms
        ])
        self.big_m = float(self.term_m.max(initial=0.0))
        self._gamma_ub = self._gamma_bound() if gamma_penalty is not None else 0.0

    # -- evaluation -------------------------------------------------------

    @property
    def n(self) -> int:
        return self.problem.n

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    def term_values(self, x) -> np.ndarray:
        """Slack of each term's z = 1 link at x (>= 0 means z = 1 is allowed)."""
        x = np.asarray(x, float)
        out = np.empty(len(self.terms))
        for q, t in enumerate(self.terms):
            f = eval_pa(t.inner, x)
            if self.signs[q] > 0:
                out[q] = f - t.threshold - self.margin
            else:
                out[q] = t.threshold - self.margin - f
        return out

    def contributions(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Per-block Heaviside sums at x under the IP's view of the binaries."""
        vals = self.term_values(x)
        on = vals >= -WARM_TOL
        psi = np.array([t.psi for t in self.terms])
        contrib = np.where(self.signs > 0, psi * on, psi * (~on))
        nb = len(self.problem.blocks)
        return np.bincount(self.blocks_of, weights=contrib, minlength=nb) if len(contrib) else np.zeros(nb), vals

    def residual(self, x) -> float:
        """Smallest gamma making every constraint row hold at x."""
        x = np.asarray(x, float)
        sums, _ = self.contributions(x)
        worst = 0.0
        for i, e in enumerate(self.problem.constraints, start=1):
            worst = max(worst, -(e.affine_value(x) + sums[i]))
        return worst

    def objective(self, x) -> float:
        """Objective the all-free IP assigns to x; -inf if x is not IP-feasible."""
        x = np.asarray(x, float)
        if not self.problem.domain.contains(x, 1e-9):
            return -math.inf
        sums, _ = self.contributions(x)
        gam = self.residual(x)
        if gam > 1e-9 and self.gamma_penalty is None:
            return -math.inf
        val = self.problem.objective.affine_value(x) + sums[0]
        if self.prox is not None:
            val += self.prox.value(x)
        if self.gamma_penalty is not None:
            val -= self.gamma_penalty * gam
        return float(val)

    def feasible(self, x) -> bool:
        return self.objective(x) > -math.inf

    def _gamma_bound(self) -> float:
        box = self.problem.domain
        worst = 0.0
        for e in self.problem.constraints:
            lo = e.offset + float(np.minimum(e.linear * box.lower, e.linear * box.upper).sum())
            lo += sum(min(t.psi, 0.0) for t in e.terms)
            worst = max(worst, -lo)
        return worst + 1.0

    # -- model construction ---------------------------------------------

    def build(self, partition: IndexPartition | None = None) -> HeavisideIP:
        p = self.problem
        states = np.zeros(self.n_terms, np.int8) if partition is None else np.asarray(partition.states)
        if len(states) != self.n_terms:
            raise ValueError("partition does not match the subproblem terms")
        box = p.domain
        b = ModelBuilder()
        x_idx = b.add_vars("x", p.n, box.lower, box.upper)
        for row, sense, rhs in box.rows:
            nz = np.flatnonzero(row)
            b.add_row(x_idx[nz], row[nz], sense, rhs)
        gamma_idx = -1
        if self.gamma_penalty is not None:
            gamma_idx = b.add_var("gamma", 0.0, self._gamma_ub, obj=-self.gamma_penalty)
        t_idx = np.zeros(0, int)
        if self.prox is not None:
            t_idx = np.array([b.add_var(f"t{i}", self.prox.lower[i], 0.0, obj=1.0) for i in self.prox_coords], dtype=int)
            for ti, i in zip(t_idx, self.prox_coords):
                s, c = self.prox.lines[i]
                for sk, ck in zip(s, c):
                    b.add_row([ti, x_idx[i]], [1.0, -sk], "<=", ck)

        nblocks = len(p.blocks)
        agg = [dict() for _ in range(nblocks)]  # var -> coef
        const = np.zeros(nblocks)
        z_idx = -np.ones(self.n_terms, dtype=int)
        sel_idx: list = [[] for _ in range(self.n_terms)]
        for q, t in enumerate(self.terms):
            i, j = self.keys[q]
            st = states[q]
            sg = self.signs[q]
            if st == FREE:
                z = b.add_var(f"z{i}_{j}", 0, 1, binary=True, tag=("term", i, j))
                z_idx[q] = z
                agg[i][z] = abs(t.psi)
                if sg < 0:
                    const[i] += t.psi
                sel_idx[q] = self._link(b, x_idx, t, sg, self.term_m[q], z, i, j)
            elif st == ONE:
                if sg > 0:
                    const[i] += t.psi
                sel_idx[q] = self._link(b, x_idx, t, sg, self.term_m[q], None, i, j)
            elif sg < 0:
                const[i] += t.psi

        e0 = p.objective
        for k in range(p.n):
            b.add_obj(x_idx[k], e0.linear[k])
        for var, coef in agg[0].items():
            b.add_obj(var, coef)
        b.const = e0.offset + const[0]
        agg_rows = {}
        for i, e in enumerate(p.constraints, start=1):
            nz = np.flatnonzero(e.linear)
            idx = list(x_idx[nz]) + list(agg[i].keys())
            coef = list(e.linear[nz]) + list(agg[i].values())
            if gamma_idx >= 0:
                idx.append(gamma_idx)
                coef.append(1.0)
            agg_rows[i] = b.add_row(idx, coef, ">=", -e.offset - const[i])
        model = b.build(big_m=self.big_m)
        return HeavisideIP(model, self, states, x_idx, z_idx, sel_idx, t_idx, gamma_idx, agg_rows)

    def _link(self, b: ModelBuilder, x_idx, t, sign: int, M: float, z, i: int, j: int) -> list:
        """Rows for z = 1 (or always, when z is None).  Returns selection binaries."""
        f = t.inner
        A, c = f.pair_pieces()  # row k*L + l
        K, L = f.K, f.L
        m = self.margin
        if sign > 0:
            # f >= thr + m  <=>  exists k: for all l, A[k,l] x + c >= thr + m
            groups = [list(range(k * L, (k + 1) * L)) for k in range(K)]
            target = t.threshold + m
            dirn = 1.0
        else:
            # f <= thr - m  <=>  exists l: for all k, A[k,l] x + c <= thr - m
            groups = [[k * L + l for k in range(K)] for l in range(L)]
            target = t.threshold - m
            dirn = -1.0
        sels = []
        if len(groups) > 1:
            sels = [int(b.add_var(f"y{i}_{j}_{g}", 0, 1, binary=True, tag=("sel", i, j, g))) for g in range(len(groups) - 1)]
            # sum of explicit selections <= z (or 1)
            if z is None:
                b.add_row(sels, 1.0, "<=", 1.0)
            else:
                b.add_row(sels + [z], [1.0] * len(sels) + [-1.0], "<=", 0.0)
        for g, rows in enumerate(groups):
            for r in rows:
                nz = np.flatnonzero(A[r])
                idx = list(x_idx[nz])
                coef = list(dirn * A[r][nz])
                rhs = dirn * (target - c[r])
                # dirn * (A x + c) >= dirn * target - M * (1 - active)
                if len(groups) == 1:
                    if z is not None:
                        idx.append(z); coef.append(-M); rhs -= M
                else:
                    if g < len(groups) - 1:
                        idx.append(sels[g]); coef.append(-M); rhs -= M
                    else:
                        # active = z - sum(sels)  (or 1 - sum(sels))
                        idx += sels; coef += [M] * len(sels)
                        if z is not None:
                            idx.append(z); coef.append(-M); rhs -= M
                b.add_row(idx, coef, ">=", rhs)
        return sels

    # -- diagnostics ------------------------------------------------------

    def bigm_violations(self, ip: HeavisideIP, values) -> list:
        """Objective terms left at z = 0 although their link holds at the returned x.

        A non-empty list means the solve was not optimal or M was too small.
        """
        x = ip.extract(values)
        vals = self.term_values(x)
        bad = []
        for q in range(self.n_terms):
            zq = ip.z_idx[q]
            if zq >= 0 and self.blocks_of[q] == 0 and round(values[zq]) == 0 and vals[q] >= 1e-7:
                bad.append(self.keys[q])
        return bad
