"""Depth-D oblique classification trees as mixed-integer programs.

Nodes use heap order: branching nodes ``0..B-1`` with children ``2k+1``
(left) and ``2k+2`` (right); leaf ``t`` is heap node ``B + t``.  A sample
goes right at node k when ``a_k @ x - b_k >= 0``.

The problem point is ``x = (a, b, c)``: ``a`` is B x p (row k is node k),
``b`` has length B and ``c`` is the J x T one-hot leaf label matrix.

Binary families per (sample s, leaf t):

* ``xi``: s reaches t with unit margin (objective);
* ``zp``: s reaches t under the closed approximation (precision numerator);
* ``zm``: written here as ``w = 1 - z^-``; ``w = 1`` certifies that s
  does not reach t even under the open approximation, so it may be left
  out of the precision denominator.

``c`` and the optional l0 indicators are always binary; only the three
families above take part in progressive fixing.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..core_model import Box, PAFunction
from ..ipbuild import FREE, LINK_MARGIN, ONE, WARM_TOL, ZERO, IndexPartition, encode_prox
from ..milp import MILPModel, ModelBuilder
from ..reformulation import ResolvedExpression, ResolvedForm, ResolvedTerm
from .data import Dataset

XI, ZP, ZM = 0, 1, 2
FAMILY_NAMES = ("xi", "zp", "zm")


@dataclass(frozen=True, eq=False)
class TreeModel:
    a: np.ndarray  # B x p
    b: np.ndarray  # B
    leaf_labels: np.ndarray  # T
    depth: int

    def margins(self, X) -> np.ndarray:
        """B x N values a_k @ x - b_k."""
        return self.a @ np.atleast_2d(np.asarray(X, float)).T - self.b[:, None]

    def route(self, X) -> np.ndarray:
        G = self.margins(X)
        B = len(self.b)
        node = np.zeros(G.shape[1], dtype=int)
        cols = np.arange(G.shape[1])
        for _ in range(self.depth):
            right = G[node, cols] >= 0
            node = np.where(right, 2 * node + 2, 2 * node + 1)
        return node - B

    def within(self, tau1: float, tau0: int | None = None, tol: float = 1e-9) -> bool:
        ok = np.all(np.abs(self.a).sum(axis=1) <= tau1 + tol) and np.all(np.abs(self.b) <= tau1 + tol)
        if tau0 is not None:
            ok = ok and np.all((np.abs(self.a) > 1e-12).sum(axis=1) <= tau0)
        return bool(ok)


def predict_tree(m: TreeModel, X) -> np.ndarray:
    return np.asarray(m.leaf_labels)[m.route(X)]


def leaf_paths(depth: int) -> list:
    """Per leaf: list of (node, sign) with sign +1 for a right turn."""
    B = 2 ** depth - 1
    out = []
    for t in range(2 ** depth):
        i, path = B + t, []
        while i > 0:
            parent = (i - 1) // 2
            path.append((parent, 1 if i == 2 * parent + 2 else -1))
            i = parent
        out.append(path[::-1])
    return out


class TreeLayout:
    def __init__(self, p: int, depth: int, J: int):
        self.p, self.depth, self.J = p, depth, J
        self.B = 2 ** depth - 1
        self.T = 2 ** depth

    @property
    def n(self) -> int:
        return self.B * self.p + self.B + self.J * self.T

    @property
    def n_cont(self) -> int:
        return self.B * self.p + self.B

    def a_slice(self) -> slice:
        return slice(0, self.B * self.p)

    def b_slice(self) -> slice:
        return slice(self.B * self.p, self.B * self.p + self.B)

    def c_slice(self) -> slice:
        return slice(self.n_cont, self.n)

    def split(self, x):
        x = np.asarray(x, float)
        a = x[self.a_slice()].reshape(self.B, self.p)
        b = x[self.b_slice()]
        c = x[self.c_slice()].reshape(self.J, self.T)
        return a, b, c

    def labels(self, x) -> np.ndarray:
        return np.argmax(self.split(x)[2], axis=0)

    def decode(self, x) -> TreeModel:
        a, b, _ = self.split(x)
        return TreeModel(a.copy(), b.copy(), self.labels(x), self.depth)

    def encode(self, m: TreeModel) -> np.ndarray:
        c = np.zeros((self.J, self.T))
        c[np.asarray(m.leaf_labels, int), np.arange(self.T)] = 1.0
        return np.concatenate([np.asarray(m.a, float).ravel(), np.asarray(m.b, float), c.ravel()])


class TreeSubproblem:
    """Tree MILP builder that also exposes the progressive-fixing protocol.

    ``selection`` (an N x T array of path positions) replaces each ``w``
    link by the one chosen path piece; ``None`` keeps the full disjunction
    with ``depth - 1`` selection binaries per (s, t).
    """

    def __init__(self, d: Dataset, depth: int, eps: float, precisions: dict | None = None,
                 tau1: float = 100.0, tau0: int | None = None, margin: float = 1.0,
                 selection=None, center=None, rho: float = 0.0, segments: int = 8,
                 gamma_penalty: float | None = None, link_margin: float = LINK_MARGIN):
        if depth < 1:
            raise ValueError("depth must be at least 1")
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.data = d
        self.lay = TreeLayout(d.p, depth, d.J)
        self.depth = depth
        self.eps = float(eps)
        self.precisions = dict(sorted((precisions or {}).items()))
        for j, beta in self.precisions.items():
            if not 0 < beta < 1:
                raise ValueError("precision thresholds must lie in (0, 1)")
        self.tau1 = float(tau1)
        self.use_l0 = d.p > 5
        self.tau0 = int(tau0 if tau0 is not None else math.ceil(d.p / 2))
        if self.use_l0 and not 1 <= self.tau0 <= d.p:
            raise ValueError("tau0 must lie in 1..p")
        self.margin = float(margin)
        self.m = link_margin
        self.selection = None if selection is None else np.asarray(selection, int)
        self.gamma_penalty = gamma_penalty
        self.paths = leaf_paths(depth)
        N, T = d.N, self.lay.T
        self.M = self.tau1 * (np.abs(d.X).max(axis=1) + 1.0) + self.margin + self.eps + 1.0
        self.center = None if center is None else np.asarray(center, float)
        self.rho = float(rho)
        self.prox = None
        if self.rho > 0 and self.center is not None:
            box = Box(-self.tau1 * np.ones(self.lay.n_cont), self.tau1 * np.ones(self.lay.n_cont))
            self.prox = encode_prox(self.center[: self.lay.n_cont], self.rho, box, segments)
        fams = [XI] + ([ZP, ZM] if self.precisions else [])
        self.keys = [(f, s, t) for f in fams for s in range(N) for t in range(T)]
        self.fam = np.array([k[0] for k in self.keys], dtype=int)
        self.blocks_of = np.where(self.fam == XI, 0, 1)
        self.signs = np.where(self.fam == ZM, -1, 1)

    # -- evaluation ------------------------------------------------------

    @property
    def n(self) -> int:
        return self.lay.n

    @property
    def n_terms(self) -> int:
        return len(self.keys)

    def margins(self, x) -> np.ndarray:
        a, b, _ = self.lay.split(x)
        return a @ self.data.X.T - b[:, None]

    def piece_values(self, G, shift_left: float) -> list:
        """Per leaf, a (path length) x N array of signed node margins.

        Left-turn pieces get ``-shift_left`` added.
        """
        out = []
        for path in self.paths:
            rows = [sg * G[k] - (shift_left if sg < 0 else 0.0) for k, sg in path]
            out.append(np.array(rows))
        return out

    def family_values(self, x) -> dict:
        G = self.margins(x)
        xi = np.stack([P.min(axis=0) for P in self.piece_values(G, 0.0)], axis=1) - self.margin
        out = {XI: xi - self.m}
        if self.precisions:
            pieces = self.piece_values(G, self.eps)
            phi = np.stack([P.min(axis=0) for P in pieces], axis=1)
            out[ZP] = phi - self.m
            if self.selection is None:
                wv = phi
            else:
                N = self.data.N
                wv = np.stack([pieces[t][self.selection[:, t], np.arange(N)] for t in range(self.lay.T)], axis=1)
            out[ZM] = -wv - self.eps - self.m
        return out

    def term_values(self, x) -> np.ndarray:
        fv = self.family_values(x)
        return np.concatenate([fv[f].ravel() for f in sorted(fv)])

    def _box_ok(self, x) -> bool:
        a, b, c = self.lay.split(x)
        tol = 1e-9
        if np.any(np.abs(a).sum(axis=1) > self.tau1 + tol) or np.any(np.abs(b) > self.tau1 + tol):
            return False
        if self.use_l0 and np.any((np.abs(a) > tol).sum(axis=1) > self.tau0):
            return False
        if np.any(np.abs(c - np.round(c)) > 1e-9) or np.any(np.abs(c.sum(axis=0) - 1) > 1e-9):
            return False
        return True

    def _counts(self, x):
        fv = self.family_values(x)
        on = {f: v >= -WARM_TOL for f, v in fv.items()}
        labels = self.lay.labels(x)
        y = self.data.y
        match = y[:, None] == labels[None, :]
        L = (on[XI] & match).sum(axis=0)
        rows = []
        for j, beta in self.precisions.items():
            at_j = labels == j
            eta = int((on[ZP][y == j][:, at_j]).sum())
            zeta = int((~on[ZM][:, at_j]).sum())
            rows.append((eta - beta * zeta, eta - 1.0))
        return L, rows

    def residual(self, x) -> float:
        _, rows = self._counts(x)
        return max([0.0] + [max(-r1, -r2) for r1, r2 in rows])

    def objective(self, x) -> float:
        x = np.asarray(x, float)
        if not self._box_ok(x):
            return -math.inf
        L, _ = self._counts(x)
        gam = self.residual(x)
        if gam > 1e-9 and self.gamma_penalty is None:
            return -math.inf
        val = math.fsum(L.tolist()) / self.data.N
        if self.prox is not None:
            val += self.prox.value(x[: self.lay.n_cont])
        if self.gamma_penalty is not None:
            val -= self.gamma_penalty * gam
        return float(val)

    def feasible(self, x) -> bool:
        return self.objective(x) > -math.inf

    # -- model ---------------------------------------------------------

    def build(self, partition: IndexPartition | None = None) -> "TreeIP":
        d, lay = self.data, self.lay
        N, T, B, p, J = d.N, lay.T, lay.B, d.p, d.J
        states = np.zeros(self.n_terms, np.int8) if partition is None else np.asarray(partition.states)
        if len(states) != self.n_terms:
            raise ValueError("partition does not match the tree terms")
        st = {f: states[self.fam == f].reshape(N, T) for f in np.unique(self.fam)}
        bld = ModelBuilder()
        tau1 = self.tau1
        a_idx = bld.add_vars("a", B * p, -tau1, tau1).reshape(B, p)
        b_idx = bld.add_vars("b", B, -tau1, tau1)
        c_idx = np.array([[bld.add_var(f"c{j}_{t}", 0, 1, binary=True, tag=("c", j, t)) for t in range(T)]
                          for j in range(J)], dtype=int)
        x_idx = np.concatenate([a_idx.ravel(), b_idx, c_idx.ravel()])
        u_idx = bld.add_vars("u", B * p, 0.0, tau1).reshape(B, p)
        for k in range(B):
            for i in range(p):
                bld.add_row([a_idx[k, i], u_idx[k, i]], [1.0, -1.0], "<=", 0.0)
                bld.add_row([a_idx[k, i], u_idx[k, i]], [-1.0, -1.0], "<=", 0.0)
            bld.add_row(list(u_idx[k]), [1.0] * p, "<=", tau1)
        om_idx = None
        if self.use_l0:
            om_idx = np.array([[bld.add_var(f"om{k}_{i}", 0, 1, binary=True, tag=("l0", k, i)) for i in range(p)]
                               for k in range(B)], dtype=int)
            for k in range(B):
                for i in range(p):
                    bld.add_row([u_idx[k, i], om_idx[k, i]], [1.0, -tau1], "<=", 0.0)
                bld.add_row(list(om_idx[k]), [1.0] * p, "<=", float(self.tau0))
        for t in range(T):
            bld.add_row(list(c_idx[:, t]), [1.0] * J, "==", 1.0)
        gamma_idx = -1
        if self.gamma_penalty is not None:
            gamma_idx = bld.add_var("gamma", 0.0, 2.0 * N, obj=-self.gamma_penalty)
        t_idx = np.zeros(0, int)
        if self.prox is not None:
            t_idx = np.array([bld.add_var(f"t{i}", self.prox.lower[i], 0.0, obj=1.0)
                              for i in range(lay.n_cont) if len(self.prox.lines[i][0])], dtype=int)
            coords = [i for i in range(lay.n_cont) if len(self.prox.lines[i][0])]
            for ti, i in zip(t_idx, coords):
                s_, c_ = self.prox.lines[i]
                for sk, ck in zip(s_, c_):
                    bld.add_row([ti, x_idx[i]], [1.0, -sk], "<=", ck)

        X = d.X
        var = {f: -np.ones((N, T), dtype=int) for f in (XI, ZP, ZM)}
        sel_idx = {}

        def piece(s, k, sg):
            """Indices and coefficients of sg * (a_k @ X_s - b_k)."""
            nz = np.flatnonzero(X[s])
            return list(a_idx[k, nz]) + [b_idx[k]], list(sg * X[s, nz]) + [-sg]

        def ge_row(idx, coef, rhs, binv, M):
            # idx @ coef >= rhs, relaxed by M when binv == 0
            if binv is None:
                bld.add_row(idx, coef, ">=", rhs)
            else:
                bld.add_row(idx + [binv], coef + [-M], ">=", rhs - M)

        for f, name in ((XI, "xi"), (ZP, "zp")):
            if f not in st:
                continue
            for s in range(N):
                for t in range(T):
                    state = st[f][s, t]
                    if state == ZERO:
                        continue
                    zb = None
                    if state == FREE:
                        zb = bld.add_var(f"{name}{s}_{t}", 0, 1, binary=True, tag=(name, s, t))
                        var[f][s, t] = zb
                    for k, sg in self.paths[t]:
                        idx, coef = piece(s, k, sg)
                        if f == XI:
                            rhs = self.margin + self.m
                        else:
                            rhs = self.m + (self.eps if sg < 0 else 0.0)
                        ge_row(idx, coef, rhs, zb, self.M[s])
        if ZM in st:
            for s in range(N):
                for t in range(T):
                    state = st[ZM][s, t]
                    if state == ZERO:
                        continue
                    wb = None
                    if state == FREE:
                        wb = bld.add_var(f"w{s}_{t}", 0, 1, binary=True, tag=("zm", s, t))
                        var[ZM][s, t] = wb
                    path = self.paths[t]
                    M = self.M[s]

                    def neg_piece(g):
                        # -(piece_g) >= eps + m, where piece has -eps on left turns
                        k, sg = path[g]
                        idx, coef = piece(s, k, -sg)
                        return idx, coef, self.m + (0.0 if sg < 0 else self.eps)

                    if self.selection is not None or len(path) == 1:
                        g = 0 if self.selection is None else int(self.selection[s, t])
                        idx, coef, rhs = neg_piece(g)
                        ge_row(idx, coef, rhs, wb, M)
                        continue
                    ys = [bld.add_var(f"y{s}_{t}_{g}", 0, 1, binary=True, tag=("sel", s, t, g))
                          for g in range(len(path) - 1)]
                    sel_idx[(s, t)] = ys
                    if wb is None:
                        bld.add_row(ys, [1.0] * len(ys), "<=", 1.0)
                    else:
                        bld.add_row(ys + [wb], [1.0] * len(ys) + [-1.0], "<=", 0.0)
                    for g in range(len(path)):
                        idx, coef, rhs = neg_piece(g)
                        if g < len(path) - 1:
                            bld.add_row(idx + [ys[g]], coef + [-M], ">=", rhs - M)
                        else:
                            extra_i = list(ys) + ([wb] if wb is not None else [])
                            extra_c = [M] * len(ys) + ([-M] if wb is not None else [])
                            bld.add_row(idx + extra_i, coef + extra_c, ">=", rhs - (M if wb is not None else 0.0))

        y = d.y
        # a sample reaches one leaf, so at most one xi / zp per sample and
        # at least one leaf without a w certificate
        for f in (XI, ZP):
            if f not in st:
                continue
            for s in range(N):
                frees = [int(v) for v in var[f][s] if v >= 0]
                ones = int(np.sum(st[f][s] == ONE))
                if frees:
                    bld.add_row(frees, 1.0, "<=", 1.0 - ones)
        if ZM in st:
            for s in range(N):
                frees = [int(v) for v in var[ZM][s] if v >= 0]
                ones = int(np.sum(st[ZM][s] == ONE))
                if frees:
                    bld.add_row(frees, 1.0, "<=", T - 1.0 - ones)

        # L[t, j]: correctly classified margin samples of class j at leaf t
        L_idx = bld.add_vars("L", T * J, 0.0, float(N)).reshape(T, J)
        for t in range(T):
            for j in range(J):
                bld.add_obj(L_idx[t, j], 1.0 / N)
                nj = int(np.sum(y == j))
                bld.add_row([L_idx[t, j], c_idx[j, t]], [1.0, -float(nj)], "<=", 0.0)
                ones = int(np.sum((st[XI][:, t] == ONE) & (y == j)))
                frees = [int(var[XI][s, t]) for s in range(N) if y[s] == j and var[XI][s, t] >= 0]
                bld.add_row([L_idx[t, j]] + frees, [1.0] + [-1.0] * len(frees), "<=", float(ones))
        eta_idx, zeta_idx = {}, {}
        for j, beta in self.precisions.items():
            eta_idx[j] = bld.add_vars(f"eta{j}_", T, 0.0, float(N))
            zeta_idx[j] = bld.add_vars(f"zeta{j}_", T, 0.0, float(N))
            for t in range(T):
                e, z = eta_idx[j][t], zeta_idx[j][t]
                bld.add_row([e, c_idx[j, t]], [1.0, -float(N)], "<=", 0.0)
                ones = int(np.sum((st[ZP][:, t] == ONE) & (y == j)))
                frees = [int(var[ZP][s, t]) for s in range(N) if y[s] == j and var[ZP][s, t] >= 0]
                bld.add_row([e] + frees + [c_idx[j, t]], [1.0] + [-1.0] * len(frees) + [float(N)], "<=",
                            float(N + ones))
                bld.add_row([z, c_idx[j, t]], [1.0, float(N)], ">=", 0.0)
                wones = int(np.sum(st[ZM][:, t] == ONE))
                wfree = [int(var[ZM][s, t]) for s in range(N) if var[ZM][s, t] >= 0]
                bld.add_row([z] + wfree + [c_idx[j, t]], [1.0] + [1.0] * len(wfree) + [-float(N)], ">=",
                            -float(wones))
            g = [gamma_idx] if gamma_idx >= 0 else []
            bld.add_row(list(eta_idx[j]) + list(zeta_idx[j]) + g, [1.0] * T + [-beta] * T + [1.0] * len(g), ">=", 0.0)
            bld.add_row(list(eta_idx[j]) + g, [1.0] * T + [1.0] * len(g), ">=", 1.0)
        model = bld.build(big_m=float(self.M.max()))
        return TreeIP(model, self, states, x_idx, u_idx, om_idx, var, sel_idx, L_idx, eta_idx, zeta_idx, t_idx,
                      gamma_idx)


@dataclass
class TreeIP:
    model: MILPModel
    sub: TreeSubproblem
    states: np.ndarray
    x_idx: np.ndarray
    u_idx: np.ndarray
    om_idx: np.ndarray | None
    var: dict
    sel_idx: dict
    L_idx: np.ndarray
    eta_idx: dict
    zeta_idx: dict
    t_idx: np.ndarray
    gamma_idx: int

    def extract(self, values) -> np.ndarray:
        x = np.asarray(values, float)[self.x_idx].copy()
        cs = self.sub.lay.c_slice()
        x[cs] = np.round(x[cs])
        return x

    def bits(self, values) -> dict:
        """Rounded family binaries (N x T) with fixed states filled in; zm as z^- = 1 - w."""
        v = np.asarray(values, float)
        sub = self.sub
        N, T = sub.data.N, sub.lay.T
        out = {}
        for f in np.unique(sub.fam):
            st = self.states[sub.fam == f].reshape(N, T)
            b = np.where(st == ONE, 1, 0)
            idx = self.var[f]
            free = idx >= 0
            b[free] = np.round(v[idx[free]]).astype(int)
            out[FAMILY_NAMES[f]] = (1 - b) if f == ZM else b
        return out

    def warm_start(self, x) -> np.ndarray | None:
        sub, lay = self.sub, self.sub.lay
        d = sub.data
        N, T = d.N, lay.T
        x = np.asarray(x, float)
        if not sub._box_ok(x):
            return None
        v = np.zeros(self.model.n_vars)
        v[self.x_idx] = x
        a, _, c = lay.split(x)
        v[self.u_idx.ravel()] = np.abs(a).ravel()
        if self.om_idx is not None:
            v[self.om_idx.ravel()] = (np.abs(a) > 0).ravel()
        fv = sub.family_values(x)
        bits = {}
        for f, vals in fv.items():
            st = self.states[sub.fam == f].reshape(N, T)
            on = vals >= -WARM_TOL
            if np.any((st == ONE) & ~on):
                return None
            b = np.where(st == ONE, True, np.where(st == FREE, on, False))
            bits[f] = b
            idx = self.var[f]
            free = idx >= 0
            v[idx[free]] = b[free]
        if ZM in fv:
            G = sub.margins(x)
            pieces = sub.piece_values(G, sub.eps)
            for (s, t), ys in self.sel_idx.items():
                if bits[ZM][s, t]:
                    g = int(np.argmin(pieces[t][:, s]))
                    if g < len(ys):
                        v[ys[g]] = 1.0
        labels = lay.labels(x)
        y = d.y
        for t in range(T):
            v[self.L_idx[t, labels[t]]] = np.sum(bits[XI][:, t] & (y == labels[t]))
        for j in sub.precisions:
            for t in range(T):
                if labels[t] == j:
                    v[self.eta_idx[j][t]] = np.sum(bits[ZP][y == j, t])
                    v[self.zeta_idx[j][t]] = np.sum(~bits[ZM][:, t])
        if len(self.t_idx):
            coords = [i for i in range(lay.n_cont) if len(sub.prox.lines[i][0])]
            v[self.t_idx] = sub.prox.coord_values(x[: lay.n_cont])[coords]
        if self.gamma_idx >= 0:
            v[self.gamma_idx] = max(0.0, float(np.max(self.model.lp.row_violation(v), initial=0.0)))
        return v


def build_tree_problem(d: Dataset, D: int, tau1: float = 100.0, tau0: int | None = None,
                       precisions: dict | None = None, eps: float = 1e-3, **kw) -> TreeIP:
    """Full tree MILP (with piece-selection binaries for the open links)."""
    return TreeSubproblem(d, D, eps, precisions, tau1, tau0, **kw).build()


def core_binary_counts(ip: TreeIP) -> dict:
    tags = ip.model.count_tags()
    return {k: tags.get(k, 0) for k in ("xi", "zp", "zm", "c", "sel", "l0")}


# ------------------------------------------------------------ evaluation


def tree_feasible_original(m: TreeModel, d: Dataset, precisions: dict) -> bool:
    """Exact precision rows under true routing; every constrained class predicted at least once."""
    pred = predict_tree(m, d.X)
    for j, beta in precisions.items():
        npred = int(np.sum(pred == j))
        ncorr = int(np.sum((pred == j) & (d.y == j)))
        if npred < 1 or ncorr - beta * npred < 0:
            return False
    return True


def tree_margin_objective(m: TreeModel, d: Dataset, margin: float = 1.0) -> float:
    """Fraction of samples that reach a leaf of their own class with the margin at every node."""
    G = m.margins(d.X)
    leaf = m.route(d.X)
    paths = leaf_paths(m.depth)
    count = 0
    for s in range(d.N):
        t = leaf[s]
        if m.leaf_labels[t] != d.y[s]:
            continue
        if min(sg * G[k, s] for k, sg in paths[t]) - margin >= 0:
            count += 1
    return count / d.N


def routing_consistent(ip: TreeIP, values) -> tuple[bool, list]:
    """Check the IP's family bits against routing of the decoded tree.

    Every xi or zp bit equal to one must point at the sample's actual
    leaf, and the denominator bit z^- must be one at the actual leaf.
    Returns (ok, offending (family, s, t) list).
    """
    sub = ip.sub
    x = ip.extract(values)
    m = sub.lay.decode(x)
    leaf = m.route(sub.data.X)
    bits = ip.bits(values)
    bad = []
    for name in ("xi", "zp"):
        if name in bits:
            for s, t in zip(*np.nonzero(bits[name])):
                if leaf[s] != t:
                    bad.append((name, int(s), int(t)))
    if "zm" in bits:
        for s in range(sub.data.N):
            if bits["zm"][s, leaf[s]] != 1:
                bad.append(("zm", s, int(leaf[s])))
    return not bad, bad


# ----------------------------------------------------------- warm start


def tree_warm_start(d: Dataset, depth: int, tau1: float = 100.0, seed: int = 0) -> np.ndarray:
    """Axis-aligned CART tree completed to full depth and scaled by tau1.

    Missing splits send everyone right (a = 0, b < 0) and both children
    inherit the parent's majority class.
    """
    from sklearn.tree import DecisionTreeClassifier

    lay = TreeLayout(d.p, depth, d.J)
    clf = DecisionTreeClassifier(max_depth=depth, random_state=seed).fit(d.X, d.y)
    tr = clf.tree_
    a = np.zeros((lay.B, d.p))
    b = np.zeros(lay.B)
    labels = np.zeros(lay.T, dtype=int)
    majority = lambda node: int(clf.classes_[int(np.argmax(tr.value[node][0]))])

    def fill(heap: int, node: int | None, cls: int):
        if heap >= lay.B:
            labels[heap - lay.B] = cls if node is None else majority(node)
            return
        if node is None or tr.children_left[node] == -1:
            c = cls if node is None else majority(node)
            a[heap] = 0.0
            b[heap] = -0.5 * tau1
            fill(2 * heap + 1, None, c)
            fill(2 * heap + 2, None, c)
            return
        f, thr = int(tr.feature[node]), float(tr.threshold[node])
        scale = tau1 / max(1.0, abs(thr))
        a[heap, f] = scale
        b[heap] = thr * scale
        c = majority(node)
        fill(2 * heap + 1, int(tr.children_left[node]), c)
        fill(2 * heap + 2, int(tr.children_right[node]), c)

    fill(0, 0, majority(0))
    return lay.encode(TreeModel(a, b, labels, depth))


# -------------------------------------------------------------- adapter


class TreeAdapter:
    """Outer-loop adapter for the tree problem."""

    def __init__(self, d: Dataset, depth: int, precisions: dict | None = None, tau1: float = 100.0,
                 tau0: int | None = None, margin: float = 1.0, x_start=None, seed: int = 0):
        self.data, self.depth = d, depth
        self.precisions = dict(precisions or {})
        self.tau1, self.tau0, self.margin = tau1, tau0, margin
        self.lay = TreeLayout(d.p, depth, d.J)
        self._start = x_start
        self.seed = seed

    @property
    def n(self) -> int:
        return self.lay.n

    def default_start(self) -> np.ndarray:
        if self._start is None:
            self._start = tree_warm_start(self.data, self.depth, self.tau1, self.seed)
        return np.array(self._start, float)

    def _sub(self, eps, selection=None, center=None, rho=0.0, segments=8, gamma_penalty=None):
        return TreeSubproblem(self.data, self.depth, eps, self.precisions, self.tau1, self.tau0, self.margin,
                              selection, center, rho, segments, gamma_penalty)

    def theta(self, x, eps: float) -> float:
        return tree_margin_objective(self.lay.decode(x), self.data, self.margin)

    def feasible(self, x, eps: float) -> bool:
        sub = self._sub(eps)
        if not sub._box_ok(np.asarray(x, float)):
            return False
        G = sub.margins(x)
        pieces = sub.piece_values(G, eps)
        phi = np.stack([P.min(axis=0) for P in pieces], axis=1)
        labels = self.lay.labels(x)
        y = self.data.y
        for j, beta in self.precisions.items():
            at = labels == j
            num = int(np.sum(phi[y == j][:, at] >= 0))
            den = int(np.sum(phi[:, at] > -eps))
            if num < 1 or num - beta * den < 0:
                return False
        return True

    def theta_original(self, x) -> float:
        return self.theta(x, 0.0)

    def feasible_original(self, x) -> bool:
        sub = self._sub(1.0)
        if not sub._box_ok(np.asarray(x, float)):
            return False
        return tree_feasible_original(self.lay.decode(x), self.data, self.precisions)

    def objective_bound(self, x) -> float:
        return 1.0

    def _active(self, x, eps, delta):
        if not self.precisions:
            return []
        sub = self._sub(eps)
        pieces = sub.piece_values(sub.margins(x), eps)
        out = []
        for s in range(self.data.N):
            for t in range(self.lay.T):
                col = pieces[t][:, s]
                out.append(tuple(int(g) for g in np.flatnonzero(col <= col.min() + delta)))
        return out

    def count_selections(self, x, eps, delta) -> int:
        return math.prod(len(a) for a in self._active(x, eps, delta))

    def selections(self, x, eps, delta, mode) -> list:
        act = self._active(x, eps, delta)
        N, T = self.data.N, self.lay.T
        if not act:
            return [np.zeros((N, T), dtype=int)]
        combos = [tuple(a[0] for a in act)] if mode == "single" else itertools.product(*act)
        return [np.array(c, dtype=int).reshape(N, T) for c in combos]

    @staticmethod
    def describe(sel) -> list:
        return np.asarray(sel).tolist()

    def subproblem(self, eps, sel, center, rho, segments, gamma_penalty=None):
        return self._sub(eps, sel, center, rho, segments, gamma_penalty)

    def singleton(self, x, eps) -> bool:
        return self.count_selections(x, eps, 0.0) == 1

    def zero_negative_empty(self, x):
        return None


def fixed_label_problem(d: Dataset, depth: int, labels, eps: float, precisions: dict | None = None,
                        tau1: float = 100.0, margin: float = 1.0) -> ResolvedForm:
    """The approximated tree problem with leaf labels fixed, as a resolved problem.

    Variables are ``(a, b, u)`` with ``-u <= a <= u`` and row sums of ``u``
    bounded by tau1.  Used as a brute-force reference on tiny trees.
    """
    lay = TreeLayout(d.p, depth, d.J)
    B, p, N = lay.B, d.p, d.N
    n = 2 * B * p + B
    paths = leaf_paths(depth)
    labels = np.asarray(labels, int)

    def node_piece(s, k, sg, shift):
        a = np.zeros(n)
        a[k * p:(k + 1) * p] = sg * d.X[s]
        a[B * p + k] = -sg
        return a, -shift

    obj = []
    for t in range(lay.T):
        for s in range(N):
            if d.y[s] == labels[t]:
                pcs = [node_piece(s, k, sg, margin) for k, sg in paths[t]]
                obj.append(ResolvedTerm(1.0 / N, PAFunction.pure_min(pcs), 0.0, False))
    cons = []
    for j, beta in (precisions or {}).items():
        num, den = [], []
        for t in range(lay.T):
            if labels[t] != j:
                continue
            for s in range(N):
                pcs = [node_piece(s, k, sg, eps if sg < 0 else 0.0) for k, sg in paths[t]]
                f = PAFunction.pure_min(pcs)
                if d.y[s] == j:
                    num.append(ResolvedTerm(1.0, f, 0.0, False))
                den.append(ResolvedTerm(-beta, f, -eps, True))
        cons.append(ResolvedExpression(np.zeros(n), 0.0, tuple(num + den)))
        cons.append(ResolvedExpression(np.zeros(n), -1.0, tuple(num)))
    lo = np.concatenate([-tau1 * np.ones(B * p), -tau1 * np.ones(B), np.zeros(B * p)])
    hi = tau1 * np.ones(n)
    rows = []
    for k in range(B):
        r = np.zeros(n)
        for i in range(p):
            ai, ui = k * p + i, B * p + B + k * p + i
            e = np.zeros(n); e[ai] = 1.0; e[ui] = -1.0
            rows.append((e, "<=", 0.0))
            e = np.zeros(n); e[ai] = -1.0; e[ui] = -1.0
            rows.append((e, "<=", 0.0))
            r[ui] = 1.0
        rows.append((r, "<=", tau1))
    z = np.zeros(n)
    return ResolvedForm(ResolvedExpression(z, 0.0, tuple(obj)), tuple(cons), Box(lo, hi, rows), eps)
