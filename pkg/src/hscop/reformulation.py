"""Epsilon approximation, product reduction and piece decomposition.

Every transformed problem is a :class:`ResolvedProblem`: expressions whose
terms carry an explicit indicator threshold.  A resolved term contributes
``psi * 1[f(x) >= threshold]`` (closed) or ``psi * 1[f(x) > threshold]``
(strict).

* Positive coefficients always get a closed indicator at zero.  An
  originally open positive term ``1[f > 0]`` becomes ``1[f - eps >= 0]``.
* Negative coefficients get the open indicator ``1[f > -eps]``.

Both rules give a minorant of the original problem that increases as
``eps`` shrinks.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from .core_model import (
    AHSProblem,
    Box,
    HeavisideTerm,
    MHSTerm,
    ModelError,
    OuterKind,
    PAFunction,
    TAU_FEAS,
    eval_expression,
    eval_pa,
    indicator,
)


@dataclass(frozen=True, eq=False)
class ResolvedTerm:
    psi: float
    inner: PAFunction
    threshold: float = 0.0
    strict: bool = False

    def indicator(self, x) -> int:
        return indicator(eval_pa(self.inner, x), self.threshold, self.strict)

    def value(self, x) -> float:
        return self.psi * self.indicator(x)


@dataclass(frozen=True, eq=False)
class ResolvedExpression:
    linear: np.ndarray
    offset: float
    terms: tuple

    def affine_value(self, x) -> float:
        return math.fsum((*(self.linear * x).tolist(), self.offset))

    def value(self, x) -> float:
        x = np.asarray(x, float)
        return self.affine_value(x) + math.fsum(t.value(x) for t in self.terms)


class ResolvedProblem:
    """Shared evaluation for epsilon-approximated and decomposed problems."""

    objective: ResolvedExpression
    constraints: tuple
    domain: Box
    eps: float

    @property
    def n(self) -> int:
        return self.domain.n

    @property
    def blocks(self) -> tuple:
        return (self.objective, *self.constraints)

    def iter_terms(self):
        for i, e in enumerate(self.blocks):
            for j, t in enumerate(e.terms):
                yield (i, j), t

    def n_terms(self) -> int:
        return sum(len(e.terms) for e in self.blocks)

    def theta(self, x) -> float:
        return self.objective.value(x)

    def feasible(self, x, tol: float = TAU_FEAS) -> bool:
        x = np.asarray(x, float)
        if not self.domain.contains(x, tol):
            return False
        return all(c.value(x) >= -tol for c in self.constraints)

    def upper_bound(self, x) -> float:
        """c(x) plus the sum of absolute objective coefficients."""
        o = self.objective
        return o.affine_value(np.asarray(x, float)) + math.fsum(abs(t.psi) for t in o.terms)


@dataclass(frozen=True, eq=False)
class EpsApproxProblem(ResolvedProblem):
    base: AHSProblem
    eps: float
    objective: ResolvedExpression
    constraints: tuple
    domain: Box

    def theta_original(self, x) -> float:
        return eval_expression(self.base.objective, x)

    def feasible_original(self, x, tol: float = TAU_FEAS) -> bool:
        from .core_model import check_feasible

        return check_feasible(self.base, x, tol)


def _resolve_additive(t: HeavisideTerm, eps: float) -> ResolvedTerm:
    if t.coeff > 0:
        if t.kind is OuterKind.CLOSED:
            return ResolvedTerm(t.coeff, t.inner, 0.0, False)
        return ResolvedTerm(t.coeff, t.inner.shifted(-eps), 0.0, False)
    return ResolvedTerm(t.coeff, t.inner, -eps, True)


def build_eps_problem(p: AHSProblem, eps: float) -> EpsApproxProblem:
    if not eps > 0:
        raise ModelError("eps must be positive")

    def conv(e):
        terms = []
        for t in e.terms:
            if not isinstance(t, HeavisideTerm):
                raise ModelError("product terms need mhs_to_ahs")
            terms.append(_resolve_additive(t, eps))
        return ResolvedExpression(e.linear, e.offset, tuple(terms))

    return EpsApproxProblem(p, eps, conv(p.objective), tuple(conv(c) for c in p.constraints), p.domain)


def dc_min(f: PAFunction, g: PAFunction) -> PAFunction:
    """min{f, g} as a single dc PA function.

    With f = P1 + Q1 and g = P2 + Q2 (P convex max, Q concave min):
    min{f, g} = (P1 + P2) + min{Q1 - P2, Q2 - P1}.
    """
    cvx_a = (f.cvx_a[:, None, :] + g.cvx_a[None, :, :]).reshape(-1, f.n)
    cvx_c = (f.cvx_alpha[:, None] + g.cvx_alpha[None, :]).reshape(-1)
    q1 = (f.cve_b[:, None, :] - g.cvx_a[None, :, :]).reshape(-1, f.n)
    c1 = (f.cve_beta[:, None] - g.cvx_alpha[None, :]).reshape(-1)
    q2 = (g.cve_b[:, None, :] - f.cvx_a[None, :, :]).reshape(-1, f.n)
    c2 = (g.cve_beta[:, None] - f.cvx_alpha[None, :]).reshape(-1)
    return PAFunction(cvx_a, cvx_c, np.vstack([q1, q2]), np.concatenate([c1, c2]))


def product_inner(t: MHSTerm, eps: float) -> PAFunction:
    """min{phi, varphi - eps}; a missing factor drops out of the min."""
    if t.open_inner is None:
        return t.closed_inner
    shifted = t.open_inner.shifted(-eps)
    if t.closed_inner is None:
        return shifted
    return dc_min(t.closed_inner, shifted)


def mhs_to_ahs(p: AHSProblem, eps: float) -> EpsApproxProblem:
    """Epsilon approximation of a product-term problem.

    Positive products become 1[min{phi, varphi - eps} >= 0] and negative
    products become 1[min{phi, varphi - eps} > -eps]; the first is a lower
    and the second an upper bound of 1[phi >= 0] * 1[varphi > 0].
    Additive terms in the same problem are resolved as usual.
    """
    if not eps > 0:
        raise ModelError("eps must be positive")

    def conv(e):
        terms = []
        for t in e.terms:
            if isinstance(t, HeavisideTerm):
                terms.append(_resolve_additive(t, eps))
                continue
            inner = product_inner(t, eps)
            if t.coeff > 0:
                terms.append(ResolvedTerm(t.coeff, inner, 0.0, False))
            else:
                terms.append(ResolvedTerm(t.coeff, inner, -eps, True))
        return ResolvedExpression(e.linear, e.offset, tuple(terms))

    return EpsApproxProblem(p, eps, conv(p.objective), tuple(conv(c) for c in p.constraints), p.domain)


def eps_problem(p: AHSProblem, eps: float) -> EpsApproxProblem:
    """Dispatch to :func:`build_eps_problem` or :func:`mhs_to_ahs`."""
    if any(isinstance(t, MHSTerm) for e in p.blocks for t in e.terms):
        return mhs_to_ahs(p, eps)
    return build_eps_problem(p, eps)


def original_problem(p: AHSProblem):
    """The original problem in resolved form (thresholds at zero, no eps).

    Only additive problems have this form; it is what the oracle uses to
    optimize the untransformed objective.
    """

    def conv(e):
        terms = []
        for t in e.terms:
            if not isinstance(t, HeavisideTerm):
                raise ModelError("original form is defined for additive problems only")
            terms.append(ResolvedTerm(t.coeff, t.inner, 0.0, t.kind is OuterKind.OPEN))
        return ResolvedExpression(e.linear, e.offset, tuple(terms))

    return ResolvedForm(conv(p.objective), tuple(conv(c) for c in p.constraints), p.domain, 0.0)


@dataclass(frozen=True, eq=False)
class ResolvedForm(ResolvedProblem):
    """A resolved problem given directly by its expressions."""

    objective: ResolvedExpression
    constraints: tuple
    domain: Box
    eps: float


# ------------------------------------------------------- piece selection


def active_index_sets(f: PAFunction, x, delta: float = 0.0) -> tuple[tuple, tuple]:
    if delta < 0:
        raise ModelError("delta must be nonnegative")
    cv = f.cvx_values(x)
    ce = f.cve_values(x)
    K = tuple(int(k) for k in np.flatnonzero(cv >= cv.max() - delta))
    L = tuple(int(l) for l in np.flatnonzero(ce <= ce.min() + delta))
    return K, L


def runner_up_gap(f: PAFunction, x) -> float:
    """Smallest delta > 0 at which an inactive piece joins the active sets."""
    cv = f.cvx_values(x)
    ce = f.cve_values(x)
    gaps = [cv.max() - v for v in cv if v < cv.max()]
    gaps += [v - ce.min() for v in ce if v > ce.min()]
    return min(gaps) if gaps else math.inf


def surrogates(f: PAFunction, k: int, l: int) -> tuple[PAFunction, PAFunction]:
    """(concave minorant using max-piece k, convex majorant using min-piece l)."""
    if not (0 <= k < f.K and 0 <= l < f.L):
        raise ModelError(f"piece index ({k}, {l}) out of range for K={f.K}, L={f.L}")
    plus = PAFunction(f.cvx_a[k:k + 1], f.cvx_alpha[k:k + 1], f.cve_b, f.cve_beta)
    minus = PAFunction(f.cvx_a, f.cvx_alpha, f.cve_b[l:l + 1], f.cve_beta[l:l + 1])
    return plus, minus


@dataclass(frozen=True)
class PieceSelection:
    """Chosen ``(k, l)`` per term, stored as ``pairs[block][position]``."""

    pairs: tuple

    def __getitem__(self, key):
        i, j = key
        return self.pairs[i][j]

    def as_list(self) -> list:
        return [[list(p) for p in blk] for blk in self.pairs]


def _delta_for(delta, key) -> float:
    if isinstance(delta, Mapping):
        return float(delta.get(key, 0.0))
    return float(delta)


def selection_sets(p: ResolvedProblem, x, delta=0.0) -> list:
    """Per block, per term: (K^delta, L^delta)."""
    out = []
    for i, e in enumerate(p.blocks):
        out.append([active_index_sets(t.inner, x, _delta_for(delta, (i, j))) for j, t in enumerate(e.terms)])
    return out


def count_selections(p: ResolvedProblem, x, delta=0.0) -> int:
    return math.prod(len(K) * len(L) for blk in selection_sets(p, x, delta) for K, L in blk)


def enumerate_selections(p: ResolvedProblem, x, delta=0.0, mode: str = "all") -> Iterator[PieceSelection]:
    """Iterate over the product of active piece pairs.

    ``mode="first"`` yields only the lexicographically smallest element.
    """
    sets = selection_sets(p, x, delta)
    shape = [len(blk) for blk in sets]
    choices = [list(itertools.product(K, L)) for blk in sets for K, L in blk]
    if mode == "first":
        combos = [tuple(c[0] for c in choices)]
    elif mode == "all":
        combos = itertools.product(*choices)
    else:
        raise ModelError(f"unknown selection mode {mode!r}")
    for flat in combos:
        pairs, pos = [], 0
        for s in shape:
            pairs.append(tuple(flat[pos:pos + s]))
            pos += s
        yield PieceSelection(tuple(pairs))


@dataclass(frozen=True, eq=False)
class DecomposedProblem(ResolvedProblem):
    eps_problem: EpsApproxProblem
    selection: PieceSelection
    center: np.ndarray
    rho: float
    objective: ResolvedExpression
    constraints: tuple
    domain: Box

    @property
    def eps(self) -> float:
        return self.eps_problem.eps

    def theta_rho(self, x) -> float:
        x = np.asarray(x, float)
        return self.theta(x) - 0.5 * self.rho * float(np.sum((x - self.center) ** 2))


def build_decomposed(epsp: ResolvedProblem, sel: PieceSelection, center, rho: float = 0.0) -> DecomposedProblem:
    if rho < 0:
        raise ModelError("rho must be nonnegative")
    if len(sel.pairs) != len(epsp.blocks):
        raise ModelError("selection does not match the problem blocks")
    blocks = []
    for i, e in enumerate(epsp.blocks):
        if len(sel.pairs[i]) != len(e.terms):
            raise ModelError(f"selection does not match the terms of block {i}")
        terms = []
        for j, t in enumerate(e.terms):
            k, l = sel[i, j]
            plus, minus = surrogates(t.inner, k, l)
            terms.append(ResolvedTerm(t.psi, plus if t.psi > 0 else minus, t.threshold, t.strict))
        blocks.append(ResolvedExpression(e.linear, e.offset, tuple(terms)))
    center = np.array(center, float)
    center.setflags(write=False)
    return DecomposedProblem(epsp, sel, center, float(rho), blocks[0], tuple(blocks[1:]), epsp.domain)
