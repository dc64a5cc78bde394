"""Linear score classifier trained for margin accuracy under precision floors.

Decision variables are flattened as ``x = (W, b, U)`` where ``W`` is p x J
(column j is the score vector of class j, stored row-major), ``b`` has
length J and ``U`` (same shape as ``W``) carries the split
``-U <= W <= U`` used for the l1 bound on each column.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..core_model import AHSProblem, Box, HeavisideExpression, HeavisideTerm, MHSTerm, PAFunction
from ..idsa import AHSAdapter
from ..ipbuild import compute_bigM
from .data import Dataset


@dataclass(frozen=True, eq=False)
class ScoreModel:
    W: np.ndarray  # p x J
    b: np.ndarray  # J

    def scores(self, X) -> np.ndarray:
        return np.atleast_2d(np.asarray(X, float)) @ self.W + self.b

    def within(self, tau: float, tol: float = 1e-9) -> bool:
        return bool(np.all(np.abs(self.W).sum(axis=0) <= tau + tol) and np.all(np.abs(self.b) <= tau + tol))


def predict_score(m: ScoreModel, X) -> np.ndarray:
    """Highest score wins; ties go to the smallest class index."""
    return np.argmax(m.scores(X), axis=1)


class ScoreLayout:
    def __init__(self, p: int, J: int):
        self.p, self.J = p, J

    @property
    def n(self) -> int:
        return 2 * self.p * self.J + self.J

    def w(self, i: int, j: int) -> int:
        return i * self.J + j

    def b(self, j: int) -> int:
        return self.p * self.J + j

    def u(self, i: int, j: int) -> int:
        return self.p * self.J + self.J + i * self.J + j

    def h(self, xs, m: int, n: int) -> tuple[np.ndarray, float]:
        """Coefficients of (w_m - w_n) @ xs + b_m - b_n."""
        a = np.zeros(self.n)
        for i in range(self.p):
            a[self.w(i, m)] += xs[i]
            a[self.w(i, n)] -= xs[i]
        a[self.b(m)] += 1.0
        a[self.b(n)] -= 1.0
        return a, 0.0

    def decode(self, x) -> ScoreModel:
        x = np.asarray(x, float)
        W = x[: self.p * self.J].reshape(self.p, self.J).copy()
        b = x[self.p * self.J: self.p * self.J + self.J].copy()
        return ScoreModel(W, b)

    def encode(self, m: ScoreModel) -> np.ndarray:
        x = np.zeros(self.n)
        x[: self.p * self.J] = np.asarray(m.W, float).ravel()
        x[self.p * self.J: self.p * self.J + self.J] = m.b
        x[self.p * self.J + self.J:] = np.abs(np.asarray(m.W, float)).ravel()
        return x


def score_box(lay: ScoreLayout, tau: float) -> Box:
    lo = np.concatenate([-tau * np.ones(lay.p * lay.J), -tau * np.ones(lay.J), np.zeros(lay.p * lay.J)])
    hi = tau * np.ones(lay.n)
    rows = []
    for i in range(lay.p):
        for j in range(lay.J):
            r = np.zeros(lay.n); r[lay.w(i, j)] = 1.0; r[lay.u(i, j)] = -1.0
            rows.append((r, "<=", 0.0))
            r = np.zeros(lay.n); r[lay.w(i, j)] = -1.0; r[lay.u(i, j)] = -1.0
            rows.append((r, "<=", 0.0))
    for j in range(lay.J):
        r = np.zeros(lay.n)
        for i in range(lay.p):
            r[lay.u(i, j)] = 1.0
        rows.append((r, "<=", tau))
    return Box(lo, hi, rows)


def predicted_as(lay: ScoreLayout, xs, j: int) -> MHSTerm:
    """Factors of 'sample is predicted as j' under the smallest-index tie rule.

    closed factor: min over m > j of h_{j,m} (ties with larger classes go to j);
    open factor: min over n < j of h_{j,n} (must strictly beat smaller classes).
    """
    hi = [lay.h(xs, j, m) for m in range(j + 1, lay.J)]
    lo = [lay.h(xs, j, n) for n in range(j)]
    closed = PAFunction.pure_min(hi) if hi else None
    opened = PAFunction.pure_min(lo) if lo else None
    return closed, opened


def build_score_problem(d: Dataset, precisions: dict | None = None, recalls: dict | None = None,
                        tau: float = 10.0, margin: float = 1.0, default_recall: float = 0.1,
                        nonempty: bool = True) -> AHSProblem:
    """Margin-accuracy objective with per-class precision and recall rows.

    ``precisions`` maps class -> beta in (0, 1).  ``recalls`` maps class ->
    alpha; by default every constrained class gets ``default_recall``
    (pass ``default_recall=0`` to disable).  Precision rows keep the
    numerator (one +1 product per sample of the class) and denominator
    (one -beta product per sample) terms separate.
    """
    precisions = dict(precisions or {})
    for j, beta in precisions.items():
        if not (0 < beta < 1):
            raise ValueError(f"precision threshold for class {j} must lie in (0, 1)")
        if not 0 <= j < d.J:
            raise ValueError(f"class {j} out of range")
    if margin <= 0:
        raise ValueError("margin must be positive")
    if recalls is None:
        recalls = {j: default_recall for j in precisions} if default_recall > 0 else {}
    lay = ScoreLayout(d.p, d.J)
    N = d.N
    obj_terms = []
    for xs, ys in zip(d.X, d.y):
        pieces = [(a, c - margin) for a, c in (lay.h(xs, ys, j) for j in range(d.J) if j != ys)]
        obj_terms.append(HeavisideTerm(1.0 / N, PAFunction.pure_min(pieces)))
    objective = HeavisideExpression(np.zeros(lay.n), 0.0, obj_terms)
    cons = []
    counts = d.class_counts()
    for j in sorted(precisions):
        beta = precisions[j]
        facs = [predicted_as(lay, xs, j) for xs in d.X]
        num = [MHSTerm(1.0, *facs[s]) for s in range(N) if d.y[s] == j]
        den = [MHSTerm(-beta, *facs[s]) for s in range(N)]
        cons.append(HeavisideExpression(np.zeros(lay.n), 0.0, num + den))
        if nonempty:
            cons.append(HeavisideExpression(np.zeros(lay.n), -1.0, [MHSTerm(1.0, *facs[s]) for s in range(N)]))
    for j in sorted(recalls):
        alpha = recalls[j]
        facs = [predicted_as(lay, xs, j) for xs in d.X]
        num = [MHSTerm(1.0, *facs[s]) for s in range(N) if d.y[s] == j]
        if num:
            cons.append(HeavisideExpression(np.zeros(lay.n), -alpha * counts[j], num))
    return AHSProblem(objective, cons, score_box(lay, tau))


def paper_big_m(d: Dataset) -> float:
    return 20.0 * float(np.abs(d.X).max(initial=0.0)) + 120.0


class ScoreAdapter(AHSAdapter):
    """Expression adapter with the application's uniform big-M."""

    def __init__(self, problem: AHSProblem, d: Dataset):
        super().__init__(problem)
        self.data = d
        self.layout = ScoreLayout(d.p, d.J)
        self._big_m = None

    def big_m(self, eps: float) -> float:
        if self._big_m is None:
            self._big_m = max(compute_bigM(self.eps_problem(eps)), paper_big_m(self.data))
        return self._big_m

    def subproblem(self, eps, sel, center, rho, segments, gamma_penalty=None):
        from ..ipbuild import HeavisideSubproblem
        from ..reformulation import build_decomposed

        epsp = self.eps_problem(eps)
        base = epsp if sel is None else build_decomposed(epsp, sel, center, rho)
        return HeavisideSubproblem(base, center=center, rho=rho, segments=segments,
                                   gamma_penalty=gamma_penalty, big_m=self.big_m(eps))


def svm_warm_start(d: Dataset, tau: float = 10.0, seed: int = 0) -> np.ndarray:
    """Crammer-Singer linear SVM scaled into the l1 / bias bound."""
    from sklearn.exceptions import ConvergenceWarning
    from sklearn.svm import LinearSVC

    lay = ScoreLayout(d.p, d.J)
    if len(np.unique(d.y)) < 2:
        return lay.encode(ScoreModel(np.zeros((d.p, d.J)), np.zeros(d.J)))
    clf = LinearSVC(multi_class="crammer_singer", C=1.0, random_state=seed, max_iter=20000)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        clf.fit(d.X, d.y)
    W = np.zeros((d.p, d.J))
    b = np.zeros(d.J)
    cls = list(clf.classes_)
    coef = clf.coef_ if clf.coef_.shape[0] == len(cls) else np.vstack([-clf.coef_, clf.coef_])
    inter = clf.intercept_ if len(clf.intercept_) == len(cls) else np.concatenate([-clf.intercept_, clf.intercept_])
    for r, c in enumerate(cls):
        W[:, c] = coef[r]
        b[c] = inter[r]
    scale = max(float(np.abs(W).sum(axis=0).max()), float(np.abs(b).max()), 1e-12)
    f = tau / scale * (1 - 1e-9)
    return lay.encode(ScoreModel(W * f, b * f))


def margin_accuracy(m: ScoreModel, d: Dataset, margin: float = 1.0) -> float:
    """Fraction of samples whose own score beats every other class by at least the margin."""
    S = m.scores(d.X)
    own = S[np.arange(d.N), d.y]
    S2 = S.copy()
    S2[np.arange(d.N), d.y] = -math.inf
    return float(np.mean(own - S2.max(axis=1) - margin >= 0))
