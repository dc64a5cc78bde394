"""Training pipeline and accuracy/precision trade-off sweeps."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..idsa import IDSAConfig, InfeasibleStartError, RunTrace, bootstrap_feasible, idsa_run
from ..milp import MILPConfig, solve_milp
from ..pip import PIPConfig, PIPError, pip_solve
from .data import Dataset, metrics, standardize, stratified_folds
from .score import ScoreAdapter, ScoreLayout, build_score_problem, margin_accuracy, predict_score, svm_warm_start
from .tree import TreeAdapter, TreeLayout, predict_tree, tree_margin_objective, tree_warm_start

log = logging.getLogger(__name__)

METHODS = ("full-mip", "pip", "isa-pip", "idsa-pip")
MODELS = ("score", "tree")


@dataclass
class TrainConfig:
    model: str = "score"
    method: str = "idsa-pip"
    tau: float = 10.0  # score l1 bound
    tau1: float = 100.0  # tree hyperplane bound
    tau0: int | None = None
    depth: int = 2
    margin: float = 1.0
    default_recall: float = 0.1
    seed: int = 0
    idsa: IDSAConfig = field(default_factory=IDSAConfig)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")

    @property
    def eps(self) -> float:
        """Approximation level for the single-shot methods."""
        return self.idsa.eps_schedule[-1]


@dataclass
class TrainResult:
    model: object
    x: np.ndarray
    objective: float
    feasible: bool
    status: str
    wall_time: float
    trace: RunTrace | None = None
    start_objective: float | None = None


def make_adapter(d: Dataset, precisions: dict, cfg: TrainConfig):
    if cfg.model == "score":
        prob = build_score_problem(d, precisions, tau=cfg.tau, margin=cfg.margin,
                                   default_recall=cfg.default_recall)
        return ScoreAdapter(prob, d)
    return TreeAdapter(d, cfg.depth, precisions, cfg.tau1, cfg.tau0, cfg.margin, seed=cfg.seed)


def warm_start(ad, d: Dataset, cfg: TrainConfig) -> np.ndarray:
    if cfg.model == "score":
        return svm_warm_start(d, cfg.tau, cfg.seed)
    return tree_warm_start(d, cfg.depth, cfg.tau1, cfg.seed)


def decode(ad, x, cfg: TrainConfig):
    if cfg.model == "score":
        return ScoreLayout(ad.data.p, ad.data.J).decode(x)
    return ad.lay.decode(x)


def predict(model, X) -> np.ndarray:
    return predict_score(model, X) if hasattr(model, "W") else predict_tree(model, X)


def _feasible_start(ad, x0, eps: float, cfg: TrainConfig) -> np.ndarray:
    if ad.feasible(x0, eps):
        return x0
    return bootstrap_feasible(ad, eps, cfg.idsa.lam, x0, cfg.idsa)


def train(d: Dataset, precisions: dict, cfg: TrainConfig | None = None) -> TrainResult:
    """Fit one classifier; raises InfeasibleStartError when no feasible start exists."""
    cfg = cfg or TrainConfig()
    t0 = time.perf_counter()
    ad = make_adapter(d, precisions, cfg)
    x_warm = warm_start(ad, d, cfg)
    trace = None
    status = "ok"
    if cfg.method in ("isa-pip", "idsa-pip"):
        icfg = IDSAConfig(**{**cfg.idsa.__dict__, "decompose": cfg.method == "idsa-pip"})
        x0 = _feasible_start(ad, x_warm, icfg.eps_at(0), cfg)
        start = ad.theta_original(x0)
        x, trace = idsa_run(ad, icfg, x0)
    else:
        eps = cfg.eps
        x0 = _feasible_start(ad, x_warm, eps, cfg)
        start = ad.theta_original(x0)
        sub = ad.subproblem(eps, None, None, 0.0, cfg.idsa.segments)
        if cfg.method == "full-mip":
            ip = sub.build()
            sol = solve_milp(ip.model, cfg.idsa.milp, incumbent=ip.warm_start(x0))
            status = sol.status
            x = ip.extract(sol.values) if sol.has_solution else x0
        else:
            try:
                res = pip_solve(sub, x0, cfg.idsa.pip)
            except PIPError:
                # margin rounding can cut the start off; fall back to the start
                res = None
            x = x0 if res is None else res.x
            status = "start" if res is None else res.stop_reason
    model = decode(ad, x, cfg)
    return TrainResult(model, np.asarray(x, float), ad.theta_original(x), bool(ad.feasible_original(x)), status,
                       time.perf_counter() - t0, trace, start)


# ----------------------------------------------------------------- sweeps


def pareto_filter(points) -> list:
    """Indices of the non-dominated (accuracy, precision) pairs.

    ``None`` precision counts as worse than any number.  Duplicates are
    kept once (the first occurrence).
    """
    key = [(a, -math.inf if p is None else p) for a, p in points]
    out = []
    for i, (a, p) in enumerate(key):
        dominated = False
        for k, (b, q) in enumerate(key):
            if k == i:
                continue
            if (b >= a and q >= p and (b > a or q > p)) or ((b, q) == (a, p) and k < i):
                dominated = True
                break
        if not dominated:
            out.append(i)
    return out


ROW_FIELDS = ("fold", "method", "beta", "obj", "time", "train_acc", "test_acc", "train_prec", "test_prec",
              "feasible", "status")


def _run_point(job) -> dict:
    f, tr, te, cls, beta, c, timing = job
    row = dict.fromkeys(ROW_FIELDS)
    row.update(fold=f, method=c.method, beta=float(beta))
    try:
        res = train(tr, {cls: float(beta)}, c)
    except (InfeasibleStartError, PIPError, RuntimeError, ValueError) as exc:
        log.warning("fold %d %s beta=%g failed: %s", f, c.method, beta, exc)
        row.update(status=f"error: {exc}", feasible=False)
        return row
    m_tr = metrics(predict(res.model, tr.X), tr.y, tr.J)
    m_te = metrics(predict(res.model, te.X), te.y, te.J)
    row.update(obj=res.objective, time=1000.0 * res.wall_time if timing else None,
               train_acc=m_tr.accuracy, test_acc=m_te.accuracy,
               train_prec=m_tr.precision[cls], test_prec=m_te.precision[cls],
               feasible=res.feasible, status=str(res.status))
    return row


def pareto_sweep(d: Dataset, cls: int, betas, methods=("idsa-pip",), folds=4,
                 cfg: TrainConfig | None = None, timing: bool = True, workers: int = 1) -> list:
    """Train every (fold, method, beta) combination; failures become rows too.

    ``folds`` is a fold count (stratified, seeded by ``cfg.seed``) or a
    list of test-index arrays.  Features are standardized with training
    statistics.  Time is wall-clock milliseconds.  With ``workers > 1``
    points run in separate processes; row order does not depend on it.
    """
    cfg = cfg or TrainConfig()
    test_folds = stratified_folds(d.y, folds, cfg.seed) if isinstance(folds, int) else list(folds)
    jobs = []
    for f, test in enumerate(test_folds):
        test = np.asarray(test, int)
        train_idx = np.setdiff1d(np.arange(d.N), test)
        tr, te = standardize(d.subset(train_idx), d.subset(test))
        for method in methods:
            c = TrainConfig(**{**cfg.__dict__, "method": method})
            for beta in betas:
                jobs.append((f, tr, te, cls, beta, c, timing))
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_run_point, jobs))
    return [_run_point(j) for j in jobs]


def pareto_table(rows) -> tuple[list, list]:
    """Fold-averaged (method, beta) points and the indices of the non-dominated ones.

    Averages use successful folds only; a point with no successful fold
    has ``None`` metrics and is never on the front.
    """
    keys = []
    for r in rows:
        k = (r["method"], r["beta"])
        if k not in keys:
            keys.append(k)
    table = []
    for method, beta in keys:
        ok = [r for r in rows if (r["method"], r["beta"]) == (method, beta) and r["obj"] is not None]
        point = {"method": method, "beta": beta, "n_ok": len(ok)}
        for f in ("test_acc", "test_prec", "train_acc", "train_prec"):
            vals = [r[f] for r in ok if r[f] is not None]
            point[f] = float(np.mean(vals)) if vals else None
        table.append(point)
    cand = [i for i, t in enumerate(table) if t["test_acc"] is not None]
    front = [cand[i] for i in pareto_filter([(table[i]["test_acc"], table[i]["test_prec"]) for i in cand])]
    return table, front


__all__ = ["METHODS", "MODELS", "TrainConfig", "TrainResult", "train", "make_adapter", "predict",
           "pareto_filter", "pareto_sweep", "pareto_table", "ROW_FIELDS", "margin_accuracy", "tree_margin_objective",
           "MILPConfig", "PIPConfig"]
