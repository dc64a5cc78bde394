"""IDSA-PIP versus the full MIP on a synthetic 3-class score problem.

    python3 scripts/score_experiment.py --spread 0.8 --beta 0.85
"""
import argparse
import time

from hscop.classification.data import metrics, synthetic_blobs
from hscop.classification.pareto import TrainConfig, predict, train
from hscop.idsa import IDSAConfig
from hscop.milp import MILPConfig
from hscop.pip import PIPConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=60)
    ap.add_argument("--spread", type=float, default=0.8)
    ap.add_argument("--beta", type=float, default=0.85)
    ap.add_argument("--cls", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--pip-limit", type=float, default=5.0, help="seconds per partial IP")
    ap.add_argument("--mip-limit", type=float, default=120.0, help="seconds for the full MIP")
    ap.add_argument("--solver", choices=("bnb", "highs", "auto"), default="bnb")
    a = ap.parse_args()

    d = synthetic_blobs(a.n, 3, 2, seed=a.seed, spread=a.spread)
    print(f"{'method':10s} {'status':10s} {'start':>7s} {'obj':>7s} {'acc':>6s} {'prec':>6s} {'sec':>7s}")
    for method, limit in (("idsa-pip", a.pip_limit), ("full-mip", a.mip_limit)):
        mc = MILPConfig(time_limit=limit, solver=a.solver)
        cfg = TrainConfig(model="score", method=method, seed=a.seed,
                          idsa=IDSAConfig(milp=mc, pip=PIPConfig(milp=mc, seed=a.seed)))
        t = time.perf_counter()
        r = train(d, {a.cls: a.beta}, cfg)
        dt = time.perf_counter() - t
        m = metrics(predict(r.model, d.X), d.y, 3)
        prec = m.precision[a.cls]
        print(f"{method:10s} {str(r.status):10s} {r.start_objective:7.4f} {r.objective:7.4f} {m.accuracy:6.3f} "
              f"{'-' if prec is None else f'{prec:.3f}':>6s} {dt:7.1f}")


if __name__ == "__main__":
    main()
