"""Depth-D classification tree with one precision floor, trained four ways.

    python3 scripts/tree_experiment.py --n 40 --spread 1.3 --methods idsa-pip,full-mip
"""
import argparse
import time

from hscop.classification.data import metrics, synthetic_blobs
from hscop.classification.pareto import METHODS, TrainConfig, predict, train
from hscop.classification.tree import build_tree_problem, routing_consistent
from hscop.idsa import IDSAConfig
from hscop.milp import MILPConfig
from hscop.pip import PIPConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=40)
    ap.add_argument("--classes", type=int, default=2)
    ap.add_argument("--depth", type=int, default=2)
    ap.add_argument("--spread", type=float, default=1.3)
    ap.add_argument("--beta", type=float, default=0.8)
    ap.add_argument("--cls", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--time-limit", type=float, default=30.0, help="seconds per integer program")
    ap.add_argument("--methods", default="idsa-pip,full-mip")
    a = ap.parse_args()

    methods = [m for m in a.methods.split(",") if m]
    for m in methods:
        if m not in METHODS:
            ap.error(f"unknown method {m}")
    d = synthetic_blobs(a.n, a.classes, 2, seed=a.seed, spread=a.spread)
    pre = {a.cls: a.beta}
    ip = build_tree_problem(d, a.depth, precisions=pre)
    print(f"binaries in the full IP: {ip.model.n_binary}")
    for method in methods:
        mc = MILPConfig(time_limit=a.time_limit)
        cfg = TrainConfig(model="tree", method=method, depth=a.depth, seed=a.seed,
                          idsa=IDSAConfig(milp=mc, pip=PIPConfig(milp=mc, seed=a.seed)))
        t = time.perf_counter()
        r = train(d, pre, cfg)
        dt = time.perf_counter() - t
        m = metrics(predict(r.model, d.X), d.y, d.J)
        v = ip.warm_start(r.x)
        routed = v is not None and routing_consistent(ip, v)[0]
        print(f"{method:9s} status={r.status} start={r.start_objective:.3f} obj={r.objective:.3f} "
              f"acc={m.accuracy:.3f} prec={m.precision[a.cls]} feasible={r.feasible} routing={routed} {dt:.1f}s")


if __name__ == "__main__":
    main()
