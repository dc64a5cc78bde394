"""Accuracy/precision trade-off over a list of precision floors, with k-fold testing.

Writes the per-fold rows and the fold-averaged non-dominated points.

    python3 scripts/pareto_sweep.py --betas 0.6,0.7,0.8,0.9 --methods idsa-pip,pip --out runs/pareto
"""
import argparse
import csv
import os
from pathlib import Path

from hscop.classification.data import read_csv, synthetic_blobs
from hscop.classification.pareto import ROW_FIELDS, TrainConfig, pareto_sweep, pareto_table
from hscop.idsa import IDSAConfig
from hscop.milp import MILPConfig
from hscop.pip import PIPConfig


def write(path, rows, fields):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dataset", help="CSV with the label in the last column")
    ap.add_argument("--n", type=int, default=60)
    ap.add_argument("--spread", type=float, default=0.8)
    ap.add_argument("--model", choices=("score", "tree"), default="score")
    ap.add_argument("--cls", type=int, default=1)
    ap.add_argument("--betas", default="0.6,0.7,0.8,0.9")
    ap.add_argument("--methods", default="idsa-pip")
    ap.add_argument("--folds", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--time-limit", type=float, default=5.0)
    ap.add_argument("--out", default=os.environ.get("HSCOP_OUT", "runs/pareto"))
    a = ap.parse_args()

    d = read_csv(a.dataset) if a.dataset else synthetic_blobs(a.n, 3, 2, seed=a.seed, spread=a.spread)
    mc = MILPConfig(time_limit=a.time_limit)
    cfg = TrainConfig(model=a.model, seed=a.seed, idsa=IDSAConfig(milp=mc, pip=PIPConfig(milp=mc, seed=a.seed)))
    betas = [float(b) for b in a.betas.split(",")]
    methods = tuple(m for m in a.methods.split(",") if m)
    workers = int(os.environ.get("HSCOP_THREADS", "1"))
    rows = pareto_sweep(d, a.cls, betas, methods, folds=a.folds, cfg=cfg, workers=workers)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    write(out / "pareto_all.csv", rows, ROW_FIELDS)
    table, front = pareto_table(rows)
    fields = ["method", "beta", "test_acc", "test_prec", "train_acc", "train_prec", "n_ok"]
    write(out / "pareto.csv", [table[i] for i in front], fields)
    for t in table:
        mark = "*" if table.index(t) in front else " "
        print(f"{mark} {t['method']:9s} beta={t['beta']:.2f} test_acc={t['test_acc']} test_prec={t['test_prec']}")
    print(f"wrote {out}/pareto_all.csv and {out}/pareto.csv")


if __name__ == "__main__":
    main()
