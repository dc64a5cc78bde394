"""Command-line entry point: ``python3 -m hscop {solve,classify,pareto}``.

Exit codes: 0 on a feasible result, 2 when no feasible point exists,
1 on any other error.  Settings come from flags, optionally seeded by a
JSON config file (``--config``) whose keys are flag names without the
leading dashes.  ``HSCOP_OUT`` sets the default output directory and
``HSCOP_THREADS`` the number of concurrent sweep jobs.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .core_model import ModelError, load_problem
from .idsa import DEFAULT_EPS, IDSAConfig, InfeasibleStartError
from .instances import random_ahs
from .milp import MILPConfig
from .pip import PIPConfig
from .runner import METHODS, solve_problem

log = logging.getLogger("hscop")

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2
METRIC_FIELDS = ("fold", "method", "beta", "obj", "time", "train_acc", "test_acc", "train_prec", "test_prec")


class CLIError(Exception):
    pass


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with default flag values")
    p.add_argument("--method", default="idsa-pip")
    p.add_argument("--eps-schedule", type=_floats, default=DEFAULT_EPS)
    p.add_argument("--rho", type=float, default=1e-3)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--lam", type=float, default=1e4)
    p.add_argument("--nu-max", type=int, default=None)
    p.add_argument("--selection-mode", choices=("single", "all"), default="single")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--time-limit", type=float, default=None, help="seconds per integer program")
    p.add_argument("--mu-max", type=int, default=10)
    p.add_argument("--milp-solver", choices=("bnb", "highs", "auto"), default="bnb")
    p.add_argument("--out", default=None, help="output directory (default $HSCOP_OUT or .)")
    p.add_argument("--no-timing", action="store_true", help="leave timing fields empty for reproducible files")
    p.add_argument("--debug-lp", action="store_true", help="also dump the first integer program as model.lp")
    p.add_argument("-v", "--verbose", action="store_true")


def _classify_args(p: argparse.ArgumentParser):
    p.add_argument("--dataset", help="CSV file; without it a synthetic blob set is generated")
    p.add_argument("--label-col", default="-1", help="label column index or header name")
    p.add_argument("--synthetic", default="60,3,2", help="N,J,p of the generated data")
    p.add_argument("--spread", type=float, default=0.35)
    p.add_argument("--model", choices=("score", "tree"), default="score")
    p.add_argument("--class", dest="cls", type=int, default=1, help="constrained class (0-based)")
    p.add_argument("--folds", type=int, default=4)
    p.add_argument("--fold-file", help="JSON list of test-index lists")
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--tau", type=float, default=10.0)
    p.add_argument("--tau1", type=float, default=100.0)
    p.add_argument("--tau0", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hscop", description="Heaviside composite optimization")
    sub = ap.add_subparsers(dest="cmd", required=True)
    s = sub.add_parser("solve", help="solve a problem file (or a seeded random instance)")
    _common(s)
    s.add_argument("--problem", help="problem JSON; default is random_ahs(seed)")
    s.add_argument("--oracle-bits", type=int, default=16)
    c = sub.add_parser("classify", help="cross-validated training of one configuration")
    _common(c)
    _classify_args(c)
    c.add_argument("--beta", type=float, default=0.85)
    q = sub.add_parser("pareto", help="precision threshold sweep")
    _common(q)
    _classify_args(q)
    q.add_argument("--beta", type=_floats, default=(0.85,))
    q.add_argument("--methods", default=None, help="comma-separated methods (default: --method)")
    return ap


def parse_args(argv=None) -> argparse.Namespace:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config:
        path = Path(args.config)
        try:
            conf = json.loads(path.read_text())
        except OSError as exc:
            raise CLIError(f"{path}: cannot read config ({exc.strerror})") from exc
        except json.JSONDecodeError as exc:
            raise CLIError(f"{path}:{exc.lineno}: {exc.msg}") from exc
        sp = [a for a in ap._subparsers._group_actions[0].choices.values() if a.prog.endswith(args.cmd)][0]
        known = {a.dest: a for a in sp._actions}
        for key, val in conf.items():
            dest = key.replace("-", "_")
            if dest == "class":
                dest = "cls"
            if dest not in known:
                raise CLIError(f"{path}: unknown setting {key!r}")
            if isinstance(val, list):
                val = ",".join(str(v) for v in val)
            sp.set_defaults(**{dest: known[dest].type(val) if known[dest].type and isinstance(val, str) else val})
        args = ap.parse_args(argv)
    return args


def idsa_config(args) -> IDSAConfig:
    milp = MILPConfig(time_limit=args.time_limit, solver=args.milp_solver)
    pip = PIPConfig(mu_max=args.mu_max, seed=args.seed, milp=milp)
    return IDSAConfig(eps_schedule=tuple(args.eps_schedule), rho=args.rho, delta=args.delta, lam=args.lam,
                      nu_max=args.nu_max, selection_mode=args.selection_mode, pip=pip, milp=milp)


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get("HSCOP_OUT", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_rows(path: Path, rows, fields=METRIC_FIELDS) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([_fmt(r.get(f)) for f in fields])


# -------------------------------------------------------------- commands


def cmd_solve(args) -> int:
    if args.method not in METHODS:
        raise CLIError(f"unknown method {args.method!r}; choose from {', '.join(METHODS)}")
    if args.problem:
        path = Path(args.problem)
        if not path.exists():
            raise CLIError(f"{path}: no such file")
        problem = load_problem(path)
    else:
        problem = random_ahs(args.seed)
    out = _out_dir(args)
    cfg = idsa_config(args)
    try:
        res = solve_problem(problem, args.method, cfg, args.oracle_bits,
                            lp_dump=out / "model.lp" if args.debug_lp else None)
    except InfeasibleStartError as exc:
        (out / "solution.json").write_text(json.dumps({"method": args.method, "status": "Infeasible",
                                                      "detail": str(exc)}, indent=1, sort_keys=True) + "\n")
        log.error("%s", exc)
        return EXIT_INFEASIBLE
    timing = not args.no_timing
    (out / "solution.json").write_text(json.dumps(res.to_json(timing), indent=1, sort_keys=True) + "\n")
    (out / "trace.jsonl").write_text(res.trace_jsonl)
    row = {"method": args.method, "obj": res.objective, "time": res.wall_ms if timing else None}
    write_rows(out / "metrics.csv", [row])
    print(f"{args.method}: status={res.status} objective={res.objective} feasible={res.feasible}")
    return EXIT_OK if res.feasible else EXIT_INFEASIBLE


def load_dataset(args):
    from .classification.data import read_csv, synthetic_blobs

    if args.dataset:
        path = Path(args.dataset)
        if not path.exists():
            raise CLIError(f"{path}: no such file")
        lc = args.label_col
        try:
            lc = int(lc)
        except ValueError:
            pass
        return read_csv(path, lc)
    try:
        N, J, p = (int(v) for v in args.synthetic.split(","))
    except ValueError as exc:
        raise CLIError(f"--synthetic expects N,J,p, got {args.synthetic!r}") from exc
    return synthetic_blobs(N, J, p, seed=args.seed, spread=args.spread)


def load_folds(args, d):
    from .classification.data import DataError, stratified_folds

    if not args.fold_file:
        return stratified_folds(d.y, args.folds, args.seed)
    path = Path(args.fold_file)
    try:
        folds = [np.asarray(f, int) for f in json.loads(path.read_text())]
    except OSError as exc:
        raise CLIError(f"{path}: cannot read fold file ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise CLIError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    for i, f in enumerate(folds):
        if len(f) == 0:
            raise DataError(f"{path}: fold {i} is empty")
        if f.min() < 0 or f.max() >= d.N:
            raise DataError(f"{path}: fold {i} has indices outside 0..{d.N - 1}")
    return folds


def train_config(args, method):
    from .classification.pareto import TrainConfig

    return TrainConfig(model=args.model, method=method, tau=args.tau, tau1=args.tau1, tau0=args.tau0,
                       depth=args.depth, seed=args.seed, idsa=idsa_config(args))


def _check_class(args, d):
    if not 0 <= args.cls < d.J:
        raise CLIError(f"--class {args.cls} outside 0..{d.J - 1}")


def cmd_classify(args) -> int:
    from .classification.pareto import pareto_sweep

    d = load_dataset(args)
    _check_class(args, d)
    folds = load_folds(args, d)
    rows = pareto_sweep(d, args.cls, [args.beta], [args.method], folds=folds, cfg=train_config(args, args.method),
                        timing=not args.no_timing, workers=_workers())
    out = _out_dir(args)
    write_rows(out / "metrics.csv", rows)
    for r in rows:
        print(" ".join(f"{k}={_fmt(r[k])}" for k in METRIC_FIELDS if r[k] is not None))
    ok = any(r["feasible"] for r in rows)
    return EXIT_OK if ok else EXIT_INFEASIBLE


def cmd_pareto(args) -> int:
    from .classification.pareto import pareto_sweep, pareto_table

    d = load_dataset(args)
    _check_class(args, d)
    if not args.beta:
        raise CLIError("need at least one --beta value")
    methods = tuple(m.strip() for m in (args.methods or args.method).split(",") if m.strip())
    folds = load_folds(args, d)
    rows = pareto_sweep(d, args.cls, args.beta, methods, folds=folds, cfg=train_config(args, methods[0]),
                        timing=not args.no_timing, workers=_workers())
    out = _out_dir(args)
    write_rows(out / "pareto_all.csv", rows)
    table, front = pareto_table(rows)
    fields = ("method", "beta", "test_acc", "test_prec", "train_acc", "train_prec", "n_ok")
    write_rows(out / "pareto.csv", [table[i] for i in front], fields)
    with open(out / "pareto.tsv", "w") as fh:
        fh.write("# method\tbeta\ttest_acc\ttest_prec\n")
        for i in front:
            r = table[i]
            fh.write(f"{r['method']}\t{_fmt(r['beta'])}\t{_fmt(r['test_acc'])}\t{_fmt(r['test_prec'])}\n")
    print(f"{len(rows)} runs, {len(front)} non-dominated points")
    return EXIT_OK if any(r["feasible"] for r in rows) else EXIT_INFEASIBLE


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("HSCOP_THREADS", "1")))
    except ValueError:
        return 1


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = {"solve": cmd_solve, "classify": cmd_classify, "pareto": cmd_pareto}[args.cmd]
    try:
        return handler(args)
    except (CLIError, ModelError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
