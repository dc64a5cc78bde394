import csv
import json
from pathlib import Path

import pytest

from hscop.cli import main

FIX = Path(__file__).parent / "fixtures"


def _run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def test_oracle_on_fixture(tmp_path):
    assert _run(tmp_path, "solve", "--problem", str(FIX / "tiny.json"), "--method", "oracle") == 0
    sol = json.loads((tmp_path / "solution.json").read_text())
    assert sol["objective"] == 1.0


def test_idsa_trace_is_repeatable(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["solve", "--method", "idsa-pip", "--seed", "7", "--no-timing", "--out", str(out)]) == 0
    for name in ("trace.jsonl", "metrics.csv", "solution.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_missing_file(tmp_path, capsys):
    assert _run(tmp_path, "solve", "--problem", str(tmp_path / "nope.json")) == 1
    assert "nope.json" in capsys.readouterr().err


def test_bad_method(tmp_path, capsys):
    assert _run(tmp_path, "solve", "--method", "magic") == 1
    assert "error:" in capsys.readouterr().err


def test_infeasible_exit(tmp_path):
    from hscop.core_model import AHSProblem, Box, HeavisideExpression, HeavisideTerm, PAFunction, save_problem

    cons = HeavisideExpression([0.0], -2.0, [HeavisideTerm(1.0, PAFunction.affine([1.0]))])
    save_problem(AHSProblem(HeavisideExpression([0.0], 0.0, []), [cons], Box([-1.0], [1.0])), tmp_path / "bad.json")
    assert _run(tmp_path, "solve", "--problem", str(tmp_path / "bad.json"), "--method", "idsa-pip") == 2


def test_lp_dump(tmp_path):
    assert _run(tmp_path, "solve", "--problem", str(FIX / "tiny.json"), "--method", "full-mip", "--debug-lp") == 0
    text = (tmp_path / "model.lp").read_text()
    assert "Maximize" in text and "Binaries" in text


def test_classify_separable(tmp_path):
    rc = _run(tmp_path, "classify", "--dataset", str(FIX / "blobs24.csv"), "--beta", "0.8", "--folds", "2")
    assert rc == 0
    rows = list(csv.DictReader(open(tmp_path / "metrics.csv")))
    assert len(rows) == 2
    assert any(float(r["train_acc"]) == 1.0 for r in rows)


def test_pareto_one_threshold(tmp_path):
    rc = _run(tmp_path, "pareto", "--dataset", str(FIX / "blobs24.csv"), "--beta", "0.8", "--folds", "2",
              "--no-timing")
    assert rc == 0
    rows = list(csv.DictReader(open(tmp_path / "pareto.csv")))
    assert len(rows) == 1
    tsv = (tmp_path / "pareto.tsv").read_text().splitlines()
    assert len(tsv) == 2 and tsv[0].startswith("#")


def test_pareto_matches_module(tmp_path):
    from hscop.classification.data import synthetic_blobs
    from hscop.classification.pareto import TrainConfig, pareto_sweep, pareto_table

    betas = "0.55,0.9"
    rc = _run(tmp_path, "pareto", "--synthetic", "30,2,2", "--spread", "0.6", "--beta", betas, "--folds", "2",
              "--no-timing")
    assert rc in (0, 2)
    got = list(csv.DictReader(open(tmp_path / "pareto.csv")))
    d = synthetic_blobs(30, 2, 2, seed=0, spread=0.6)
    rows = pareto_sweep(d, 1, [0.55, 0.9], folds=2, cfg=TrainConfig(), timing=False)
    table, front = pareto_table(rows)
    assert [float(r["beta"]) for r in got] == [table[i]["beta"] for i in front]


def test_dominated_point_excluded(tmp_path, monkeypatch):
    import hscop.classification.pareto as pm

    fake = [
        {"fold": 0, "method": "idsa-pip", "beta": 0.5, "obj": 0.9, "time": None, "train_acc": 0.9,
         "test_acc": 0.9, "train_prec": 0.9, "test_prec": 0.9, "feasible": True, "status": "ok"},
        {"fold": 0, "method": "idsa-pip", "beta": 0.7, "obj": 0.8, "time": None, "train_acc": 0.8,
         "test_acc": 0.8, "train_prec": 0.8, "test_prec": 0.8, "feasible": True, "status": "ok"},
    ]
    monkeypatch.setattr(pm, "pareto_sweep", lambda *a, **k: fake)
    rc = _run(tmp_path, "pareto", "--synthetic", "20,2,2", "--beta", "0.5,0.7", "--folds", "2", "--no-timing")
    assert rc == 0
    rows = list(csv.DictReader(open(tmp_path / "pareto.csv")))
    assert [float(r["beta"]) for r in rows] == [0.5]
    assert len(list(csv.DictReader(open(tmp_path / "pareto_all.csv")))) == 2
