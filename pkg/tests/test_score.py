import numpy as np
import pytest

from hscop.classification import Dataset, ScoreAdapter, ScoreModel, build_score_problem, metrics, predict_score
from hscop.classification.data import DataError, synthetic_blobs
from hscop.classification.score import ScoreLayout, margin_accuracy, svm_warm_start
from hscop.core_model import check_feasible, evaluate_objective
from hscop.oracle import enumerate_optimum
from hscop.reformulation import eps_problem


def test_predict_ties_go_low():
    m = ScoreModel(np.zeros((2, 3)), np.zeros(3))
    assert list(predict_score(m, [[0.3, -1.0]])) == [0]
    m = ScoreModel(np.zeros((2, 3)), np.array([0.0, 1.0, 1.0]))
    assert list(predict_score(m, [[0.0, 0.0]])) == [1]


def test_predict_matches_loop():
    rng = np.random.default_rng(0)
    m = ScoreModel(rng.normal(size=(3, 4)), rng.normal(size=4))
    X = rng.normal(size=(50, 3))
    for x, got in zip(X, predict_score(m, X)):
        s = [x @ m.W[:, j] + m.b[j] for j in range(4)]
        assert got == max(range(4), key=lambda j: (s[j], -j))


def test_metrics_examples():
    y = np.array([0, 1, 0, 1])
    m = metrics(y, y)
    assert m.accuracy == 1.0 and m.precision == (1.0, 1.0)
    m = metrics(np.zeros(4, int), y, 2)
    assert m.accuracy == 0.5
    assert m.precision == (0.5, None)
    with pytest.raises(DataError):
        metrics([0, 1], [0])


def test_metrics_counting():
    rng = np.random.default_rng(2)
    pred, lab = rng.integers(0, 3, 80), rng.integers(0, 3, 80)
    m = metrics(pred, lab, 3)
    for j in range(3):
        tp = sum(1 for a, b in zip(pred, lab) if a == b == j)
        npred = sum(1 for a in pred if a == j)
        assert m.precision[j] == (tp / npred if npred else None)
    assert m.accuracy == sum(pred == lab) / 80


def test_term_counts():
    d = Dataset.from_arrays([[0.0, 0.0]], [0], 2)
    p = build_score_problem(d, {})
    assert len(p.objective.terms) == 1 and len(p.constraints) == 0
    d = synthetic_blobs(10, 3, 2, seed=0)
    n1 = int(d.class_counts()[1])
    p = build_score_problem(d, {1: 0.6}, default_recall=0.0, nonempty=False)
    assert len(p.objective.terms) == 10
    assert len(p.constraints) == 1
    assert len(p.constraints[0].terms) == n1 + 10


def test_bad_threshold():
    d = synthetic_blobs(6, 2, 2)
    with pytest.raises(ValueError):
        build_score_problem(d, {0: 1.2})
    with pytest.raises(ValueError):
        build_score_problem(d, {5: 0.5})


def test_layout_roundtrip():
    rng = np.random.default_rng(3)
    lay = ScoreLayout(3, 4)
    m = ScoreModel(rng.normal(size=(3, 4)), rng.normal(size=4))
    back = lay.decode(lay.encode(m))
    np.testing.assert_allclose(back.W, m.W)
    np.testing.assert_allclose(back.b, m.b)


def test_separable_oracle():
    d = Dataset.from_arrays([[-2.0, 0.0], [-1.5, 0.5], [1.5, 0.0], [2.0, -0.5]], [0, 0, 1, 1])
    p = build_score_problem(d, {}, tau=10.0)
    res = enumerate_optimum(eps_problem(p, 1e-3))
    assert res.value == pytest.approx(1.0)
    assert check_feasible(p, res.x)
    # the optimal vertex sits exactly on the margin, so allow for roundoff
    m = ScoreLayout(2, 2).decode(res.x)
    assert margin_accuracy(m, d, margin=1.0 - 1e-9) == 1.0


def test_warm_start_in_box():
    d = synthetic_blobs(30, 3, 2, seed=1)
    x = svm_warm_start(d, tau=5.0)
    m = ScoreLayout(2, 3).decode(x)
    assert m.within(5.0)
    ad = ScoreAdapter(build_score_problem(d, {}, tau=5.0), d)
    assert ad.problem.domain.contains(x, 1e-9)
    assert metrics(predict_score(m, d.X), d.y).accuracy > 0.8


def test_objective_is_margin_accuracy():
    rng = np.random.default_rng(4)
    d = synthetic_blobs(20, 3, 2, seed=2)
    p = build_score_problem(d, {}, tau=10.0)
    lay = ScoreLayout(2, 3)
    for _ in range(20):
        m = ScoreModel(rng.uniform(-2, 2, (2, 3)), rng.uniform(-1, 1, 3))
        assert evaluate_objective(p, lay.encode(m)) == pytest.approx(margin_accuracy(m, d), abs=1e-12)
