"""Datasets, standardization, folds and metrics."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.model_selection import StratifiedKFold
from sklearn.preprocessing import StandardScaler


class DataError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    """Features ``X`` (N x p) and integer labels ``y`` in ``0..J-1``."""

    X: np.ndarray
    y: np.ndarray
    n_classes: int

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, float))
        y = np.asarray(self.y)
        if y.ndim != 1 or len(y) != len(X) or len(y) < 1:
            raise DataError("need N >= 1 samples with one label each")
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise DataError("labels must be integers")
        y = y.astype(int)
        if y.min() < 0 or y.max() >= self.n_classes:
            raise DataError(f"labels must lie in 0..{self.n_classes - 1}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_arrays(cls, X, y, n_classes: int | None = None) -> "Dataset":
        y = np.asarray(y)
        return cls(X, y, int(n_classes if n_classes is not None else int(np.max(y)) + 1))

    @property
    def N(self) -> int:
        return len(self.y)

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def J(self) -> int:
        return self.n_classes

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.n_classes)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, int)
        return Dataset(self.X[idx], self.y[idx], self.n_classes)


def standardize(train: Dataset, *others: Dataset) -> tuple:
    """Scale with train statistics; zero-variance features are only centered."""
    sc = StandardScaler().fit(train.X)
    out = [Dataset(sc.transform(train.X), train.y, train.n_classes)]
    out += [Dataset(sc.transform(d.X), d.y, d.n_classes) for d in others]
    return tuple(out)


def stratified_folds(y, k: int, seed: int = 0) -> list:
    """Test-index arrays of a shuffled stratified k-fold split."""
    y = np.asarray(y)
    if k < 2:
        raise DataError("need at least two folds")
    if np.bincount(y).max(initial=0) < k and len(y) < k:
        raise DataError("fewer samples than folds")
    skf = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
    folds = [np.sort(test) for _, test in skf.split(np.zeros(len(y)), y)]
    if any(len(f) == 0 for f in folds):
        raise DataError("empty fold")
    return folds


def read_csv(path, label_col=-1, header: bool | None = None, n_classes: int | None = None) -> Dataset:
    """Load a numeric CSV.  ``label_col`` is an index or, with a header, a name.

    ``header=None`` detects a header by trying to parse the first row.
    Errors name the file and line.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"{path}: cannot read ({exc.strerror})") from exc
    rows = [r for r in csv.reader(text.splitlines()) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")

    def numeric(r):
        try:
            [float(c) for c in r]
            return True
        except ValueError:
            return False

    if header is None:
        header = not numeric(rows[0])
    names = [c.strip() for c in rows[0]] if header else None
    body = rows[1:] if header else rows
    start = 2 if header else 1
    if isinstance(label_col, str):
        if names is None or label_col not in names:
            raise DataError(f"{path}: label column {label_col!r} not found")
        li = names.index(label_col)
    else:
        li = int(label_col)
    width = len(rows[0])
    li = li % width
    X, y = [], []
    for ln, r in enumerate(body, start=start):
        if len(r) != width:
            raise DataError(f"{path}:{ln}: expected {width} fields, got {len(r)}")
        try:
            vals = [float(c) for c in r]
        except ValueError as exc:
            raise DataError(f"{path}:{ln}: non-numeric field ({exc})") from exc
        lab = vals[li]
        if lab != math.floor(lab) or lab < 0:
            raise DataError(f"{path}:{ln}: label {lab:g} is not a class index")
        if n_classes is not None and lab >= n_classes:
            raise DataError(f"{path}:{ln}: label {lab:g} outside 0..{n_classes - 1}")
        y.append(int(lab))
        X.append(vals[:li] + vals[li + 1:])
    return Dataset.from_arrays(np.array(X), np.array(y), n_classes)


def write_csv(d: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(d.p)] + ["label"])
        for xs, ys in zip(d.X, d.y):
            w.writerow([repr(float(v)) for v in xs] + [int(ys)])


# ------------------------------------------------------------ synthetic


def synthetic_blobs(N: int = 60, J: int = 3, p: int = 2, seed: int = 0, spread: float = 0.35,
                    radius: float = 2.0) -> Dataset:
    """Gaussian clusters on a circle, classes as balanced as N allows."""
    rng = np.random.default_rng(seed)
    y = np.arange(N) % J
    rng.shuffle(y)
    angles = 2 * np.pi * np.arange(J) / J
    centers = np.zeros((J, p))
    centers[:, 0] = radius * np.cos(angles)
    if p > 1:
        centers[:, 1] = radius * np.sin(angles)
    X = centers[y] + spread * rng.standard_normal((N, p))
    return Dataset(X, y, J)


# ------------------------------------------------------------- metrics


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: tuple  # None where a class was never predicted
    recall: tuple  # None where a class has no samples
    confusion: tuple

    def as_dict(self) -> dict:
        return {"accuracy": self.accuracy, "precision": list(self.precision), "recall": list(self.recall)}


def confusion_matrix(pred, labels, J: int) -> np.ndarray:
    cm = np.zeros((J, J), dtype=int)
    np.add.at(cm, (np.asarray(labels, int), np.asarray(pred, int)), 1)
    return cm


def metrics(pred, labels, J: int | None = None) -> Metrics:
    pred = np.asarray(pred, int)
    labels = np.asarray(labels, int)
    if pred.shape != labels.shape:
        raise DataError("predictions and labels differ in length")
    J = int(max(pred.max(initial=-1), labels.max(initial=-1)) + 1) if J is None else J
    cm = confusion_matrix(pred, labels, J)
    acc = float(np.trace(cm) / len(labels)) if len(labels) else math.nan
    col = cm.sum(axis=0)
    row = cm.sum(axis=1)
    prec = tuple(float(cm[j, j] / col[j]) if col[j] else None for j in range(J))
    rec = tuple(float(cm[j, j] / row[j]) if row[j] else None for j in range(J))
    return Metrics(acc, prec, rec, tuple(map(tuple, cm.tolist())))
