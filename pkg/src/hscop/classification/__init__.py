"""Score and tree classifiers with precision constraints."""
from .data import Dataset, Metrics, metrics, read_csv, standardize, stratified_folds, synthetic_blobs
from .score import ScoreAdapter, ScoreModel, build_score_problem, predict_score
from .tree import TreeAdapter, TreeModel, build_tree_problem, predict_tree

__all__ = [
    "Dataset", "Metrics", "metrics", "read_csv", "standardize", "stratified_folds", "synthetic_blobs",
    "ScoreAdapter", "ScoreModel", "build_score_problem", "predict_score",
    "TreeAdapter", "TreeModel", "build_tree_problem", "predict_tree",
]
