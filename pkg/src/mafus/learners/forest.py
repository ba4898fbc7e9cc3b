"""Bagged random forest with gini/entropy splits and majority vote."""

from __future__ import annotations

import math

import numpy as np

from ..errors import TrainingError
from .base import ModelConfig, TrainedModel, sample_weights
from .trees import Tree, build_classification_tree


def _resolve_max_features(option, d: int):
    if option is None:
        return None
    if option in ("auto", "sqrt"):  # auto aliases sqrt for classification
        return max(1, int(math.sqrt(d)))
    if option == "log2":
        return max(1, int(math.log2(d))) if d > 1 else 1
    if isinstance(option, (int, float)) and not isinstance(option, bool):
        return max(1, min(d, int(option)))
    raise TrainingError(f"unsupported max_features {option!r}")


class ForestModel(TrainedModel):
    """score = fraction of trees voting class 1."""

    algorithm = "rf"
    score_kind = "probability"

    def __init__(self, config: ModelConfig, n_features: int, trees: list[Tree]):
        super().__init__(config, n_features)
        self.trees = trees

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        votes = np.zeros(X.shape[0])
        for tree in self.trees:
            votes += tree.predict_batch(X) >= 0.5  # leaf majority, ties to 1
        return votes / len(self.trees)

    def split_count_total(self) -> np.ndarray:
        total = np.zeros(self.n_features, dtype=np.int64)
        for tree in self.trees:
            total += tree.split_counts(self.n_features)
        return total

    def params_to_dict(self) -> dict:
        return {"kind": "forest", "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def params_from_dict(cls, config, n_features, doc) -> "ForestModel":
        return cls(config, n_features, [Tree.from_dict(t) for t in doc["trees"]])


def fit_forest(config: ModelConfig, X: np.ndarray, y: np.ndarray) -> ForestModel:
    n, d = X.shape
    n_trees = int(config["n_estimators"])
    max_depth = config["max_depth"]
    if max_depth is not None:
        max_depth = int(max_depth)
    criterion = config["criterion"]
    if criterion not in ("gini", "entropy"):
        raise TrainingError(f"unsupported criterion {criterion!r}")
    max_features = _resolve_max_features(config["max_features"], d)
    w = sample_weights(y, config.class_weighting)

    root_rng = np.random.default_rng(config.seed)
    tree_seeds = root_rng.integers(0, 2**63 - 1, size=n_trees)
    trees = []
    for seed in tree_seeds:
        rng = np.random.default_rng(int(seed))
        sample = rng.integers(0, n, size=n)  # bootstrap
        trees.append(
            build_classification_tree(
                X[sample], y[sample], w[sample], rng,
                max_depth=max_depth, criterion=criterion,
                max_features=max_features,
                min_samples_leaf=int(config["min_samples_leaf"]),
            )
        )
    return ForestModel(config, d, trees)
