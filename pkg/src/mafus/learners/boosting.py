"""Gradient-boosted trees on logistic loss.

Both boosters share the same Newton-step machinery (gradient p - y,
hessian p(1-p), second-order split gain); they differ in growth policy:
depth-wise ("xgb" style) vs leaf-wise with a num_leaves cap ("lgbm"
style). The ensemble starts from a 0 logit, so an empty ensemble scores
probability 0.5.
"""

from __future__ import annotations

import numpy as np

from .base import ModelConfig, TrainedModel, sample_weights
from .trees import GradTreeParams, Tree, build_gradient_tree


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def log_loss(y: np.ndarray, p: np.ndarray, w: np.ndarray) -> float:
    """Weighted mean binary cross-entropy."""
    eps = 1e-12
    p = np.clip(p, eps, 1.0 - eps)
    terms = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    return float(np.sum(w * terms) / np.sum(w))


class BoostedTreesModel(TrainedModel):
    """score = sigmoid of summed leaf values (scaled by learning rate)."""

    score_kind = "probability"

    def __init__(self, config: ModelConfig, n_features: int, trees: list[Tree],
                 learning_rate: float, algorithm: str):
        super().__init__(config, n_features)
        self.trees = trees
        self.learning_rate = learning_rate
        self.algorithm = algorithm
        self.train_loss_curve: list[float] = []

    def margin_batch(self, X: np.ndarray) -> np.ndarray:
        F = np.zeros(X.shape[0])
        for tree in self.trees:
            F += self.learning_rate * tree.predict_batch(X)
        return F

    def staged_margins(self, X: np.ndarray):
        """Yield the running margin after each boosting round."""
        F = np.zeros(X.shape[0])
        for tree in self.trees:
            F = F + self.learning_rate * tree.predict_batch(X)
            yield F

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(self.margin_batch(X))

    def split_count_total(self) -> np.ndarray:
        total = np.zeros(self.n_features, dtype=np.int64)
        for tree in self.trees:
            total += tree.split_counts(self.n_features)
        return total

    def split_gain_total(self) -> np.ndarray:
        total = np.zeros(self.n_features)
        for tree in self.trees:
            total += tree.split_gains(self.n_features)
        return total

    def params_to_dict(self) -> dict:
        return {
            "kind": "boosted",
            "learning_rate": self.learning_rate,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def params_from_dict(cls, config, n_features, doc) -> "BoostedTreesModel":
        model = cls(config, n_features, [Tree.from_dict(t) for t in doc["trees"]],
                    doc["learning_rate"], config.algorithm)
        return model


def _tree_params(config: ModelConfig, growth: str) -> GradTreeParams:
    num_leaves = None
    if growth == "leaf":
        num_leaves = int(config["num_leaves"])
    min_gain = float(config["gamma"]) if growth == "depth" else 0.0
    max_depth = config["max_depth"]
    reg_lambda = config["reg_lambda"]
    reg_alpha = config["reg_alpha"]
    return GradTreeParams(
        max_depth=None if max_depth is None else int(max_depth),
        num_leaves=num_leaves,
        growth=growth,
        reg_lambda=0.0 if reg_lambda is None else float(reg_lambda),
        reg_alpha=0.0 if reg_alpha is None else float(reg_alpha),
        min_gain=min_gain,
        min_child_weight=float(config["min_child_weight"]),
    )


def fit_boosted(config: ModelConfig, X: np.ndarray, y: np.ndarray) -> BoostedTreesModel:
    growth = "depth" if config.algorithm == "xgb" else "leaf"
    params = _tree_params(config, growth)
    n, d = X.shape
    rounds = int(config["n_estimators"])
    lr = float(config["learning_rate"])
    colsample = float(config["colsample_bytree"])
    w = sample_weights(y, config.class_weighting)

    root_rng = np.random.default_rng(config.seed)
    tree_seeds = root_rng.integers(0, 2**63 - 1, size=rounds)

    F = np.zeros(n)
    trees: list[Tree] = []
    loss_curve: list[float] = []
    n_cols = max(1, int(round(colsample * d))) if colsample < 1.0 else d
    for seed in tree_seeds:
        p = _sigmoid(F)
        g = w * (p - y)
        h = w * p * (1.0 - p)
        if n_cols < d:
            rng = np.random.default_rng(int(seed))
            features = np.sort(rng.choice(d, size=n_cols, replace=False))
        else:
            features = None
        tree = build_gradient_tree(X, g, h, params, features)
        trees.append(tree)
        F += lr * tree.predict_batch(X)
        loss_curve.append(log_loss(y, _sigmoid(F), w))

    model = BoostedTreesModel(config, d, trees, lr, config.algorithm)
    model.train_loss_curve = loss_curve
    return model
