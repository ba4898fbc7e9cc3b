"""Shared model configuration and the fit/predict/score contract."""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

from ..errors import ContractError, TrainingError

ALGORITHMS = ("svm", "rf", "xgb", "lgbm", "mlp")

# Declared hyperparameter domain per algorithm: the published axes plus
# implementation knobs (marked by their defaults here). Unknown names are
# rejected at config construction.
HYPERPARAMETER_DOMAINS: dict[str, dict[str, object]] = {
    "svm": {
        "kernel": "rbf",
        "gamma": 0.1,
        "C": 1.0,
        "tol": 1e-3,
        "max_iter": 200_000,
    },
    "rf": {
        "n_estimators": 100,
        "max_features": "auto",
        "max_depth": None,
        "criterion": "gini",
        "min_samples_leaf": 1,
    },
    "xgb": {
        "gamma": 0.0,
        "learning_rate": 0.1,
        "max_depth": 6,
        "colsample_bytree": 1.0,
        "reg_alpha": 0.0,
        "reg_lambda": 1.0,
        "n_estimators": 100,
        "min_child_weight": 1.0,
    },
    "lgbm": {
        "learning_rate": 0.1,
        "num_leaves": 31,
        "reg_alpha": 0.0,
        "colsample_bytree": 1.0,
        "max_depth": -1,
        "reg_lambda": 0.0,
        "n_estimators": 100,
        "min_child_weight": 1.0,
    },
    "mlp": {
        "hidden_layer_sizes": (128, 128, 128),
        "activation": "relu",
        "solver": "adam",
        "alpha": 0.0001,
        "learning_rate": "constant",
        "learning_rate_init": 0.01,
        "epochs": 500,
        "batch_size": 32,
    },
}


@dataclass(frozen=True)
class ModelConfig:
    """Algorithm choice, hyperparameters, seed, and class weighting."""

    algorithm: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 1
    class_weighting: str = "none"  # none | balanced

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ContractError(f"unknown algorithm {self.algorithm!r}")
        if self.class_weighting not in ("none", "balanced"):
            raise ContractError(f"class_weighting must be none|balanced, got {self.class_weighting!r}")
        domain = HYPERPARAMETER_DOMAINS[self.algorithm]
        unknown = sorted(set(self.hyperparameters) - set(domain))
        if unknown:
            raise ContractError(f"{self.algorithm}: unknown hyperparameter {unknown[0]!r}")
        merged = dict(domain)
        merged.update(self.hyperparameters)
        if self.algorithm == "mlp":
            merged["hidden_layer_sizes"] = tuple(merged["hidden_layer_sizes"])
        object.__setattr__(self, "hyperparameters", MappingProxyType(merged))

    def __getitem__(self, name: str):
        return self.hyperparameters[name]

    def to_dict(self) -> dict:
        hp = {}
        for k, v in self.hyperparameters.items():
            hp[k] = list(v) if isinstance(v, tuple) else v
        return {
            "algorithm": self.algorithm,
            "hyperparameters": hp,
            "seed": self.seed,
            "class_weighting": self.class_weighting,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelConfig":
        return cls(
            algorithm=doc["algorithm"],
            hyperparameters=dict(doc.get("hyperparameters", {})),
            seed=int(doc.get("seed", 1)),
            class_weighting=doc.get("class_weighting", "none"),
        )


class TrainedModel:
    """Fitted classifier exposing a hard label and a real ranking score.

    predict(x) = 1 iff score(x) >= threshold; probabilistic scores
    threshold at 0.5, margins at 0, ties to class 1.
    """

    algorithm: str = ""
    score_kind: str = "probability"  # probability | margin
    degenerate: bool = False

    def __init__(self, config: ModelConfig, n_features: int):
        self.config = config
        self.n_features = n_features

    @property
    def threshold(self) -> float:
        return 0.0 if self.score_kind == "margin" else 0.5

    def _check_input(self, x) -> tuple[np.ndarray, bool]:
        arr = np.asarray(x, dtype=np.float64)
        single = arr.ndim == 1
        if single:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[1] != self.n_features:
            raise ContractError(
                f"expected feature vectors of length {self.n_features}, got shape {arr.shape}"
            )
        return arr, single

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def score(self, x):
        X, single = self._check_input(x)
        s = self.score_batch(X)
        return float(s[0]) if single else s

    def predict(self, x):
        X, single = self._check_input(x)
        labels = (self.score_batch(X) >= self.threshold).astype(np.int64)
        return int(labels[0]) if single else labels

    def params_to_dict(self) -> dict:
        raise NotImplementedError


class DegenerateModel(TrainedModel):
    """Single-class training data: always predict the sole class."""

    def __init__(self, config: ModelConfig, n_features: int, sole_class: int):
        super().__init__(config, n_features)
        self.algorithm = config.algorithm
        self.sole_class = int(sole_class)
        self.degenerate = True

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        return np.full(X.shape[0], float(self.sole_class))

    def params_to_dict(self) -> dict:
        return {"kind": "degenerate", "sole_class": self.sole_class}

    @classmethod
    def params_from_dict(cls, config, n_features, doc) -> "DegenerateModel":
        return cls(config, n_features, doc["sole_class"])


def validate_training_data(X: np.ndarray, y: np.ndarray) -> None:
    if X.ndim != 2 or X.shape[0] == 0:
        raise TrainingError("training data must be a non-empty matrix")
    if not np.isfinite(X).all():
        raise ContractError("non-finite feature values in training data")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ContractError("training labels must be 0/1")


def sample_weights(y: np.ndarray, class_weighting: str) -> np.ndarray:
    """Balanced weighting scales each class by n / (2 * n_class)."""
    n = len(y)
    if class_weighting == "none":
        return np.ones(n)
    counts = {c: max(int(np.sum(y == c)), 1) for c in (0.0, 1.0)}
    return np.where(y == 1.0, n / (2.0 * counts[1.0]), n / (2.0 * counts[0.0]))
