"""Five classifier families behind one fit/predict/score contract."""

from __future__ import annotations

import numpy as np

from ..cohort import Cohort
from ..errors import TrainingError
from .base import (
    ALGORITHMS,
    HYPERPARAMETER_DOMAINS,
    DegenerateModel,
    ModelConfig,
    TrainedModel,
    validate_training_data,
)
from .boosting import BoostedTreesModel, fit_boosted, log_loss
from .forest import ForestModel, fit_forest
from .mlp import MLPModel, fit_mlp
from .svm import SVMModel, fit_svm

__all__ = [
    "ALGORITHMS",
    "HYPERPARAMETER_DOMAINS",
    "ModelConfig",
    "TrainedModel",
    "DegenerateModel",
    "SVMModel",
    "ForestModel",
    "BoostedTreesModel",
    "MLPModel",
    "fit",
    "fit_arrays",
    "log_loss",
]

_MODEL_CLASSES = {
    "svm": SVMModel,
    "rf": ForestModel,
    "xgb": BoostedTreesModel,
    "lgbm": BoostedTreesModel,
    "mlp": MLPModel,
    "degenerate": DegenerateModel,
}


def fit_arrays(config: ModelConfig, X: np.ndarray, y: np.ndarray) -> TrainedModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    validate_training_data(X, y)
    classes = np.unique(y)
    if len(classes) == 1:
        return DegenerateModel(config, X.shape[1], int(classes[0]))
    if config.algorithm == "svm":
        return fit_svm(config, X, y)
    if config.algorithm == "rf":
        return fit_forest(config, X, y)
    if config.algorithm in ("xgb", "lgbm"):
        return fit_boosted(config, X, y)
    if config.algorithm == "mlp":
        return fit_mlp(config, X, y)
    raise TrainingError(f"no trainer for {config.algorithm!r}")


def fit(config: ModelConfig, train: Cohort) -> TrainedModel:
    """Fit a classifier on a cohort; single-class data yields a flagged
    degenerate model that always predicts the sole class."""
    return fit_arrays(config, train.rows, train.labels)


def model_from_params(config: ModelConfig, n_features: int, params: dict) -> TrainedModel:
    kind = params.get("kind")
    if kind == "degenerate":
        return DegenerateModel.params_from_dict(config, n_features, params)
    cls = _MODEL_CLASSES.get(config.algorithm)
    if cls is None or kind not in ("svm", "forest", "boosted", "mlp"):
        raise TrainingError(f"cannot rebuild model of kind {kind!r}")
    return cls.params_from_dict(config, n_features, params)
