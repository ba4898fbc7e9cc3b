"""Toolkit for training, tuning, comparing, and explaining binary
mortality-risk classifiers on tabular cohort data."""

__version__ = "0.1.0"

from .cohort import (  # noqa: F401
    Cohort,
    ScalerStats,
    SplitPair,
    apply_scaler,
    drop_incomplete,
    encode_categoricals,
    fit_scaler,
    load_csv,
    split,
)
from .learners import ModelConfig, TrainedModel, fit  # noqa: F401
from .schema import FeatureSchema, default_schema  # noqa: F401
