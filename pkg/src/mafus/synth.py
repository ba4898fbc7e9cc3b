"""Synthetic cohort generation for desk-scale verification.

Deliberately simple distributions (independent Gaussians for continuous
features, small categorical draws) so test oracles stay analyzable.
Class-1 rows receive a mean shift of `signal` standard deviations on
Age, Blood Glucose, and HOMA; every other column is noise.
"""

from __future__ import annotations

import math

import numpy as np

from .cohort import Cohort
from .errors import ContractError
from .schema import default_schema

SIGNAL_FEATURES = ("Age", "Blood Glucose", "HOMA")

# (mean, stddev) per continuous feature, loosely clinical magnitudes.
_CONTINUOUS_PARAMS = {
    "GOT": (25.0, 10.0),
    "Weight": (78.0, 14.0),
    "Hypertension": (0.5, 0.3),
    "Blood lipids": (1.2, 0.4),
    "SBP": (130.0, 18.0),
    "DBP": (82.0, 11.0),
    "TC": (205.0, 38.0),
    "Triglycerides": (140.0, 70.0),
    "Blood Glucose": (102.0, 24.0),
    "Alkaline Phosphatase": (75.0, 22.0),
    "HDL-C": (50.0, 13.0),
    "LDL-C": (128.0, 33.0),
    "GPT": (30.0, 16.0),
    "GGT": (32.0, 20.0),
    "Age": (56.0, 12.0),
    "HOMA": (2.6, 1.6),
    "Residual Cholesterol": (27.0, 12.0),
    "BMI": (29.0, 4.5),
}

_CATEGORICAL_PARAMS = {
    "Education": [0.35, 0.30, 0.20, 0.15],
    "Job": [0.45, 0.35, 0.20],
    "Marital Status": [0.55, 0.25, 0.12, 0.08],
    "Diabetes condition": [0.85, 0.15],
    "Smoke": [0.50, 0.30, 0.20],
    "Gender": [0.45, 0.55],
}

_GENDER_LEVELS = ["F", "M"]


def gen_synthetic(n: int, prevalence: float, signal: float, seed: int,
                  exact_counts: bool = False) -> Cohort:
    """Clean, encoded 25-column cohort with a seeded class structure."""
    if not 0.0 < prevalence < 1.0:
        raise ContractError(f"prevalence must be in (0,1), got {prevalence}")
    if n < 20:
        raise ContractError(f"need n >= 20, got {n}")
    rng = np.random.default_rng(seed)
    schema = default_schema()
    levels = dict(schema.categorical_levels)
    levels["Gender"] = list(_GENDER_LEVELS)
    schema.categorical_levels = levels

    if exact_counts:
        n_pos = int(math.floor(prevalence * n + 0.5))
        labels = np.zeros(n)
        labels[rng.permutation(n)[:n_pos]] = 1.0
    else:
        labels = (rng.random(n) < prevalence).astype(np.float64)

    names = schema.feature_names
    rows = np.empty((n, len(names)))
    for j, name in enumerate(names):
        if name in _CONTINUOUS_PARAMS:
            mu, sigma = _CONTINUOUS_PARAMS[name]
            col = rng.normal(mu, sigma, size=n)
            if name in SIGNAL_FEATURES:
                col = col + signal * sigma * labels
            rows[:, j] = col
        else:
            probs = _CATEGORICAL_PARAMS[name]
            rows[:, j] = rng.choice(len(probs), size=n, p=probs)
    return Cohort(schema, rows, labels, np.arange(n, dtype=np.int64))
