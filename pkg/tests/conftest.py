import numpy as np
import pytest

from mafus.cohort import Cohort
from mafus.schema import CATEGORICAL, CONTINUOUS, LABEL, FeatureSchema


def tiny_schema(n_cont=3, n_cat=0):
    cols = [(f"f{i}", CONTINUOUS) for i in range(n_cont)]
    cols += [(f"c{i}", CATEGORICAL) for i in range(n_cat)]
    cols.append(("Status", LABEL))
    return FeatureSchema(cols)


def make_cohort(rows, labels, schema=None):
    rows = np.asarray(rows, dtype=np.float64)
    if schema is None:
        schema = tiny_schema(rows.shape[1])
    return Cohort(schema, rows, np.asarray(labels, dtype=np.float64),
                  np.arange(rows.shape[0], dtype=np.int64))


def separable_cohort(n=100, d=4, seed=0, gap=2.0):
    """Two Gaussian blobs separated along feature 0."""
    rng = np.random.default_rng(seed)
    labels = (rng.random(n) < 0.5).astype(np.float64)
    rows = rng.normal(size=(n, d))
    rows[:, 0] += gap * labels
    return make_cohort(rows, labels)


@pytest.fixture
def small_separable():
    return separable_cohort(n=80, d=3, seed=3)


class LinearModel:
    """Hand-built linear scorer for attribution oracles."""

    algorithm = "linear-stub"
    score_kind = "margin"
    degenerate = False

    def __init__(self, w, b=0.0):
        self.w = np.asarray(w, dtype=np.float64)
        self.b = float(b)
        self.n_features = len(self.w)

    def score(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            return float(x @ self.w + self.b)
        return x @ self.w + self.b

    def predict(self, x):
        s = self.score(x)
        if np.ndim(s) == 0:
            return int(s >= 0.0)
        return (s >= 0.0).astype(np.int64)
