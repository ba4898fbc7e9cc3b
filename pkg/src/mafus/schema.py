"""Feature schema: ordered column declarations for tabular cohorts."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import SchemaError

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
LABEL = "label"

_KINDS = (CONTINUOUS, CATEGORICAL, LABEL)

# Default 25-column cohort layout: 18 continuous clinical measurements,
# 6 categorical covariates, and the binary Status outcome.
_DEFAULT_COLUMNS = [
    ("GOT", CONTINUOUS),
    ("Weight", CONTINUOUS),
    ("Hypertension", CONTINUOUS),
    ("Blood lipids", CONTINUOUS),
    ("SBP", CONTINUOUS),
    ("DBP", CONTINUOUS),
    ("TC", CONTINUOUS),
    ("Triglycerides", CONTINUOUS),
    ("Blood Glucose", CONTINUOUS),
    ("Alkaline Phosphatase", CONTINUOUS),
    ("HDL-C", CONTINUOUS),
    ("LDL-C", CONTINUOUS),
    ("GPT", CONTINUOUS),
    ("GGT", CONTINUOUS),
    ("Age", CONTINUOUS),
    ("HOMA", CONTINUOUS),
    ("Residual Cholesterol", CONTINUOUS),
    ("BMI", CONTINUOUS),
    ("Status", LABEL),
    ("Education", CATEGORICAL),
    ("Job", CATEGORICAL),
    ("Marital Status", CATEGORICAL),
    ("Diabetes condition", CATEGORICAL),
    ("Smoke", CATEGORICAL),
    ("Gender", CATEGORICAL),
]


@dataclass
class FeatureSchema:
    """Ordered (name, kind) column list with exactly one label column.

    categorical_levels records, per categorical column, the raw string
    levels in first-appearance order once a cohort has been encoded.
    """

    columns: list[tuple[str, str]]
    categorical_levels: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        names = [n for n, _ in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in schema")
        for name, kind in self.columns:
            if kind not in _KINDS:
                raise SchemaError(f"unknown column kind {kind!r} for {name!r}")
        labels = [n for n, k in self.columns if k == LABEL]
        if len(labels) != 1:
            raise SchemaError(f"schema must declare exactly one label column, got {labels}")

    @property
    def label(self) -> str:
        return next(n for n, k in self.columns if k == LABEL)

    @property
    def feature_names(self) -> list[str]:
        """All non-label column names, in schema order."""
        return [n for n, k in self.columns if k != LABEL]

    @property
    def continuous(self) -> list[str]:
        return [n for n, k in self.columns if k == CONTINUOUS]

    @property
    def categorical(self) -> list[str]:
        return [n for n, k in self.columns if k == CATEGORICAL]

    def kind_of(self, name: str) -> str:
        for n, k in self.columns:
            if n == name:
                return k
        raise SchemaError(f"unknown column {name!r}")

    def project(self, features: list[str]) -> "FeatureSchema":
        """Schema restricted to the given features plus the label column."""
        keep = set(features) | {self.label}
        cols = [(n, k) for n, k in self.columns if n in keep]
        levels = {n: list(v) for n, v in self.categorical_levels.items() if n in keep}
        return FeatureSchema(cols, levels)

    def to_dict(self) -> dict:
        return {
            "columns": {n: k for n, k in self.columns},
            "categorical_levels": {k: list(v) for k, v in sorted(self.categorical_levels.items())},
        }


def default_schema() -> FeatureSchema:
    """The shipped 25-column cohort schema."""
    return FeatureSchema(list(_DEFAULT_COLUMNS))


def load_schema(path) -> FeatureSchema:
    """Read a schema document: {"columns": {name: kind, ...}}."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or "columns" not in doc:
        raise SchemaError(f"schema file {path} must contain a 'columns' mapping")
    columns = [(str(n), str(k)) for n, k in doc["columns"].items()]
    schema = FeatureSchema(columns)
    schema.categorical_levels = {
        str(k): [str(x) for x in v] for k, v in doc.get("categorical_levels", {}).items()
    }
    return schema


def save_schema(schema: FeatureSchema, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_dict(), fh, indent=2, sort_keys=False)
        fh.write("\n")
