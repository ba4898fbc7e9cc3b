"""Cohort loading, cleaning, encoding, standardization, and splitting.

All operations are pure: they return new Cohort values and never mutate
their inputs. Missing cells are represented as NaN until drop_incomplete
removes the affected rows.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    ContractError,
    EmptyInputError,
    EmptyResultError,
    ParseError,
    SchemaError,
    SizingError,
)
from .schema import CATEGORICAL, CONTINUOUS, FeatureSchema

MISSING_TOKENS = ("", "NA")

_LABEL_WORDS = {"no": 0.0, "yes": 1.0}


@dataclass(frozen=True)
class Cohort:
    """n x d matrix of real-encoded feature values plus binary labels."""

    schema: FeatureSchema
    rows: np.ndarray          # float64, shape (n, d)
    labels: np.ndarray        # float64, shape (n,); {0,1} once clean
    row_ids: np.ndarray       # int64, stable per-row identifiers

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.float64)
        ids = np.asarray(self.row_ids, dtype=np.int64)
        if rows.ndim != 2:
            raise ContractError("cohort rows must be a 2-D matrix")
        if rows.shape[0] != labels.shape[0] or rows.shape[0] != ids.shape[0]:
            raise ContractError("rows, labels, and row_ids must have equal length")
        if rows.shape[1] != len(self.schema.feature_names):
            raise ContractError(
                f"row width {rows.shape[1]} != schema feature count {len(self.schema.feature_names)}"
            )
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "row_ids", ids)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    @property
    def feature_names(self) -> list[str]:
        return self.schema.feature_names

    def feature_index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise ContractError(f"unknown feature {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.feature_index(name)]

    def subset(self, indices) -> "Cohort":
        idx = np.asarray(indices, dtype=np.int64)
        return replace(self, rows=self.rows[idx], labels=self.labels[idx], row_ids=self.row_ids[idx])

    def project(self, features: list[str]) -> "Cohort":
        """Restrict to the given feature columns (schema order preserved)."""
        ordered = [f for f in self.feature_names if f in set(features)]
        missing = set(features) - set(self.feature_names)
        if missing:
            raise ContractError(f"unknown features {sorted(missing)}")
        cols = [self.feature_index(f) for f in ordered]
        return Cohort(self.schema.project(ordered), self.rows[:, cols], self.labels, self.row_ids)


@dataclass(frozen=True)
class ScalerStats:
    """Per continuous feature: (mean, population stddev) in feature units."""

    stats: dict[str, tuple[float, float]]

    def to_dict(self) -> dict:
        return {name: [m, s] for name, (m, s) in self.stats.items()}

    @classmethod
    def from_dict(cls, doc: dict) -> "ScalerStats":
        return cls({str(k): (float(v[0]), float(v[1])) for k, v in doc.items()})


@dataclass(frozen=True)
class SplitPair:
    train: Cohort
    test: Cohort
    seed: int
    ratio: float


def _parse_label(cell: str, row: int, column: str) -> float:
    token = cell.strip()
    if token in MISSING_TOKENS:
        return math.nan
    word = _LABEL_WORDS.get(token.lower())
    if word is not None:
        return word
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"row {row}, column {column!r}: cannot parse label {cell!r}") from None
    if value not in (0.0, 1.0):
        raise ParseError(f"row {row}, column {column!r}: label must be 0/1 or no/yes, got {cell!r}")
    return value


def load_csv(path, schema: FeatureSchema) -> Cohort:
    """Load a UTF-8 comma-separated file against a schema.

    Header must match the schema's column names (order-insensitive).
    Empty string or NA marks a missing cell. Non-numeric categorical
    columns are coded by first appearance; the mapping lands in the
    returned cohort's schema.categorical_levels.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInputError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        records = [row for row in reader if row]

    declared = set(n for n, _ in schema.columns)
    seen = set(header)
    unknown = sorted(seen - declared)
    if unknown:
        raise SchemaError(f"{path}: unknown column {unknown[0]!r}")
    absent = sorted(declared - seen)
    if absent:
        raise SchemaError(f"{path}: missing column {absent[0]!r}")
    if not records:
        raise EmptyInputError(f"{path}: no data rows")

    col_of = {name: header.index(name) for name in declared}
    n = len(records)
    feature_names = schema.feature_names
    rows = np.full((n, len(feature_names)), np.nan)
    labels = np.full(n, np.nan)
    levels: dict[str, list[str]] = {}

    # Per-column pass keeps categorical handling simple: a column with any
    # non-numeric cell is treated as string-coded throughout.
    for name, kind in schema.columns:
        raw = [rec[col_of[name]].strip() if col_of[name] < len(rec) else "" for rec in records]
        if kind == "label":
            for i, cell in enumerate(raw):
                labels[i] = _parse_label(cell, i, name)
            continue
        j = feature_names.index(name)
        if kind == CONTINUOUS:
            for i, cell in enumerate(raw):
                if cell in MISSING_TOKENS:
                    continue
                try:
                    rows[i, j] = float(cell)
                except ValueError:
                    raise ParseError(f"row {i}, column {name!r}: cannot parse {cell!r}") from None
            continue
        # categorical: numeric if every present cell parses as a number
        present = [c for c in raw if c not in MISSING_TOKENS]
        numeric = True
        for cell in present:
            try:
                float(cell)
            except ValueError:
                numeric = False
                break
        if numeric:
            for i, cell in enumerate(raw):
                if cell not in MISSING_TOKENS:
                    rows[i, j] = float(cell)
        else:
            codes: dict[str, int] = {}
            for i, cell in enumerate(raw):
                if cell in MISSING_TOKENS:
                    continue
                if cell not in codes:
                    codes[cell] = len(codes)
                rows[i, j] = codes[cell]
            levels[name] = list(codes)

    out_schema = FeatureSchema(list(schema.columns), dict(schema.categorical_levels))
    out_schema.categorical_levels.update(levels)
    return Cohort(out_schema, rows, labels, np.arange(n, dtype=np.int64))


def drop_incomplete(cohort: Cohort) -> Cohort:
    """Remove every row containing a missing cell (label included)."""
    keep = ~(np.isnan(cohort.rows).any(axis=1) | np.isnan(cohort.labels))
    if not keep.any():
        raise EmptyResultError("all rows contain missing values")
    if keep.all():
        return cohort
    return cohort.subset(np.flatnonzero(keep))


def encode_categoricals(cohort: Cohort) -> Cohort:
    """Re-code categorical columns to dense 0-based integer codes.

    Columns whose values already form a subset of {0..m-1} integers are
    left untouched; everything else is coded in first-appearance order.
    Missing cells stay missing.
    """
    rows = cohort.rows.copy()
    levels = dict(cohort.schema.categorical_levels)
    for name in cohort.schema.categorical:
        j = cohort.feature_index(name)
        col = rows[:, j]
        present = col[~np.isnan(col)]
        if present.size == 0:
            continue
        distinct = list(dict.fromkeys(present.tolist()))  # first appearance
        already_coded = all(v == int(v) and 0 <= v < len(distinct) for v in distinct)
        if already_coded:
            continue
        mapping = {v: i for i, v in enumerate(distinct)}
        for i in range(rows.shape[0]):
            if not math.isnan(col[i]):
                rows[i, j] = mapping[col[i]]
        prior = levels.get(name)
        if prior is not None and len(prior) == len(distinct):
            levels[name] = [prior[int(v)] if 0 <= int(v) < len(prior) else str(v) for v in distinct]
        else:
            levels[name] = [_format_level(v) for v in distinct]
    schema = FeatureSchema(list(cohort.schema.columns), levels)
    return Cohort(schema, rows, cohort.labels, cohort.row_ids)


def _format_level(value: float) -> str:
    return str(int(value)) if value == int(value) else repr(value)


def fit_scaler(cohort: Cohort) -> ScalerStats:
    """Mean and population stddev (divisor n) per continuous feature."""
    if cohort.n == 0:
        raise ContractError("cannot fit scaler on an empty cohort")
    stats = {}
    for name in cohort.schema.continuous:
        if name not in cohort.feature_names:
            continue
        col = cohort.column(name)
        stats[name] = (float(np.mean(col)), float(np.std(col)))
    return ScalerStats(stats)


def apply_scaler(cohort: Cohort, stats: ScalerStats) -> Cohort:
    """z-score continuous columns; zero-variance features are shift-only."""
    rows = cohort.rows.copy()
    for name in cohort.schema.continuous:
        if name not in cohort.feature_names:
            continue
        if name not in stats.stats:
            raise ContractError(f"scaler stats missing feature {name!r}")
        mean, std = stats.stats[name]
        j = cohort.feature_index(name)
        if std > 0.0:
            rows[:, j] = (rows[:, j] - mean) / std
        else:
            rows[:, j] = rows[:, j] - mean
    return Cohort(cohort.schema, rows, cohort.labels, cohort.row_ids)


def inverse_scale(values: np.ndarray, name: str, stats: ScalerStats) -> np.ndarray:
    """Map standardized values of one feature back to raw units."""
    if name not in stats.stats:
        return values
    mean, std = stats.stats[name]
    return values * (std if std > 0.0 else 1.0) + mean


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split(cohort: Cohort, ratio: float, seed: int, stratified: bool = False) -> SplitPair:
    """Seeded shuffle-then-cut split; |train| = round(ratio * n).

    Stratified mode allocates per-class train counts by largest remainder
    so each class's train share is within one sample of ratio * n_class.
    """
    if not 0.0 < ratio < 1.0:
        raise ContractError(f"ratio must be in (0,1), got {ratio}")
    n = cohort.n
    if n < 2:
        raise ContractError("need at least 2 rows to split")
    n_train = _round_half_up(ratio * n)
    if n_train <= 0 or n_train >= n:
        raise SizingError(f"split of {n} rows at ratio {ratio} leaves an empty side")

    rng = np.random.default_rng(seed)
    if not stratified:
        order = rng.permutation(n)
        train_idx, test_idx = order[:n_train], order[n_train:]
    else:
        classes = np.unique(cohort.labels)
        shuffled = {c: rng.permutation(np.flatnonzero(cohort.labels == c)) for c in classes}
        quotas = {c: ratio * len(shuffled[c]) for c in classes}
        base = {c: int(math.floor(quotas[c])) for c in classes}
        remaining = n_train - sum(base.values())
        order = sorted(classes, key=lambda c: (-(quotas[c] - base[c]), c))
        for c in order[:remaining]:
            base[c] += 1
        train_parts, test_parts = [], []
        for c in classes:
            take = min(base[c], len(shuffled[c]))
            train_parts.append(shuffled[c][:take])
            test_parts.append(shuffled[c][take:])
        train_idx = np.concatenate(train_parts)
        test_idx = np.concatenate(test_parts)
        if len(train_idx) == 0 or len(test_idx) == 0:
            raise SizingError(f"stratified split of {n} rows at ratio {ratio} leaves an empty side")
    return SplitPair(cohort.subset(train_idx), cohort.subset(test_idx), seed, ratio)


def write_csv(cohort: Cohort, path) -> None:
    """Write a cohort back to CSV in schema column order.

    Categorical columns with recorded levels are written as level
    strings; everything else as numbers. NaN cells become empty.
    """
    levels = cohort.schema.categorical_levels
    names = [n for n, _ in cohort.schema.columns]
    label = cohort.schema.label
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(cohort.n):
            record = []
            for name in names:
                if name == label:
                    value = cohort.labels[i]
                else:
                    value = cohort.rows[i, cohort.feature_index(name)]
                if math.isnan(value):
                    record.append("")
                elif name in levels and value == int(value) and 0 <= int(value) < len(levels[name]):
                    record.append(levels[name][int(value)])
                else:
                    record.append(_format_cell(value))
            writer.writerow(record)


def _format_cell(value: float) -> str:
    return str(int(value)) if value == int(value) and abs(value) < 1e15 else repr(float(value))
