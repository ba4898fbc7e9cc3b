"""Seeded stratified k-fold CV and exhaustive grid search.

The search objective is the F1 score of class 1 (the minority Mortality
Yes class). Every grid point is evaluated on one shared fold assignment;
fits that fail score 0 with a failure note instead of aborting.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .cohort import Cohort
from .errors import ConfigError, MafusError, StratificationError
from .learners import ModelConfig, fit
from .metrics import EvalReport, evaluate


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    fold_of: np.ndarray  # fold index per sample
    seed: int

    def train_val(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        val = np.flatnonzero(self.fold_of == fold)
        train = np.flatnonzero(self.fold_of != fold)
        return train, val


def stratified_kfold(labels, k: int, seed: int) -> FoldAssignment:
    """Per-class counts within 1 of proportional and fold sizes within 1.

    Each class's members are shuffled by the seed and dealt into folds;
    the per-class remainder goes to the folds that are currently
    smallest (ties to the lowest fold index), which keeps total fold
    sizes balanced for binary labels.
    """
    y = np.asarray(labels)
    if k < 2:
        raise StratificationError(f"k must be >= 2, got {k}")
    classes = sorted(float(c) for c in np.unique(y))
    for c in classes:
        if int(np.sum(y == c)) < k:
            raise StratificationError(f"class {c:g} has fewer than k={k} members")

    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(y), dtype=np.int64)
    totals = np.zeros(k, dtype=np.int64)
    for c in classes:
        members = rng.permutation(np.flatnonzero(y == c))
        base, extra = divmod(len(members), k)
        counts = np.full(k, base, dtype=np.int64)
        # order folds by current total (then index); smallest get the extras
        order = np.lexsort((np.arange(k), totals))
        counts[order[:extra]] += 1
        pos = 0
        for fold in range(k):
            fold_of[members[pos:pos + counts[fold]]] = fold
            pos += counts[fold]
        totals += counts
    return FoldAssignment(k, fold_of, seed)


@dataclass(frozen=True)
class HyperGrid:
    """Ordered hyperparameter axes for one algorithm."""

    algorithm: str
    axes: tuple[tuple[str, tuple], ...]  # (name, values) in declared order
    base_seed: int = 1
    class_weighting: str = "none"

    @property
    def size(self) -> int:
        out = 1
        for _, values in self.axes:
            out *= len(values)
        return out

    def enumerate(self, master_seed: int | None = None) -> list[ModelConfig]:
        """Cartesian product in declared axis order, first axis slowest.

        Config i gets fit seed master_seed + i (fold shuffling uses the
        master seed itself).
        """
        master = self.base_seed if master_seed is None else master_seed
        names = [n for n, _ in self.axes]
        configs = []
        for index, combo in enumerate(itertools.product(*[v for _, v in self.axes])):
            hp = dict(zip(names, combo))
            configs.append(ModelConfig(
                algorithm=self.algorithm,
                hyperparameters=hp,
                seed=master + index,
                class_weighting=self.class_weighting,
            ))
        return configs

    def to_dict(self) -> dict:
        axes = [{"name": "seed", "values": [self.base_seed], "type": "integer"}]
        if self.class_weighting != "none":
            axes.append({"name": "class_weight", "values": [self.class_weighting], "type": "string"})
        for name, values in self.axes:
            axes.append({"name": name, "values": list(values), "type": _type_tag(values)})
        return {"algorithm": self.algorithm, "axes": axes}


def _type_tag(values) -> str:
    kinds = set()
    for v in values:
        if isinstance(v, bool) or v is None:
            kinds.add("string")
        elif isinstance(v, int):
            kinds.add("integer")
        elif isinstance(v, float):
            kinds.add("float")
        elif isinstance(v, (list, tuple)):
            kinds.add("integer-list")
        else:
            kinds.add("string")
    if len(kinds) == 1:
        return kinds.pop()
    return "mixed"


def grid_from_dict(doc: dict) -> HyperGrid:
    algorithm = doc.get("algorithm")
    axes_doc = doc.get("axes")
    if not algorithm or not isinstance(axes_doc, list):
        raise ConfigError("grid document must declare 'algorithm' and an 'axes' list")
    base_seed = 1
    class_weighting = "none"
    axes: list[tuple[str, tuple]] = []
    for axis in axes_doc:
        name = axis["name"]
        values = axis["values"]
        if name == "seed":
            if len(values) != 1:
                raise ConfigError("seed axis must be single-valued")
            base_seed = int(values[0])
            continue
        if name == "class_weight":
            if len(values) != 1 or values[0] not in ("none", "balanced"):
                raise ConfigError("class_weight axis must be ['none'] or ['balanced']")
            class_weighting = values[0]
            continue
        values = tuple(tuple(v) if isinstance(v, list) else v for v in values)
        axes.append((name, values))
    if not axes:
        raise ConfigError(f"grid for {algorithm} declares no hyperparameter axes")
    return HyperGrid(algorithm, tuple(axes), base_seed, class_weighting)


def load_grid(path) -> HyperGrid:
    with open(path, encoding="utf-8") as fh:
        return grid_from_dict(json.load(fh))


def save_grid(grid: HyperGrid, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(grid.to_dict(), fh, indent=2)
        fh.write("\n")


def default_grid(algorithm: str) -> HyperGrid:
    """The shipped full search spaces (large; see demo_grid for quick runs)."""
    if algorithm == "mlp":
        sizes = tuple(itertools.product((128, 256, 512), repeat=3))
        return HyperGrid("mlp", (
            ("hidden_layer_sizes", sizes),
            ("activation", ("tanh", "relu")),
            ("solver", ("sgd", "adam", "lbfgs")),
            ("alpha", (0.0001, 0.001, 0.01, 0.1, 0.9)),
            ("learning_rate", ("constant", "adaptive")),
        ))
    if algorithm == "rf":
        return HyperGrid("rf", (
            ("n_estimators", (100, 200, 300, 400, 500)),
            ("max_features", ("auto", "sqrt", "log2")),
            ("max_depth", (80, 90, 100, 110, 120, 130, 140, 150, None)),
            ("criterion", ("gini", "entropy")),
        ), class_weighting="balanced")
    if algorithm == "svm":
        return HyperGrid("svm", (
            ("kernel", ("rbf", "linear")),
            ("gamma", (1.0, 0.1, 0.001, 0.0001)),
        ), class_weighting="balanced")
    if algorithm == "xgb":
        return HyperGrid("xgb", (
            ("gamma", (1.0, 0.1, 0.01, 0.001, 0.0001)),
            ("learning_rate", (0.0001, 0.001, 0.01, 0.1, 1.0)),
            ("max_depth", (3, 6, 9, 12, 15, 18)),
            ("colsample_bytree", (0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)),
            ("reg_alpha", (1e-5, 1e-2, 0.1, 1.0, 10.0, 100.0)),
        ))
    if algorithm == "lgbm":
        return HyperGrid("lgbm", (
            ("learning_rate", (0.1, 0.05)),
            ("num_leaves", (3, 10, 31, 50, 100, 200)),
            ("reg_alpha", (None, 0.01, 0.05, 0.1)),
            ("colsample_bytree", (0.6, 0.8, 1.0)),
            ("max_depth", (-1, 3, 5, 8, 10)),
            ("reg_lambda", (None, 0.01, 0.02, 0.03)),
            ("n_estimators", (50, 100, 300)),
        ))
    raise ConfigError(f"no default grid for {algorithm!r}")


def demo_grid(algorithm: str) -> HyperGrid:
    """Small built-in grids for desk-scale runs."""
    if algorithm == "svm":
        return HyperGrid("svm", (
            ("kernel", ("rbf",)),
            ("gamma", (1.0, 0.1)),
        ), class_weighting="balanced")
    if algorithm == "rf":
        return HyperGrid("rf", (
            ("n_estimators", (60,)),
            ("max_features", ("sqrt",)),
            ("max_depth", (None,)),
            ("criterion", ("gini", "entropy")),
        ), class_weighting="balanced")
    if algorithm == "xgb":
        return HyperGrid("xgb", (
            ("gamma", (0.001,)),
            ("learning_rate", (0.1, 0.3)),
            ("max_depth", (3,)),
            ("colsample_bytree", (0.9,)),
            ("reg_alpha", (0.01,)),
            ("n_estimators", (60,)),
        ))
    if algorithm == "lgbm":
        return HyperGrid("lgbm", (
            ("learning_rate", (0.1,)),
            ("num_leaves", (15, 31)),
            ("reg_alpha", (0.01,)),
            ("colsample_bytree", (0.9,)),
            ("max_depth", (-1,)),
            ("reg_lambda", (0.01,)),
            ("n_estimators", (60,)),
        ))
    if algorithm == "mlp":
        return HyperGrid("mlp", (
            ("hidden_layer_sizes", ((32, 32, 32),)),
            ("activation", ("tanh", "relu")),
            ("solver", ("adam",)),
            ("alpha", (0.0001,)),
            ("learning_rate", ("constant",)),
            ("epochs", (120,)),
        ))
    raise ConfigError(f"no demo grid for {algorithm!r}")


@dataclass
class CVResult:
    config: ModelConfig
    fold_reports: list[EvalReport]
    mean_f1: float
    enumeration_index: int
    rank: int = 0
    failure: str | None = None

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "fold_f1": [r.class_f1("Yes") for r in self.fold_reports],
            "fold_reports": [r.to_dict() for r in self.fold_reports],
            "mean_f1": self.mean_f1,
            "enumeration_index": self.enumeration_index,
            "rank": self.rank,
            "failure": self.failure,
        }


@dataclass
class GridSearchOutcome:
    best: ModelConfig
    results: list[CVResult]  # sorted by (-mean_f1, enumeration index)
    folds: FoldAssignment


def evaluate_config(config: ModelConfig, train: Cohort, folds: FoldAssignment) -> tuple[list[EvalReport], str | None]:
    reports = []
    for fold in range(folds.k):
        tr_idx, val_idx = folds.train_val(fold)
        try:
            model = fit(config, train.subset(tr_idx))
            val = train.subset(val_idx)
            preds = model.predict(val.rows)
            scores = model.score(val.rows)
            reports.append(evaluate(val.labels, preds, scores))
        except MafusError as exc:
            return [], f"fold {fold}: {exc}"
    return reports, None


def grid_search(grid: HyperGrid, train: Cohort, k: int, seed: int | None = None) -> GridSearchOutcome:
    """Exhaustive search maximizing mean class-1 F1 over shared folds.

    Ties break by enumeration order. A config whose fit fails anywhere
    scores 0 and carries a failure note.
    """
    master = grid.base_seed if seed is None else seed
    folds = stratified_kfold(train.labels, k, master)
    configs = grid.enumerate(master)
    if not configs:
        raise ConfigError("empty grid")
    results = []
    for index, config in enumerate(configs):
        reports, failure = evaluate_config(config, train, folds)
        mean_f1 = float(np.mean([r.class_f1("Yes") for r in reports])) if reports else 0.0
        results.append(CVResult(config, reports, mean_f1, index, failure=failure))
    ordered = sorted(results, key=lambda r: (-r.mean_f1, r.enumeration_index))
    for rank, result in enumerate(ordered, start=1):
        result.rank = rank
    return GridSearchOutcome(best=ordered[0].config, results=ordered, folds=folds)
