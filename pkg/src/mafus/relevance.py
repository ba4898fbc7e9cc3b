"""Boosted-tree feature relevance and thresholded selection.

The relevance score of a feature is the total number of tree splits
that use it across a fitted boosting ensemble (gain-based importance is
available as an alternative). Selection keeps features scoring strictly
above the threshold, plus any forced inclusions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cohort import Cohort
from .errors import ContractError, SelectionError
from .learners import ModelConfig, fit

DEFAULT_THRESHOLD = 105.0


def default_booster_config(seed: int = 1) -> ModelConfig:
    return ModelConfig("xgb", {"n_estimators": 100, "max_depth": 6, "learning_rate": 0.1}, seed=seed)


@dataclass
class RelevanceReport:
    scores: dict[str, float]              # feature -> relevance score
    ranking: list[str]                    # descending score, ties in schema order
    importance: str                       # splits | gain
    threshold: float | None = None
    forced: list[str] = field(default_factory=list)
    selected: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "scores": self.scores,
            "ranking": self.ranking,
            "importance": self.importance,
            "threshold": self.threshold,
            "forced": self.forced,
            "selected": self.selected,
        }


def relevance_scores(train: Cohort, booster_config: ModelConfig | None = None,
                     importance: str = "splits") -> RelevanceReport:
    """Score every feature by split use in a boosting ensemble."""
    config = booster_config or default_booster_config()
    if config.algorithm != "xgb":
        raise ContractError("relevance booster must be an xgb config")
    if importance not in ("splits", "gain"):
        raise ContractError(f"unknown importance kind {importance!r}")
    model = fit(config, train)
    names = train.feature_names
    if model.degenerate:
        values = np.zeros(len(names))
    else:
        values = model.split_count_total().astype(np.float64) if importance == "splits" \
            else model.split_gain_total()
    scores = {name: float(v) for name, v in zip(names, values)}
    ranking = sorted(names, key=lambda f: (-scores[f], names.index(f)))
    return RelevanceReport(scores=scores, ranking=ranking, importance=importance)


def select_features(report: RelevanceReport, threshold: float = DEFAULT_THRESHOLD,
                    forced: list[str] | tuple = ("Gender",)) -> RelevanceReport:
    """Completed report with selected = {score > threshold} | forced."""
    unknown = [f for f in forced if f not in report.scores]
    if unknown:
        raise ContractError(f"forced feature {unknown[0]!r} not in the scored schema")
    chosen = {f for f, s in report.scores.items() if s > threshold} | set(forced)
    selected = [f for f in report.scores if f in chosen]  # schema order
    if not selected:
        raise SelectionError(f"no feature scores above {threshold} and none forced")
    return RelevanceReport(
        scores=dict(report.scores),
        ranking=list(report.ranking),
        importance=report.importance,
        threshold=threshold,
        forced=list(forced),
        selected=selected,
    )
