"""Shapley-value attribution and explained-prediction partitioning.

Attributions explain the model's real-valued score. A coalition's value
is the interventional expectation over a background set: background
rows with the explained sample's values written onto the coalition
features. Exact mode enumerates all 2^s coalitions and applies the
factorial subset weights; sampled mode averages marginal contributions
over seeded random feature permutations and redistributes the residual
so base + sum(phi) still reconstructs the score (flagged as adjusted).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cohort import Cohort, ScalerStats, inverse_scale
from .errors import ContractError, ExplanationError, MafusError

EXACT_FEATURE_CAP = 15


@dataclass(frozen=True)
class BackgroundSet:
    """Reference rows (standardized space) used to marginalize absent features."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise ContractError("background set needs at least one row")
        object.__setattr__(self, "rows", rows)

    @property
    def size(self) -> int:
        return self.rows.shape[0]


def sample_background(rows: np.ndarray, size: int, seed: int) -> BackgroundSet:
    """Up to `size` training rows drawn without replacement."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.shape[0] <= size:
        return BackgroundSet(rows.copy())
    rng = np.random.default_rng(seed)
    idx = rng.choice(rows.shape[0], size=size, replace=False)
    return BackgroundSet(rows[np.sort(idx)])


@dataclass
class Attribution:
    phi: np.ndarray          # per-feature contribution, score units
    base_value: float        # expected score over the background
    sample_id: int
    method: str = "exact"    # exact | sampled
    adjusted: bool = False   # sampled-mode residual redistribution applied

    def to_dict(self) -> dict:
        return {
            "phi": self.phi.tolist(),
            "base_value": self.base_value,
            "sample_id": self.sample_id,
            "method": self.method,
            "adjusted": self.adjusted,
        }


@dataclass
class ExplainedSample:
    x: np.ndarray
    attribution: Attribution
    yhat: int
    score: float
    row_id: int


@dataclass
class PartitionAB:
    """Explained test samples routed by predicted class."""

    A: list[ExplainedSample] = field(default_factory=list)   # yhat = 0
    B: list[ExplainedSample] = field(default_factory=list)   # yhat = 1
    failed: list[tuple[int, str]] = field(default_factory=list)
    samples: list[ExplainedSample] = field(default_factory=list)  # explained order

    @property
    def shapley_values(self) -> list[Attribution]:
        return [s.attribution for s in self.samples]


def _check_explained_input(model, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.n_features:
        raise ContractError(f"expected a feature vector of length {model.n_features}")
    return x


def _resolve_subset(model, features) -> np.ndarray:
    if features is None:
        return np.arange(model.n_features)
    subset = np.asarray(sorted(set(int(f) for f in features)), dtype=np.int64)
    if subset.size == 0:
        raise ContractError("feature subset must be non-empty")
    if subset.min() < 0 or subset.max() >= model.n_features:
        raise ContractError("feature subset indices out of range")
    return subset


def coalition_value(model, x, F, bg: BackgroundSet) -> float:
    """Mean model score over background rows hybridized with x on F."""
    x = _check_explained_input(model, x)
    if bg.rows.shape[1] != x.shape[0]:
        raise ContractError("background dimension does not match the sample")
    F = sorted(set(int(f) for f in F))
    if F and (min(F) < 0 or max(F) >= x.shape[0]):
        raise ContractError("coalition indices out of range")
    hybrids = bg.rows.copy()
    if F:
        hybrids[:, F] = x[F]
    return float(np.mean(model.score(hybrids)))


def _all_coalition_values(model, x, bg: BackgroundSet, subset: np.ndarray) -> np.ndarray:
    """v[mask] for every coalition mask over `subset`, batch-scored.

    Features outside `subset` are not players: they take x's value in
    every hybrid.
    """
    s = len(subset)
    B = bg.size
    base_rows = bg.rows.copy()
    outside = np.setdiff1d(np.arange(x.shape[0]), subset)
    if outside.size:
        base_rows[:, outside] = x[outside]
    n_masks = 1 << s
    v = np.empty(n_masks)
    chunk = max(1, 65536 // B)
    bits = np.arange(s)
    for start in range(0, n_masks, chunk):
        masks = np.arange(start, min(start + chunk, n_masks))
        block = np.tile(base_rows, (len(masks), 1))
        onbits = ((masks[:, None] >> bits) & 1).astype(bool)       # (m, s)
        expanded = np.repeat(onbits, B, axis=0)                     # (m*B, s)
        for spot, col in enumerate(subset):
            rows_on = expanded[:, spot]
            block[rows_on, col] = x[col]
        scores = np.asarray(model.score(block), dtype=np.float64).reshape(len(masks), B)
        v[masks] = scores.mean(axis=1)
    return v


def shapley_exact(model, x, bg: BackgroundSet, features=None) -> Attribution:
    """Exact subset-weighted Shapley values of the model score.

    phi_j = sum over coalitions F not containing j of
    |F|! (s-|F|-1)! / s! * (v(F + j) - v(F)).
    """
    x = _check_explained_input(model, x)
    subset = _resolve_subset(model, features)
    s = len(subset)
    if s > EXACT_FEATURE_CAP:
        raise ExplanationError(
            f"{s} features exceeds the exact cap ({EXACT_FEATURE_CAP}); use shapley_sampled"
        )
    v = _all_coalition_values(model, x, bg, subset)
    masks = np.arange(1 << s)
    onbits = ((masks[:, None] >> np.arange(s)) & 1).astype(bool)
    sizes = onbits.sum(axis=1)
    fact = [math.factorial(i) for i in range(s + 1)]
    weights = np.array([fact[f] * fact[s - f - 1] / fact[s] for f in range(s)])

    phi = np.zeros(model.n_features)
    for spot, col in enumerate(subset):
        without = masks[~onbits[:, spot]]
        with_j = without | (1 << spot)
        phi[col] = float(np.sum(weights[sizes[without]] * (v[with_j] - v[without])))
    return Attribution(phi=phi, base_value=float(v[0]), sample_id=-1)


def shapley_sampled(model, x, bg: BackgroundSet, permutations: int, seed: int,
                    features=None) -> Attribution:
    """Permutation-sampling estimate of the exact attribution."""
    if permutations < 1:
        raise ContractError("permutations must be >= 1")
    x = _check_explained_input(model, x)
    subset = _resolve_subset(model, features)
    s = len(subset)
    base_rows = bg.rows.copy()
    outside = np.setdiff1d(np.arange(x.shape[0]), subset)
    if outside.size:
        base_rows[:, outside] = x[outside]
    base_value = float(np.mean(model.score(base_rows)))
    full_value = float(model.score(x))

    rng = np.random.default_rng(seed)
    B = bg.size
    phi = np.zeros(model.n_features)
    for _ in range(permutations):
        order = rng.permutation(s)
        block = np.empty((s * B, x.shape[0]))
        rows = base_rows.copy()
        for t, spot in enumerate(order):
            rows[:, subset[spot]] = x[subset[spot]]
            block[t * B:(t + 1) * B] = rows
        values = np.asarray(model.score(block), dtype=np.float64).reshape(s, B).mean(axis=1)
        prev = base_value
        for t, spot in enumerate(order):
            phi[subset[spot]] += values[t] - prev
            prev = values[t]
    phi /= permutations

    residual = full_value - base_value - float(np.sum(phi))
    magnitudes = np.abs(phi)
    total = float(np.sum(magnitudes))
    if total > 0.0:
        phi = phi + residual * magnitudes / total
    elif s > 0:
        phi = phi + residual / s * np.isin(np.arange(model.n_features), subset)
    return Attribution(phi=phi, base_value=base_value, sample_id=-1,
                       method="sampled", adjusted=True)


def explain_sample(model, x, bg: BackgroundSet, mode: str = "auto",
                   permutations: int = 200, seed: int = 1, features=None) -> Attribution:
    subset = _resolve_subset(model, features)
    if mode == "exact" or (mode == "auto" and len(subset) <= EXACT_FEATURE_CAP):
        return shapley_exact(model, x, bg, features)
    if mode in ("auto", "sampled"):
        return shapley_sampled(model, x, bg, permutations, seed, features)
    raise ContractError(f"unknown attribution mode {mode!r}")


def partition_run(model, test: Cohort, bg: BackgroundSet, mode: str = "auto",
                  permutations: int = 200, seed: int = 1) -> PartitionAB:
    """Explain every test sample and route it by predicted class.

    Per-sample attribution failures are recorded without aborting.
    """
    if test.d != model.n_features:
        raise ContractError("test cohort feature count does not match the model")
    partition = PartitionAB()
    for i in range(test.n):
        x = test.rows[i]
        row_id = int(test.row_ids[i])
        try:
            yhat = int(model.predict(x))
            attribution = explain_sample(model, x, bg, mode=mode,
                                         permutations=permutations, seed=seed + i)
            attribution.sample_id = row_id
            sample = ExplainedSample(x=x.copy(), attribution=attribution, yhat=yhat,
                                     score=float(model.score(x)), row_id=row_id)
        except MafusError as exc:
            partition.failed.append((row_id, str(exc)))
            continue
        partition.samples.append(sample)
        (partition.B if yhat == 1 else partition.A).append(sample)
    return partition


# ---------------------------------------------------------------------------
# Plot-data builders
# ---------------------------------------------------------------------------

def feature_order_by_impact(partition: PartitionAB, feature_names: list[str]) -> list[str]:
    """Features by mean |phi| descending, ties in schema order."""
    if not partition.samples:
        raise ContractError("empty partition")
    mat = np.vstack([s.attribution.phi for s in partition.samples])
    mean_abs = np.mean(np.abs(mat), axis=0)
    order = sorted(range(len(feature_names)), key=lambda j: (-mean_abs[j], j))
    return [feature_names[j] for j in order]


def summary_data(partition: PartitionAB, feature_names: list[str],
                 scaler: ScalerStats | None = None) -> tuple[list[dict], list[str]]:
    """Beeswarm rows: one per (explained sample, feature)."""
    order = feature_order_by_impact(partition, feature_names)
    rank = {f: r for r, f in enumerate(order)}
    rows = []
    for f in order:
        j = feature_names.index(f)
        for sample in partition.samples:
            std_value = float(sample.x[j])
            raw = inverse_scale(np.asarray([std_value]), f, scaler)[0] if scaler else std_value
            rows.append({
                "feature": f,
                "feature_rank": rank[f],
                "sample_id": sample.row_id,
                "shap": float(sample.attribution.phi[j]),
                "value_std": std_value,
                "value_raw": float(raw),
            })
    return rows, order


def dependence_data(partition: PartitionAB, feature: str, interaction: str,
                    feature_names: list[str], scaler: ScalerStats | None = None) -> list[dict]:
    """Scatter rows: feature value vs its shap, colored by an interaction feature."""
    for name in (feature, interaction):
        if name not in feature_names:
            raise ContractError(f"unknown feature {name!r}")
    j = feature_names.index(feature)
    k = feature_names.index(interaction)
    rows = []
    for sample in partition.samples:
        value = float(sample.x[j])
        inter = float(sample.x[k])
        rows.append({
            "sample_id": sample.row_id,
            "value_std": value,
            "value_raw": float(inverse_scale(np.asarray([value]), feature, scaler)[0]) if scaler else value,
            "shap": float(sample.attribution.phi[j]),
            "interaction_std": inter,
            "interaction_raw": float(inverse_scale(np.asarray([inter]), interaction, scaler)[0]) if scaler else inter,
        })
    return rows


def force_data(sample: ExplainedSample, feature_names: list[str]) -> dict:
    """Signed contributions sorted by |phi|, plus base and final score."""
    phi = sample.attribution.phi
    order = sorted(range(len(feature_names)), key=lambda j: (-abs(phi[j]), j))
    contributions = [{"feature": feature_names[j], "phi": float(phi[j])} for j in order]
    positive = float(sum(c["phi"] for c in contributions if c["phi"] > 0.0))
    negative = float(sum(c["phi"] for c in contributions if c["phi"] < 0.0))
    return {
        "sample_id": sample.row_id,
        "base_value": sample.attribution.base_value,
        "score": sample.score,
        "yhat": sample.yhat,
        "method": sample.attribution.method,
        "adjusted": sample.attribution.adjusted,
        "contributions": contributions,
        "positive_total": positive,
        "negative_total": negative,
    }
