"""Versioned on-disk model artifact.

A single JSON document bundles everything the serving layer needs:
the fitted model parameters, the scaler fitted at training time, the
selected feature list (with kinds and categorical levels), an optional
background set for attributions, and an optional stored test-partition
beeswarm table. Floats are serialized at full precision, so a saved
model reloads to bit-identical scores.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .cohort import ScalerStats
from .errors import ConfigError
from .learners import ModelConfig, TrainedModel, model_from_params

FORMAT_VERSION = 1


@dataclass
class ModelArtifact:
    model: TrainedModel
    scaler: ScalerStats
    selected_features: list[str]
    feature_kinds: dict[str, str]
    categorical_levels: dict[str, list[str]] = field(default_factory=dict)
    feature_ranges: dict[str, tuple[float, float]] = field(default_factory=dict)
    background: np.ndarray | None = None          # standardized rows
    partition_summary: dict | None = None          # beeswarm rows + order

    def to_dict(self) -> dict:
        doc = {
            "format_version": FORMAT_VERSION,
            "algorithm": self.model.algorithm,
            "config": self.model.config.to_dict(),
            "n_features": self.model.n_features,
            "params": self.model.params_to_dict(),
            "scaler": self.scaler.to_dict(),
            "selected_features": list(self.selected_features),
            "feature_kinds": dict(self.feature_kinds),
            "categorical_levels": {k: list(v) for k, v in self.categorical_levels.items()},
            "feature_ranges": {k: [v[0], v[1]] for k, v in self.feature_ranges.items()},
        }
        if self.background is not None:
            doc["background"] = np.asarray(self.background).tolist()
        if self.partition_summary is not None:
            doc["partition_summary"] = self.partition_summary
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelArtifact":
        if doc.get("format_version") != FORMAT_VERSION:
            raise ConfigError(f"unsupported artifact format {doc.get('format_version')!r}")
        config = ModelConfig.from_dict(doc["config"])
        model = model_from_params(config, int(doc["n_features"]), doc["params"])
        background = doc.get("background")
        return cls(
            model=model,
            scaler=ScalerStats.from_dict(doc["scaler"]),
            selected_features=[str(f) for f in doc["selected_features"]],
            feature_kinds={str(k): str(v) for k, v in doc["feature_kinds"].items()},
            categorical_levels={str(k): [str(x) for x in v]
                                for k, v in doc.get("categorical_levels", {}).items()},
            feature_ranges={str(k): (float(v[0]), float(v[1]))
                            for k, v in doc.get("feature_ranges", {}).items()},
            background=None if background is None else np.asarray(background, dtype=np.float64),
            partition_summary=doc.get("partition_summary"),
        )


def save_artifact(artifact: ModelArtifact, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(artifact.to_dict(), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_artifact(path) -> tuple[ModelArtifact, str]:
    """Load an artifact and return it with its content hash."""
    with open(path, "rb") as fh:
        raw = fh.read()
    digest = hashlib.sha256(raw).hexdigest()
    return ModelArtifact.from_dict(json.loads(raw.decode("utf-8"))), digest
