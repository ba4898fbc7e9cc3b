"""HTTP service exposing a frozen model artifact.

Endpoints: POST /predict, POST /explain, POST /whatif, GET /model/meta,
GET /summary, GET /healthz. Inputs are raw-unit feature values; the
service standardizes them with the artifact's stored scaler. Every
response carries the artifact content hash so clients can detect model
swaps. The artifact is immutable after load; all endpoints are
stateless.
"""

from __future__ import annotations

import math

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware

from .artifact import ModelArtifact, load_artifact
from .explain import EXACT_FEATURE_CAP, BackgroundSet, explain_sample

LABEL_TEXT = {0: "Mortality (No)", 1: "Mortality (Yes)"}
WHATIF_PERMUTATIONS = 200


class _ServingState:
    def __init__(self, artifact: ModelArtifact | None, digest: str | None):
        self.artifact = artifact
        self.digest = digest
        self.background = None
        if artifact is not None and artifact.background is not None:
            self.background = BackgroundSet(artifact.background)


def _standardize(state: _ServingState, values: dict) -> np.ndarray:
    bundle = state.artifact
    selected = bundle.selected_features
    x = np.empty(len(selected))
    for j, name in enumerate(selected):
        value = float(values[name])
        if name in bundle.scaler.stats:
            mean, std = bundle.scaler.stats[name]
            value = (value - mean) / std if std > 0 else value - mean
        x[j] = value
    return x


def _validate_input(state: _ServingState, body) -> dict:
    if state.artifact is None:
        raise HTTPException(status_code=503, detail="no model artifact loaded")
    if not isinstance(body, dict) or not body:
        raise HTTPException(status_code=400, detail="body must map feature names to values")
    selected = state.artifact.selected_features
    unknown = sorted(set(body) - set(selected))
    if unknown:
        raise HTTPException(status_code=400, detail=f"unknown feature {unknown[0]!r}")
    missing = [f for f in selected if f not in body]
    if missing:
        raise HTTPException(status_code=400, detail=f"missing feature {missing[0]!r}")
    values = {}
    for name in selected:
        try:
            value = float(body[name])
        except (TypeError, ValueError):
            raise HTTPException(status_code=400, detail=f"feature {name!r} is not numeric") from None
        if not math.isfinite(value):
            raise HTTPException(status_code=422, detail=f"feature {name!r} is not finite")
        levels = state.artifact.categorical_levels.get(name)
        if levels is not None and value not in range(len(levels)):
            raise HTTPException(
                status_code=400,
                detail=f"feature {name!r} must be a code in 0..{len(levels) - 1}",
            )
        values[name] = value
    return values


def _prediction_body(state: _ServingState, x: np.ndarray) -> dict:
    model = state.artifact.model
    yhat = int(model.predict(x))
    return {
        "yhat": yhat,
        "score": float(model.score(x)),
        "label": LABEL_TEXT[yhat],
        "model": {
            "algorithm": model.algorithm,
            "seed": model.config.seed,
            "artifact_hash": state.digest,
        },
    }


def _explanation_body(state: _ServingState, x: np.ndarray) -> dict:
    if state.background is None:
        raise HTTPException(status_code=503, detail="artifact stores no background set")
    body = _prediction_body(state, x)
    selected = state.artifact.selected_features
    attribution = explain_sample(state.artifact.model, x, state.background, mode="auto",
                                 permutations=WHATIF_PERMUTATIONS, seed=1)
    order = sorted(range(len(selected)), key=lambda j: (-abs(attribution.phi[j]), j))
    body["attribution"] = {
        "phi": {name: float(attribution.phi[j]) for j, name in enumerate(selected)},
        "base_value": attribution.base_value,
        "method": attribution.method,
        "adjusted": attribution.adjusted,
        "exact": attribution.method == "exact",
    }
    body["contributions"] = [
        {"feature": selected[j], "phi": float(attribution.phi[j])} for j in order
    ]
    return body


def create_app(artifact_path=None, artifact: ModelArtifact | None = None,
               digest: str | None = None) -> FastAPI:
    """Build the service; pass a path or a pre-loaded artifact."""
    if artifact_path is not None:
        artifact, digest = load_artifact(artifact_path)
    state = _ServingState(artifact, digest)

    app = FastAPI(title="mafus service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "loaded": state.artifact is not None}

    @app.get("/model/meta")
    def model_meta():
        if state.artifact is None:
            raise HTTPException(status_code=503, detail="no model artifact loaded")
        bundle = state.artifact
        return {
            "algorithm": bundle.model.algorithm,
            "seed": bundle.model.config.seed,
            "artifact_hash": state.digest,
            "selected_features": bundle.selected_features,
            "feature_kinds": bundle.feature_kinds,
            "categorical_levels": bundle.categorical_levels,
            "feature_ranges": {k: [v[0], v[1]] for k, v in bundle.feature_ranges.items()},
            "scaler": bundle.scaler.to_dict(),
            "exact_cap": EXACT_FEATURE_CAP,
            "has_summary": bundle.partition_summary is not None,
        }

    @app.get("/summary")
    def summary():
        if state.artifact is None:
            raise HTTPException(status_code=503, detail="no model artifact loaded")
        if state.artifact.partition_summary is None:
            raise HTTPException(status_code=404, detail="artifact stores no test partition")
        return {"artifact_hash": state.digest, **state.artifact.partition_summary}

    @app.post("/predict")
    def predict(body: dict):
        values = _validate_input(state, body)
        return _prediction_body(state, _standardize(state, values))

    @app.post("/explain")
    def explain(body: dict):
        values = _validate_input(state, body)
        return _explanation_body(state, _standardize(state, values))

    @app.post("/whatif")
    def whatif(body: dict):
        if state.artifact is None:
            raise HTTPException(status_code=503, detail="no model artifact loaded")
        if not isinstance(body, dict) or "base" not in body:
            raise HTTPException(status_code=400, detail="body must contain 'base' and 'deltas'")
        base = _validate_input(state, body.get("base"))
        deltas = body.get("deltas", [])
        if not isinstance(deltas, list):
            raise HTTPException(status_code=400, detail="'deltas' must be a list")
        responses = []
        for delta in deltas:
            if not isinstance(delta, dict) or "feature" not in delta or "value" not in delta:
                raise HTTPException(status_code=400,
                                    detail="each delta needs 'feature' and 'value'")
            feature = delta["feature"]
            if feature not in state.artifact.selected_features:
                raise HTTPException(status_code=400, detail=f"unknown feature {feature!r}")
            edited = dict(base)
            edited[feature] = delta["value"]
            values = _validate_input(state, edited)
            responses.append(_explanation_body(state, _standardize(state, values)))
        return responses

    return app
