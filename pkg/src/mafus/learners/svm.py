"""Soft-margin kernel SVM solved on the dual.

Works in signed-dual space: for sample t with label y_t in {-1,+1} and
box penalty C_t, the variable a_t = y_t * alpha_t lives in [A_t, B_t]
with A_t = 0, B_t = C_t for positives and A_t = -C_t, B_t = 0 for
negatives; the equality constraint is sum(a) = 0. Each step picks the
maximal violating pair (largest KKT violation): i maximizing the dual
gradient among samples free to increase, j minimizing it among samples
free to decrease, then takes the exact two-variable step, clipped to
the box. Convergence when the violation gap falls below tol.

The decision margin is f(x) = sum_t a_t K(x_t, x) + b; predict(x) = 1
iff f(x) >= 0 (ties to the positive class).
"""

from __future__ import annotations

import numpy as np

from ..errors import TrainingError
from .base import ModelConfig, TrainedModel, sample_weights


def _kernel_matrix(kind: str, gamma: float, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if kind == "linear":
        return A @ B.T
    if kind == "rbf":
        sq = (
            np.sum(A * A, axis=1)[:, None]
            + np.sum(B * B, axis=1)[None, :]
            - 2.0 * (A @ B.T)
        )
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-gamma * sq)
    raise TrainingError(f"unsupported kernel {kind!r}")


class SVMModel(TrainedModel):
    algorithm = "svm"
    score_kind = "margin"

    def __init__(self, config: ModelConfig, n_features: int,
                 support_vectors: np.ndarray, signed_coef: np.ndarray, bias: float):
        super().__init__(config, n_features)
        self.support_vectors = support_vectors
        self.signed_coef = signed_coef  # a_t = y_t * alpha_t at the SVs
        self.bias = bias
        self.kernel = config["kernel"]
        self.gamma = float(config["gamma"])
        # populated by fit for diagnostics; not part of the artifact
        self.dual_alpha: np.ndarray | None = None
        self.dual_C: np.ndarray | None = None
        self.dual_y: np.ndarray | None = None
        self.converged: bool = True

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        if len(self.support_vectors) == 0:
            return np.full(X.shape[0], self.bias)
        out = np.empty(X.shape[0])
        chunk = max(1, 2_000_000 // max(1, len(self.support_vectors)))
        for start in range(0, X.shape[0], chunk):
            block = X[start:start + chunk]
            K = _kernel_matrix(self.kernel, self.gamma, block, self.support_vectors)
            out[start:start + chunk] = K @ self.signed_coef + self.bias
        return out

    def params_to_dict(self) -> dict:
        return {
            "kind": "svm",
            "support_vectors": self.support_vectors.tolist(),
            "signed_coef": self.signed_coef.tolist(),
            "bias": self.bias,
        }

    @classmethod
    def params_from_dict(cls, config, n_features, doc) -> "SVMModel":
        return cls(config, n_features,
                   np.asarray(doc["support_vectors"], dtype=np.float64).reshape(-1, n_features),
                   np.asarray(doc["signed_coef"], dtype=np.float64),
                   float(doc["bias"]))


def fit_svm(config: ModelConfig, X: np.ndarray, y01: np.ndarray) -> SVMModel:
    n, d = X.shape
    y = np.where(y01 == 1.0, 1.0, -1.0)
    C = float(config["C"]) * sample_weights(y01, config.class_weighting)
    tol = float(config["tol"])
    max_iter = int(config["max_iter"])

    K = _kernel_matrix(config["kernel"], float(config["gamma"]), X, X)
    lower = np.where(y > 0, 0.0, -C)
    upper = np.where(y > 0, C, 0.0)
    a = np.zeros(n)         # signed duals
    G = y.copy()            # dual gradient: y - K a

    eps = 1e-12
    converged = False
    for _ in range(max_iter):
        can_up = a < upper - eps
        can_down = a > lower + eps
        if not can_up.any() or not can_down.any():
            converged = True
            break
        Gi = np.where(can_up, G, -np.inf)
        Gj = np.where(can_down, G, np.inf)
        i = int(np.argmax(Gi))
        j = int(np.argmin(Gj))
        gap = G[i] - G[j]
        if gap <= tol:
            converged = True
            break
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if quad <= eps:
            quad = eps
        lam = min(upper[i] - a[i], a[j] - lower[j], gap / quad)
        a[i] += lam
        a[j] -= lam
        G += lam * (K[:, j] - K[:, i])

    free = (a > lower + eps) & (a < upper - eps)
    if free.any():
        bias = float(np.mean(G[free]))
    else:
        up_vals = G[a < upper - eps]
        down_vals = G[a > lower + eps]
        hi = float(np.max(up_vals)) if up_vals.size else 0.0
        lo = float(np.min(down_vals)) if down_vals.size else 0.0
        bias = 0.5 * (hi + lo)

    sv = np.abs(a) > eps
    model = SVMModel(config, d, X[sv].copy(), a[sv].copy(), bias)
    model.dual_alpha = y * a      # unsigned alpha_t >= 0
    model.dual_C = C
    model.dual_y = y
    model.converged = converged
    return model
