"""Fully connected three-hidden-layer classifier.

Trained on weighted logistic loss with an L2 penalty (alpha). Solvers:
mini-batch SGD with momentum, Adam, and a full-batch L-BFGS (two-loop
recursion with Armijo backtracking). Training stops at the epoch cap or
when the full-train loss plateaus (< 1e-6 improvement over 10 epochs).

loss_and_grad is the single source of gradients for every solver, which
is also what the finite-difference gradient check exercises.
"""

from __future__ import annotations

import numpy as np

from ..errors import TrainingError
from .base import ModelConfig, TrainedModel, sample_weights

PLATEAU_TOL = 1e-6
PLATEAU_EPOCHS = 10


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activate(z, kind):
    if kind == "tanh":
        return np.tanh(z)
    if kind == "relu":
        return np.maximum(z, 0.0)
    raise TrainingError(f"unsupported activation {kind!r}")


def _activate_grad(a, kind):
    # derivative expressed through the activation output
    if kind == "tanh":
        return 1.0 - a * a
    return (a > 0.0).astype(a.dtype)


def layer_sizes(n_features: int, hidden: tuple) -> list[int]:
    return [n_features, *[int(h) for h in hidden], 1]


def init_params(sizes: list[int], rng: np.random.Generator) -> list[np.ndarray]:
    """Glorot-uniform weights and zero biases, flattened as [W1,b1,W2,b2,...]."""
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        params.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return params


def pack(params: list[np.ndarray]) -> np.ndarray:
    return np.concatenate([p.ravel() for p in params])


def unpack(flat: np.ndarray, sizes: list[int]) -> list[np.ndarray]:
    params = []
    pos = 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        params.append(flat[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out))
        pos += fan_in * fan_out
        params.append(flat[pos:pos + fan_out])
        pos += fan_out
    return params


def forward(flat: np.ndarray, sizes: list[int], activation: str, X: np.ndarray) -> np.ndarray:
    params = unpack(flat, sizes)
    h = X
    n_layers = len(sizes) - 1
    for layer in range(n_layers):
        W, b = params[2 * layer], params[2 * layer + 1]
        z = h @ W + b
        h = _sigmoid(z) if layer == n_layers - 1 else _activate(z, activation)
    return h[:, 0]


def loss_and_grad(flat, sizes, activation, X, y, w, l2):
    """Weighted BCE + (l2 / 2n) * sum ||W||^2, with its exact gradient."""
    params = unpack(flat, sizes)
    n_layers = len(sizes) - 1
    n = X.shape[0]
    w_total = float(np.sum(w))

    acts = [X]
    h = X
    for layer in range(n_layers):
        W, b = params[2 * layer], params[2 * layer + 1]
        z = h @ W + b
        h = _sigmoid(z) if layer == n_layers - 1 else _activate(z, activation)
        acts.append(h)
    p = np.clip(acts[-1][:, 0], 1e-12, 1.0 - 1e-12)
    data_loss = float(np.sum(w * -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))) / w_total)
    penalty = 0.5 * l2 / n * sum(float(np.sum(params[2 * k] ** 2)) for k in range(n_layers))

    grads = [np.zeros_like(g) for g in params]
    # dL/dz at the sigmoid output collapses to w (p - y) / sum(w)
    delta = (w * (acts[-1][:, 0] - y) / w_total)[:, None]
    for layer in range(n_layers - 1, -1, -1):
        W = params[2 * layer]
        grads[2 * layer] = acts[layer].T @ delta + (l2 / n) * W
        grads[2 * layer + 1] = np.sum(delta, axis=0)
        if layer > 0:
            delta = (delta @ W.T) * _activate_grad(acts[layer], activation)
    return data_loss + penalty, pack(grads)


def _lbfgs(fun, x0, max_iter):
    """Two-loop L-BFGS with Armijo backtracking; returns the best iterate."""
    m = 10
    x = x0.copy()
    f, g = fun(x)
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    best_f, stall = f, 0
    for it in range(max_iter):
        if np.max(np.abs(g)) < 1e-6:
            break
        q = g.copy()
        alphas = []
        for s, yv in zip(reversed(s_hist), reversed(y_hist)):
            rho = 1.0 / float(yv @ s)
            a = rho * float(s @ q)
            q -= a * yv
            alphas.append((a, rho))
        if y_hist:
            yv = y_hist[-1]
            q *= float(s_hist[-1] @ yv) / float(yv @ yv)
        for (a, rho), s, yv in zip(reversed(alphas), s_hist, y_hist):
            b = rho * float(yv @ q)
            q += (a - b) * s
        direction = -q
        slope = float(g @ direction)
        if slope >= 0.0:  # curvature breakdown: fall back to steepest descent
            direction = -g
            slope = float(g @ direction)
        step = 1.0 if it > 0 else min(1.0, 1.0 / max(1.0, float(np.sum(np.abs(g)))))
        for _ in range(30):
            f_new, g_new = fun(x + step * direction)
            if f_new <= f + 1e-4 * step * slope:
                break
            step *= 0.5
        s = step * direction
        yv = g_new - g
        if float(s @ yv) > 1e-10:
            s_hist.append(s)
            y_hist.append(yv)
            if len(s_hist) > m:
                s_hist.pop(0)
                y_hist.pop(0)
        x = x + s
        f, g = f_new, g_new
        if best_f - f < PLATEAU_TOL:
            stall += 1
            if stall >= PLATEAU_EPOCHS:
                break
        else:
            stall = 0
        best_f = min(best_f, f)
    return x


class MLPModel(TrainedModel):
    algorithm = "mlp"
    score_kind = "probability"

    def __init__(self, config: ModelConfig, n_features: int, flat: np.ndarray, sizes: list[int]):
        super().__init__(config, n_features)
        self.flat = flat
        self.sizes = sizes
        self.activation = config["activation"]
        self.train_loss_curve: list[float] = []

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        return forward(self.flat, self.sizes, self.activation, X)

    def params_to_dict(self) -> dict:
        return {"kind": "mlp", "sizes": self.sizes, "flat": self.flat.tolist()}

    @classmethod
    def params_from_dict(cls, config, n_features, doc) -> "MLPModel":
        return cls(config, n_features, np.asarray(doc["flat"], dtype=np.float64),
                   [int(s) for s in doc["sizes"]])


def fit_mlp(config: ModelConfig, X: np.ndarray, y: np.ndarray) -> MLPModel:
    sizes = layer_sizes(X.shape[1], config["hidden_layer_sizes"])
    activation = config["activation"]
    solver = config["solver"]
    l2 = float(config["alpha"])
    epochs = int(config["epochs"])
    batch_size = int(config["batch_size"])
    lr = float(config["learning_rate_init"])
    w = sample_weights(y, config.class_weighting)

    rng = np.random.default_rng(config.seed)
    flat = pack(init_params(sizes, rng))
    loss_curve: list[float] = []

    def full_loss(theta):
        return loss_and_grad(theta, sizes, activation, X, y, w, l2)

    if solver == "lbfgs":
        flat = _lbfgs(full_loss, flat, epochs)
        loss_curve.append(full_loss(flat)[0])
    elif solver in ("sgd", "adam"):
        momentum = np.zeros_like(flat)
        adam_m = np.zeros_like(flat)
        adam_v = np.zeros_like(flat)
        beta1, beta2, eps = 0.9, 0.999, 1e-8
        t = 0
        best_loss = np.inf
        stall = 0
        no_improve = 0
        n = X.shape[0]
        for _ in range(epochs):
            order = rng.permutation(n)
            for start in range(0, n, batch_size):
                idx = order[start:start + batch_size]
                _, grad = loss_and_grad(flat, sizes, activation, X[idx], y[idx], w[idx], l2)
                if solver == "sgd":
                    momentum = 0.9 * momentum - lr * grad
                    flat = flat + momentum
                else:
                    t += 1
                    adam_m = beta1 * adam_m + (1.0 - beta1) * grad
                    adam_v = beta2 * adam_v + (1.0 - beta2) * grad * grad
                    m_hat = adam_m / (1.0 - beta1**t)
                    v_hat = adam_v / (1.0 - beta2**t)
                    flat = flat - lr * m_hat / (np.sqrt(v_hat) + eps)
            epoch_loss = full_loss(flat)[0]
            loss_curve.append(epoch_loss)
            if best_loss - epoch_loss < PLATEAU_TOL:
                stall += 1
                no_improve += 1
            else:
                stall = 0
                no_improve = 0
            if solver == "sgd" and config["learning_rate"] == "adaptive" and no_improve >= 2:
                lr /= 5.0
                no_improve = 0
            best_loss = min(best_loss, epoch_loss)
            if stall >= PLATEAU_EPOCHS:
                break
    else:
        raise TrainingError(f"unsupported solver {solver!r}")

    model = MLPModel(config, X.shape[1], flat, sizes)
    model.train_loss_curve = loss_curve
    return model
