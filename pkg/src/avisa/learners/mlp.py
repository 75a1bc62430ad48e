"""One-hidden-layer perceptron trained full-batch with Adam on binary cross-entropy."""
from __future__ import annotations

import numpy as np

from .._rng import derive_rng
from .scaling import Standardizer

PARAM_NAMES = ("W1", "b1", "W2", "b2")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def init_params(n_in: int, n_hidden: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    return {
        "W1": rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_in, n_hidden)),
        "b1": np.zeros(n_hidden),
        "W2": rng.normal(0.0, np.sqrt(1.0 / n_hidden), size=n_hidden),
        "b2": np.zeros(1),
    }


def forward(params, X) -> np.ndarray:
    """Predicted probability of class 1."""
    h = np.maximum(X @ params["W1"] + params["b1"], 0.0)
    return _sigmoid(h @ params["W2"] + params["b2"][0])


def loss_and_grad(params, X, y) -> tuple[float, dict[str, np.ndarray]]:
    """Mean binary cross-entropy and its analytic gradient."""
    n = X.shape[0]
    a = X @ params["W1"] + params["b1"]
    h = np.maximum(a, 0.0)
    z = h @ params["W2"] + params["b2"][0]
    # log(1 + e^z) - y z, written stably
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    dz = (_sigmoid(z) - y) / n
    dh = np.outer(dz, params["W2"]) * (a > 0)
    grads = {
        "W1": X.T @ dh,
        "b1": dh.sum(axis=0),
        "W2": h.T @ dz,
        "b2": np.array([dz.sum()]),
    }
    return loss, grads


class MultilayerPerceptron:
    def __init__(self, hidden: int = 64, epochs: int = 500, learning_rate: float = 1e-2,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.hidden = hidden
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def fit(self, X, y, seed: int = 0) -> "MultilayerPerceptron":
        self.scaler_ = Standardizer.fit(X)
        Xs = self.scaler_.transform(X)
        y = np.asarray(y, dtype=float)
        params = init_params(Xs.shape[1], self.hidden, derive_rng(seed, "mlp-init"))
        m = {k: np.zeros_like(v) for k, v in params.items()}
        v = {k: np.zeros_like(p) for k, p in params.items()}
        self.loss_curve_ = []
        for t in range(1, self.epochs + 1):
            loss, g = loss_and_grad(params, Xs, y)
            self.loss_curve_.append(loss)
            for k in PARAM_NAMES:
                m[k] = self.beta1 * m[k] + (1 - self.beta1) * g[k]
                v[k] = self.beta2 * v[k] + (1 - self.beta2) * g[k] ** 2
                mhat = m[k] / (1 - self.beta1**t)
                vhat = v[k] / (1 - self.beta2**t)
                params[k] = params[k] - self.learning_rate * mhat / (np.sqrt(vhat) + self.eps)
        self.params_ = params
        return self

    def predict_proba(self, X) -> np.ndarray:
        return forward(self.params_, self.scaler_.transform(X))

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(int)
