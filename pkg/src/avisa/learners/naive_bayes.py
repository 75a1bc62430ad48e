"""Gaussian naive Bayes."""
from __future__ import annotations

import numpy as np


class NaiveBayes:
    def __init__(self, var_smoothing: float = 1e-9):
        self.var_smoothing = var_smoothing

    def fit(self, X, y, seed: int = 0) -> "NaiveBayes":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        eps = self.var_smoothing * float(np.max(X.var(axis=0)))
        self.classes_ = np.array([0, 1])
        self.theta_ = np.array([X[y == c].mean(axis=0) for c in self.classes_])
        self.var_ = np.array([X[y == c].var(axis=0) for c in self.classes_]) + eps
        self.prior_ = np.array([np.mean(y == c) for c in self.classes_])
        return self

    def joint_log_likelihood(self, X) -> np.ndarray:
        """(n, 2) array of log p(c) + sum_j log N(x_j | mu_cj, var_cj)."""
        X = np.asarray(X, dtype=float)
        out = np.empty((X.shape[0], 2))
        for c in range(2):
            ll = -0.5 * np.sum(np.log(2.0 * np.pi * self.var_[c]))
            ll = ll - 0.5 * np.sum((X - self.theta_[c]) ** 2 / self.var_[c], axis=1)
            out[:, c] = np.log(self.prior_[c]) + ll
        return out

    def predict(self, X) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        return (jll[:, 1] > jll[:, 0]).astype(int)
