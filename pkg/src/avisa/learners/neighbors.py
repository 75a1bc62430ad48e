"""k-nearest-neighbour classifier on z-scored features."""
from __future__ import annotations

import numpy as np

from .scaling import Standardizer


class KNearest:
    def __init__(self, k: int = 5):
        self.k = k

    def fit(self, X, y, seed: int = 0) -> "KNearest":
        self.scaler_ = Standardizer.fit(X)
        self.X_ = self.scaler_.transform(X)
        self.y_ = np.asarray(y, dtype=int)
        return self

    def neighbors(self, X, chunk: int = 256) -> np.ndarray:
        """Indices of the k nearest training rows; distance ties go to the lower index."""
        Q = self.scaler_.transform(X)
        k = min(self.k, self.X_.shape[0])
        out = np.empty((Q.shape[0], k), dtype=int)
        for lo in range(0, Q.shape[0], chunk):
            diff = Q[lo : lo + chunk, None, :] - self.X_[None, :, :]
            d2 = np.einsum("ijk,ijk->ij", diff, diff)
            out[lo : lo + chunk] = np.argsort(d2, axis=1, kind="stable")[:, :k]
        return out

    def predict(self, X) -> np.ndarray:
        nb = self.neighbors(X)
        votes = self.y_[nb].sum(axis=1)
        return (2 * votes > nb.shape[1]).astype(int)
