"""CART decision trees and random forests (binary labels, Gini impurity).

Trees are grown level by level: for every open node and every feature the
exact best threshold is found in one sweep over the presorted column, so a
level costs O(n_samples * n_features).  Randomness (bootstrap draws and the
per-node feature order used for feature subsampling) is drawn from PCG64
outside the compiled kernel; the kernel itself is deterministic.

Tie rules: among equal-impurity splits the lowest feature index wins, then
the lowest threshold; a leaf with equal class weight predicts 0
(Ineffective); a forest vote tie also predicts 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .._rng import derive_rng
from ..errors import ArgumentError


@njit(cache=True)
def _grow(X, y, w, order, max_depth, max_features, min_split, keys):
    n, d = X.shape
    cap = 2 * n + 1
    feat = np.full(cap, -1, dtype=np.int64)
    thr = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    c0 = np.zeros(cap)
    c1 = np.zeros(cap)
    depth = np.zeros(cap, dtype=np.int64)

    node_of = np.full(n, -1, dtype=np.int64)
    for s in range(n):
        if w[s] > 0:
            node_of[s] = 0
            if y[s] == 1:
                c1[0] += w[s]
            else:
                c0[0] += w[s]
    n_nodes = 1
    level_start, level_end = 0, 1

    slot = np.full(cap, -1, dtype=np.int64)
    while level_start < level_end:
        # nodes level_start..level_end-1 are open
        m = 0
        for nd in range(level_start, level_end):
            total = c0[nd] + c1[nd]
            if c0[nd] > 0 and c1[nd] > 0 and total >= min_split and (max_depth < 0 or depth[nd] < max_depth):
                slot[nd] = m
                m += 1
        if m == 0:
            break
        best = np.full((m, d), np.inf)
        best_thr = np.zeros((m, d))
        lc0 = np.zeros(m)
        lc1 = np.zeros(m)
        lastv = np.zeros(m)
        seen = np.zeros(m, dtype=np.bool_)
        for f in range(d):
            lc0[:] = 0.0
            lc1[:] = 0.0
            seen[:] = False
            for r in range(n):
                s = order[f, r]
                nd = node_of[s]
                if nd < 0:
                    continue
                sl = slot[nd]
                if sl < 0:
                    continue
                v = X[s, f]
                if seen[sl] and v > lastv[sl]:
                    l0 = lc0[sl]
                    l1 = lc1[sl]
                    r0 = c0[nd] - l0
                    r1 = c1[nd] - l1
                    nl = l0 + l1
                    nr = r0 + r1
                    score = nl - (l0 * l0 + l1 * l1) / nl + nr - (r0 * r0 + r1 * r1) / nr
                    if score < best[sl, f]:
                        best[sl, f] = score
                        t = 0.5 * (lastv[sl] + v)
                        if t >= v:
                            t = lastv[sl]
                        best_thr[sl, f] = t
                if y[s] == 1:
                    lc1[sl] += w[s]
                else:
                    lc0[sl] += w[s]
                lastv[sl] = v
                seen[sl] = True

        next_start = n_nodes
        for nd in range(level_start, level_end):
            sl = slot[nd]
            if sl < 0:
                continue
            perm = np.argsort(keys[nd])
            taken = 0
            bf = -1
            bs = np.inf
            for q in range(d):
                f = perm[q]
                if best[sl, f] == np.inf:
                    continue
                if best[sl, f] < bs or (best[sl, f] == bs and f < bf):
                    bs = best[sl, f]
                    bf = f
                taken += 1
                if taken >= max_features:
                    break
            if bf >= 0:
                feat[nd] = bf
                thr[nd] = best_thr[sl, bf]
                left[nd] = n_nodes
                right[nd] = n_nodes + 1
                depth[n_nodes] = depth[nd] + 1
                depth[n_nodes + 1] = depth[nd] + 1
                n_nodes += 2
        for nd in range(level_start, level_end):
            slot[nd] = -1

        for s in range(n):
            nd = node_of[s]
            if nd < 0:
                continue
            f = feat[nd]
            if f < 0:
                node_of[s] = -1
                continue
            child = left[nd] if X[s, f] <= thr[nd] else right[nd]
            node_of[s] = child
            if y[s] == 1:
                c1[child] += w[s]
            else:
                c0[child] += w[s]
        level_start, level_end = next_start, n_nodes

    return (feat[:n_nodes].copy(), thr[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), c0[:n_nodes].copy(), c1[:n_nodes].copy(), depth[:n_nodes].copy())


@njit(cache=True)
def _apply(feat, thr, left, right, X):
    out = np.empty(X.shape[0], dtype=np.int64)
    for i in range(X.shape[0]):
        nd = 0
        while feat[nd] >= 0:
            nd = left[nd] if X[i, feat[nd]] <= thr[nd] else right[nd]
        out[i] = nd
    return out


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat array representation; node 0 is the root, ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    count0: np.ndarray
    count1: np.ndarray
    depth: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def max_depth(self) -> int:
        return int(self.depth.max())

    @property
    def leaf_class(self) -> np.ndarray:
        return (self.count1 > self.count0).astype(int)

    def apply(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        return _apply(self.feature, self.threshold, self.left, self.right, X)

    def predict(self, X) -> np.ndarray:
        return self.leaf_class[self.apply(X)]

    def to_dict(self) -> dict:
        return {name: getattr(self, name).tolist() for name in
                ("feature", "threshold", "left", "right", "count0", "count1", "depth")}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        ints = {"feature", "left", "right", "depth"}
        return cls(**{k: np.asarray(v, dtype=np.int64 if k in ints else float) for k, v in d.items()})


def _check_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y).astype(np.int64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ArgumentError("X must be (n_samples, n_features) with matching y")
    if not np.all(np.isin(y, (0, 1))):
        raise ArgumentError("labels must be 0/1")
    return X, y


def grow_tree(X, y, *, weights=None, max_depth: int | None = None, max_features: int | None = None,
              min_samples_split: int = 2, rng: np.random.Generator | None = None) -> Tree:
    X, y = _check_xy(X, y)
    n, d = X.shape
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
    rng = rng if rng is not None else np.random.default_rng(0)
    keys = rng.random((2 * n + 1, d))
    mf = d if max_features is None else int(max_features)
    parts = _grow(X, y, w, order, -1 if max_depth is None else int(max_depth), max(1, mf),
                  float(min_samples_split), keys)
    return Tree(*parts)


class DecisionTree:
    """CART with Gini impurity; no depth cap unless ``max_depth`` is given."""

    def __init__(self, max_depth: int | None = None, min_samples_split: int = 2):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.tree_: Tree | None = None

    def fit(self, X, y, seed: int = 0) -> "DecisionTree":
        self.tree_ = grow_tree(X, y, max_depth=self.max_depth, min_samples_split=self.min_samples_split,
                               rng=derive_rng(seed, "tree", 0))
        return self

    def predict(self, X) -> np.ndarray:
        return self.tree_.predict(X)


def _resolve_max_features(spec, d: int) -> int:
    if spec is None:
        return d
    if spec == "sqrt":
        return max(1, int(math.sqrt(d)))
    return max(1, min(d, int(spec)))


class RandomForest:
    """Bagged CART ensemble with hard majority voting."""

    def __init__(self, n_trees: int = 100, max_depth: int | None = None, max_features="sqrt",
                 bootstrap: bool = True, min_samples_split: int = 2):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.min_samples_split = min_samples_split
        self.trees_: list[Tree] = []

    def fit(self, X, y, seed: int = 0) -> "RandomForest":
        X, y = _check_xy(X, y)
        n, d = X.shape
        mf = _resolve_max_features(self.max_features, d)
        order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
        md = -1 if self.max_depth is None else int(self.max_depth)
        self.trees_ = []
        for t in range(self.n_trees):
            rng = derive_rng(seed, "tree", t)
            if self.bootstrap:
                w = np.bincount(rng.integers(0, n, n), minlength=n).astype(float)
            else:
                w = np.ones(n)
            keys = rng.random((2 * n + 1, d))
            self.trees_.append(Tree(*_grow(X, y, w, order, md, mf, float(self.min_samples_split), keys)))
        return self

    def tree_predictions(self, X) -> np.ndarray:
        """(n_trees, n_samples) array of per-tree votes."""
        X = np.ascontiguousarray(X, dtype=float)
        return np.array([t.predict(X) for t in self.trees_])

    def predict(self, X) -> np.ndarray:
        votes = self.tree_predictions(X).sum(axis=0)
        return (2 * votes > len(self.trees_)).astype(int)
