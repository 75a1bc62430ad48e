"""Feature selection for instance space analysis.

Pipeline: correlation pre-filter -> feature clustering on ``1 - |rho|`` ->
silhouette choice of the cluster count -> exhaustive (or sampled) search over
one-feature-per-cluster combinations, each scored by the cross-validated
error of a random forest trained on a temporary 2-D PCA projection.
"""
from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._rng import derive_int, derive_rng
from .errors import ArgumentError, DataError
from .features import FeatureMatrix
from .learners.tree import RandomForest

logger = logging.getLogger(__name__)

__all__ = [
    "FeatureClusters", "FeatureMatrix", "SelectionResult", "choose_k", "cluster_features",
    "clustering_cost", "dissimilarity", "pca_2d", "pearson", "prefilter", "score_combination",
    "select_best", "select_features", "silhouette", "technique_correlations",
]


# -- correlation ------------------------------------------------------------------

def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ArgumentError("pearson needs two equal-length sequences of at least 2 values")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = math.sqrt(float(xc @ xc))
    sy = math.sqrt(float(yc @ yc))
    if sx == 0.0 or sy == 0.0:
        raise ArgumentError("zero variance")
    return float(np.clip((xc @ yc) / (sx * sy), -1.0, 1.0))


def _row_correlations(values: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pearson rho of every row with ``y``; rows constant on this sample get 0."""
    vc = values - values.mean(axis=1, keepdims=True)
    yc = y - y.mean()
    denom = np.sqrt(np.sum(vc**2, axis=1)) * math.sqrt(float(yc @ yc))
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.where(denom > 0, (vc @ yc) / denom, 0.0)
    return np.clip(rho, -1.0, 1.0)


def technique_correlations(F: FeatureMatrix, Y, technique_tags: Sequence[str]) -> dict[str, np.ndarray]:
    Y = np.asarray(Y, dtype=float)
    tags = np.asarray(technique_tags)
    if Y.shape != (F.n_instances,) or tags.shape != (F.n_instances,):
        raise ArgumentError("outcomes and technique tags must align with the instances")
    out = {}
    for t in sorted(set(tags.tolist())):
        mask = tags == t
        if np.unique(Y[mask]).size < 2:
            raise ArgumentError(f"technique {t} has a single outcome class")
        out[t] = _row_correlations(F.values[:, mask], Y[mask])
    return out


def prefilter(F: FeatureMatrix, Y, technique_tags: Sequence[str], threshold: float = 0.3) -> FeatureMatrix:
    """Keep each technique's most correlated feature plus every feature with |rho| > threshold."""
    std = F.values.std(axis=1)
    constant = [n for n, s in zip(F.names, std) if s == 0.0]
    if constant:
        warnings.warn(f"dropping constant features: {', '.join(constant)}", stacklevel=2)
        F = F.select([n for n in F.names if n not in constant])
    if F.n_features == 0:
        raise DataError("no features survive pre-filter")
    keep = np.zeros(F.n_features, dtype=bool)
    for rho in technique_correlations(F, Y, technique_tags).values():
        a = np.abs(rho)
        keep[int(np.argmax(a))] = True
        keep |= a > threshold
    if not keep.any():
        raise DataError("no features survive pre-filter")
    return F.select([n for n, k in zip(F.names, keep) if k])


def dissimilarity(F: FeatureMatrix) -> np.ndarray:
    """``D[i, j] = 1 - |rho(row_i, row_j)|``."""
    v = F.values
    vc = v - v.mean(axis=1, keepdims=True)
    norm = np.sqrt(np.sum(vc**2, axis=1))
    if np.any(norm == 0):
        bad = [n for n, s in zip(F.names, norm) if s == 0]
        raise ArgumentError(f"zero variance: {', '.join(bad)}")
    z = vc / norm[:, None]
    D = 1.0 - np.abs(np.clip(z @ z.T, -1.0, 1.0))
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return np.clip(D, 0.0, 1.0)


# -- clustering -------------------------------------------------------------------

@dataclass(frozen=True)
class FeatureClusters:
    k: int
    names: tuple[str, ...]
    labels: tuple[int, ...]          # cluster index per feature
    medoids: tuple[int, ...]         # feature index of each cluster's medoid
    cost: float

    @property
    def assignment(self) -> dict[str, int]:
        return dict(zip(self.names, self.labels))

    @property
    def medoid_names(self) -> list[str]:
        return [self.names[m] for m in self.medoids]

    def members(self, c: int) -> list[int]:
        return [i for i, lab in enumerate(self.labels) if lab == c]


def _assign(D: np.ndarray, medoids: np.ndarray) -> np.ndarray:
    # argmin takes the first minimum, i.e. the lowest medoid index
    return np.argmin(D[:, medoids], axis=1)


def clustering_cost(D, medoids) -> float:
    D = np.asarray(D, dtype=float)
    return float(D[:, list(medoids)].min(axis=1).sum())


def _farthest_point_init(D: np.ndarray, k: int, first: int) -> list[int]:
    chosen = [first]
    nearest = D[chosen[0]].copy()
    for _ in range(1, k):
        nearest_masked = nearest.copy()
        nearest_masked[chosen] = -np.inf
        nxt = int(np.argmax(nearest_masked))
        chosen.append(nxt)
        nearest = np.minimum(nearest, D[nxt])
    return chosen


def _alternate(D: np.ndarray, medoids: np.ndarray, max_iter: int) -> np.ndarray:
    k = medoids.size
    for _ in range(max_iter):
        labels = _assign(D, medoids)
        new = medoids.copy()
        for c in range(k):
            members = np.flatnonzero(labels == c)
            within = D[np.ix_(members, members)].sum(axis=1)
            new[c] = members[int(np.argmin(within))]
        new = np.sort(new)
        if np.array_equal(new, medoids):
            break
        medoids = new
    return medoids


def _swap(D: np.ndarray, medoids: np.ndarray) -> np.ndarray:
    n, k = D.shape[0], medoids.size
    cost = clustering_cost(D, medoids)
    while True:
        best_cost, best_swap = cost, None
        in_set = set(medoids.tolist())
        for mi in range(k):
            for h in range(n):
                if h in in_set:
                    continue
                trial = medoids.copy()
                trial[mi] = h
                c = clustering_cost(D, trial)
                if c < best_cost - 1e-12:
                    best_cost, best_swap = c, (mi, h)
        if best_swap is None:
            return medoids
        medoids = medoids.copy()
        medoids[best_swap[0]] = best_swap[1]
        medoids = np.sort(medoids)
        cost = best_cost


def _exhaustive(D: np.ndarray, k: int, chunk: int = 4096) -> np.ndarray:
    best_cost, best = np.inf, None
    combos = itertools.combinations(range(D.shape[0]), k)
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=int)
        if block.size == 0:
            return best
        costs = D[:, block].min(axis=2).sum(axis=0)
        j = int(np.argmin(costs))
        if costs[j] < best_cost - 1e-12:
            best_cost, best = float(costs[j]), block[j]


def cluster_features(D, k: int, seed: int, names: Sequence[str] | None = None, max_iter: int = 100,
                     restarts: int = 8, exact_limit: int = 50_000) -> FeatureClusters:
    """k-medoids on a dissimilarity matrix.

    When there are at most ``exact_limit`` candidate medoid sets the optimum
    is found by enumeration.  Otherwise each of ``restarts`` seeded starts
    runs farthest-point initialisation, alternating assignment / medoid
    update (at most ``max_iter`` rounds) and a best-improvement swap phase;
    the cheapest result wins.  Assignment ties go to the lowest medoid index.
    """
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    if D.shape != (n, n):
        raise ArgumentError("dissimilarity matrix must be square")
    if not 2 <= k <= n - 1:
        raise ArgumentError(f"k must be in [2, {n - 1}], got {k}")
    names = tuple(names) if names is not None else tuple(str(i) for i in range(n))

    if math.comb(n, k) <= exact_limit:
        medoids = _exhaustive(D, k)
    else:
        starts = derive_rng(seed, "kmedoids", k).permutation(n)[: max(1, restarts)]
        medoids, best_cost = None, np.inf
        for start in starts:
            m = np.sort(np.array(_farthest_point_init(D, k, int(start))))
            m = _swap(D, _alternate(D, m, max_iter))
            c = clustering_cost(D, m)
            if c < best_cost - 1e-12:
                medoids, best_cost = m, c

    labels = _assign(D, medoids)
    return FeatureClusters(k, names, tuple(int(v) for v in labels), tuple(int(m) for m in medoids),
                           clustering_cost(D, medoids))


def silhouette(D, clusters: FeatureClusters | Sequence[int]) -> float:
    """Mean silhouette width; members of singleton clusters score 0."""
    D = np.asarray(D, dtype=float)
    labels = np.asarray(clusters.labels if isinstance(clusters, FeatureClusters) else clusters)
    ks = np.unique(labels)
    if ks.size < 2:
        raise ArgumentError("silhouette needs at least 2 clusters")
    s = np.zeros(labels.size)
    for i in range(labels.size):
        own = labels == labels[i]
        if own.sum() == 1:
            continue
        a = D[i, own].sum() / (own.sum() - 1)
        b = min(D[i, labels == c].mean() for c in ks if c != labels[i])
        m = max(a, b)
        s[i] = 0.0 if m == 0 else (b - a) / m
    return float(s.mean())


def choose_k(D, seed: int, k_range: Sequence[int] | None = None,
             names: Sequence[str] | None = None) -> tuple[int, dict[int, float]]:
    """Cluster count with the highest mean silhouette (ties to the smaller k)."""
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    if n < 3:
        raise ArgumentError("need at least 3 features to cluster")
    ks = list(k_range) if k_range is not None else list(range(2, min(n - 1, 10) + 1))
    ks = [k for k in ks if 2 <= k <= n - 1]
    if not ks:
        raise ArgumentError("empty k range")
    scores = {k: silhouette(D, cluster_features(D, k, seed, names)) for k in ks}
    best = max(ks, key=lambda k: (scores[k], -k))
    return best, scores


# -- combination scoring ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PCA2D:
    components: np.ndarray     # (m, n_features), m <= 2
    eigenvalues: np.ndarray    # (m,)
    coordinates: np.ndarray    # (n_instances, m)


def _zscore_rows(values: np.ndarray) -> np.ndarray:
    mu = values.mean(axis=1, keepdims=True)
    sd = values.std(axis=1, keepdims=True)
    return (values - mu) / np.where(sd > 0, sd, 1.0)


def pca_2d(values) -> PCA2D:
    """Top-2 principal components of the rows of ``values`` (features x instances).

    Components are sorted by eigenvalue and signed so their largest-magnitude
    loading is positive.  If the covariance has rank < 2 only the non-null
    components are returned.
    """
    X = np.asarray(values, dtype=float)
    Xc = X - X.mean(axis=1, keepdims=True)
    cov = Xc @ Xc.T / X.shape[1]
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals, kind="stable")[::-1]
    evals, evecs = evals[order], evecs[:, order]
    tol = max(evals[0], 0.0) * 1e-12 * X.shape[0]
    m = int(min(2, np.sum(evals > tol)))
    if m < 2:
        warnings.warn(f"degenerate covariance: rank {m} < 2", stacklevel=2)
    m = max(m, 1)
    comps = evecs[:, :m].T.copy()
    for r in range(m):
        if comps[r, np.argmax(np.abs(comps[r]))] < 0:
            comps[r] = -comps[r]
    return PCA2D(comps, evals[:m].copy(), (comps @ Xc).T)


def stratified_folds(y, n_folds: int, seed: int) -> np.ndarray:
    """Fold index per instance; each class is dealt round-robin after a seeded shuffle."""
    y = np.asarray(y, dtype=int)
    folds = np.empty(y.size, dtype=int)
    rng = derive_rng(seed, "folds")
    for c in (0, 1):
        idx = np.flatnonzero(y == c)
        idx = idx[rng.permutation(idx.size)]
        folds[idx] = np.arange(idx.size) % n_folds
    return folds


SCORING_FOREST = {"n_trees": 100, "max_depth": 16, "max_features": "sqrt"}


def score_combination(F_subset: FeatureMatrix, Y, seed: int, n_folds: int = 5) -> float:
    """Cross-validated misclassification of a forest on the temporary PCA plane."""
    if F_subset.n_features < 2:
        raise ArgumentError("a combination needs at least 2 features")
    Y = np.asarray(Y, dtype=int)
    coords = pca_2d(_zscore_rows(F_subset.values)).coordinates
    folds = stratified_folds(Y, n_folds, seed)
    wrong = 0
    for f in range(n_folds):
        test = folds == f
        rf = RandomForest(**SCORING_FOREST).fit(coords[~test], Y[~test], seed=derive_int(seed, "fold", f))
        wrong += int(np.sum(rf.predict(coords[test]) != Y[test]))
    return wrong / Y.size


@dataclass(frozen=True)
class SelectionResult:
    selected: tuple[str, ...]
    cv_error: float
    alternatives: tuple[tuple[tuple[str, ...], float], ...]
    clusters: FeatureClusters | None = None
    silhouettes: dict[int, float] = field(default_factory=dict)
    prefiltered: tuple[str, ...] = ()

    @property
    def k(self) -> int:
        return len(self.selected)

    def to_dict(self) -> dict:
        return {
            "selected": list(self.selected),
            "cv_error": self.cv_error,
            "k": self.k,
            "prefiltered": list(self.prefiltered),
            "silhouette": {str(k): v for k, v in sorted(self.silhouettes.items())},
            "clusters": None if self.clusters is None else {
                "assignment": self.clusters.assignment,
                "medoids": self.clusters.medoid_names,
                "cost": self.clusters.cost,
            },
            "combinations": [{"features": list(c), "cv_error": e} for c, e in self.alternatives],
        }


def _decode(index: int, sizes: Sequence[int]) -> tuple[int, ...]:
    digits = []
    for s in reversed(sizes):
        index, r = divmod(index, s)
        digits.append(r)
    return tuple(reversed(digits))


def candidate_combinations(clusters: FeatureClusters, seed: int, max_combinations: int) -> list[tuple[str, ...]]:
    members = [[clusters.names[i] for i in clusters.members(c)] for c in range(clusters.k)]
    sizes = [len(m) for m in members]
    total = math.prod(sizes)
    if total <= max_combinations:
        return [tuple(c) for c in itertools.product(*members)]
    rng = derive_rng(seed, "combinations")
    picked: set[int] = set()
    while len(picked) < max_combinations:
        picked.update(int(v) for v in rng.integers(0, total, size=max_combinations - len(picked)))
    combos = [tuple(members[c][d] for c, d in enumerate(_decode(i, sizes))) for i in sorted(picked)]
    medoid_combo = tuple(clusters.medoid_names)
    if medoid_combo not in combos:
        combos.append(medoid_combo)
    return combos


def select_best(clusters: FeatureClusters, F: FeatureMatrix, Y, seed: int,
                max_combinations: int = 10_000) -> SelectionResult:
    """Best one-feature-per-cluster combination by cross-validated error."""
    combos = candidate_combinations(clusters, seed, max_combinations)
    logger.info("scoring %d feature combinations", len(combos))
    scored = [(c, score_combination(F.select(c), Y, seed)) for c in combos]
    scored.sort(key=lambda ce: (ce[1], ce[0]))
    best, err = scored[0]
    return SelectionResult(best, err, tuple(scored), clusters)


def select_features(F: FeatureMatrix, Y, technique_tags: Sequence[str], seed: int, threshold: float = 0.3,
                    k_range: Sequence[int] | None = None, max_combinations: int = 10_000) -> SelectionResult:
    """Prefilter, cluster and select in one call."""
    kept = prefilter(F, Y, technique_tags, threshold)
    if kept.n_features < 3:
        # too few features to cluster: every survivor is its own cluster
        names = kept.names
        err = score_combination(kept, Y, seed) if len(names) >= 2 else float("nan")
        return SelectionResult(names, err, ((names, err),), None, {}, names)
    D = dissimilarity(kept)
    k, sil = choose_k(D, seed, k_range, kept.names)
    clusters = cluster_features(D, k, seed, kept.names)
    res = select_best(clusters, kept, Y, seed, max_combinations)
    return SelectionResult(res.selected, res.cv_error, res.alternatives, clusters, sil, kept.names)
