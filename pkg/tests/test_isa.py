import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from avisa.errors import ArgumentError, DataError
from avisa.features import FeatureMatrix
from avisa.isa import (candidate_combinations, choose_k, cluster_features, clustering_cost, dissimilarity,
                       pca_2d, pearson, prefilter, score_combination, select_best, select_features,
                       silhouette)


def fm(rows, names=None):
    rows = np.asarray(rows, dtype=float)
    names = names or [f"f{j}" for j in range(rows.shape[0])]
    return FeatureMatrix(tuple(names), rows, tuple(f"i{k}" for k in range(rows.shape[1])))


# -- pearson -----------------------------------------------------------------------

@pytest.mark.parametrize("x, y, rho", [
    ([1, 2, 3], [2, 4, 6], 1.0),
    ([1, 2, 3], [6, 4, 2], -1.0),
    ([1, 2, 3, 4], [1, 2, 2, 1], 0.0),
])
def test_pearson_examples(x, y, rho):
    assert pearson(x, y) == pytest.approx(rho, abs=1e-12)


def test_pearson_zero_variance():
    with pytest.raises(ArgumentError, match="zero variance"):
        pearson([1, 1, 1], [1, 2, 3])


def test_pearson_matches_numpy():
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=50), rng.normal(size=50)
    assert pearson(x, y) == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-12)


@given(st.lists(st.floats(-100, 100), min_size=3, max_size=30, unique=True),
       st.floats(0.1, 10) | st.floats(-10, -0.1), st.floats(-50, 50))
def test_pearson_affine(x, a, b):
    y = a * np.asarray(x) + b
    assert pearson(x, y) == pytest.approx(math.copysign(1.0, a), abs=1e-9)


# -- prefilter ---------------------------------------------------------------------

def _prefilter_data(seed=0, n=200):
    rng = np.random.default_rng(seed)
    y = (np.arange(n) % 2).astype(float)
    tags = ["a" if k < n // 2 else "b" for k in range(n)]
    return y, tags, rng


def test_prefilter_keeps_identical_feature():
    y, tags, rng = _prefilter_data()
    F = fm([y, rng.normal(size=y.size), rng.normal(size=y.size)], ["y", "n1", "n2"])
    assert "y" in prefilter(F, y, tags).names


def test_prefilter_drops_noise():
    y, tags, rng = _prefilter_data()
    F = fm([y, y + 0.1 * rng.normal(size=y.size), rng.normal(size=y.size)], ["y", "y2", "noise"])
    kept = prefilter(F, y, tags)
    assert kept.names == ("y", "y2")


def test_prefilter_per_technique_max_kept():
    y, tags, rng = _prefilter_data()
    weak = 0.2 * y + rng.normal(size=y.size)
    F = fm([weak, rng.normal(size=y.size)], ["weak", "noise"])
    rho = [abs(pearson(weak[:100], y[:100])), abs(pearson(weak[100:], y[100:]))]
    assert max(rho) < 0.3
    assert "weak" in prefilter(F, y, tags).names


def test_prefilter_constant_dropped_with_warning():
    y, tags, rng = _prefilter_data()
    F = fm([y, np.ones(y.size)], ["y", "c"])
    with pytest.warns(UserWarning, match="constant"):
        assert prefilter(F, y, tags).names == ("y",)


def test_prefilter_all_constant():
    y, tags, _ = _prefilter_data()
    with pytest.warns(UserWarning):
        with pytest.raises(DataError, match="no features survive"):
            prefilter(fm([np.ones(y.size)]), y, tags)


# -- dissimilarity -----------------------------------------------------------------

def test_dissimilarity_examples():
    a = np.array([1.0, 0, 1, 0, 1, 0, 1, 0])
    b = np.array([1.0, 1, 0, 0, 1, 1, 0, 0])
    D = dissimilarity(fm([a, -a, b]))
    assert D[0, 0] == 0.0 and D[0, 1] == pytest.approx(0.0, abs=1e-12)
    assert D[0, 2] == pytest.approx(1.0)


@given(st.integers(0, 2**32), st.integers(2, 8), st.floats(0.1, 10), st.floats(-5, 5))
def test_dissimilarity_properties(seed, n, a, b):
    rng = np.random.default_rng(seed)
    rows = rng.normal(size=(n, 30))
    D = dissimilarity(fm(rows))
    assert np.array_equal(D, D.T) and np.all(np.diag(D) == 0)
    assert D.min() >= 0 and D.max() <= 1
    rows2 = rows.copy()
    rows2[0] = a * rows2[0] + b
    rows2[-1] = -rows2[-1]
    np.testing.assert_allclose(dissimilarity(fm(rows2)), D, atol=1e-12)


# -- clustering --------------------------------------------------------------------

def _random_D(rng, n):
    X = rng.random((n, n))
    D = (X + X.T) / 2
    np.fill_diagonal(D, 0.0)
    return D


def exhaustive_cost(D, k):
    n = D.shape[0]
    return min(D[:, list(m)].min(axis=1).sum() for m in itertools.combinations(range(n), k))


def test_duplicate_pairs_coclustered():
    a, b = np.array([1.0, 2, 3, 4, 5, 7]), np.array([3.0, -1, 4, 1, -5, 9])
    D = dissimilarity(fm([a, 2 * a, b, b + 1]))
    cl = cluster_features(D, 2, 0)
    assert cl.labels[0] == cl.labels[1] and cl.labels[2] == cl.labels[3] and cl.labels[0] != cl.labels[2]


@pytest.mark.parametrize("seed", range(20))
def test_kmedoids_matches_exhaustive(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 9))
    k = int(rng.integers(2, n))
    D = _random_D(rng, n)
    assert cluster_features(D, k, seed).cost == pytest.approx(exhaustive_cost(D, k), abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_heuristic_path_matches_exhaustive(seed):
    rng = np.random.default_rng(100 + seed)
    n, k = 8, int(rng.integers(2, 7))
    D = _random_D(rng, n)
    cl = cluster_features(D, k, seed, exact_limit=0)
    assert cl.cost == pytest.approx(exhaustive_cost(D, k), abs=1e-12)


def test_k_n_minus_one():
    rng = np.random.default_rng(5)
    D = _random_D(rng, 6)
    cl = cluster_features(D, 5, 0)
    sizes = sorted(np.bincount(cl.labels))
    assert sizes == [1, 1, 1, 1, 2]
    assert cl.cost == pytest.approx(D[np.triu_indices(6, 1)].min())


def test_cluster_invariants():
    rng = np.random.default_rng(9)
    D = _random_D(rng, 12)
    cl = cluster_features(D, 4, 3)
    for c, m in enumerate(cl.medoids):
        assert cl.labels[m] == c
    assert set(cl.assignment) == set(cl.names)
    assert cl.cost == pytest.approx(clustering_cost(D, cl.medoids))
    assert cluster_features(D, 4, 3) == cl


@pytest.mark.parametrize("k", [1, 6])
def test_k_out_of_range(k):
    with pytest.raises(ArgumentError):
        cluster_features(np.zeros((6, 6)), k, 0)


# -- silhouette --------------------------------------------------------------------

def silhouette_oracle(D, labels):
    n = len(labels)
    total = 0.0
    for i in range(n):
        same = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not same:
            continue
        a = sum(D[i][j] for j in same) / len(same)
        b = math.inf
        for c in set(labels) - {labels[i]}:
            members = [j for j in range(n) if labels[j] == c]
            b = min(b, sum(D[i][j] for j in members) / len(members))
        total += (b - a) / max(a, b) if max(a, b) > 0 else 0.0
    return total / n


def test_silhouette_perfect():
    D = np.array([[0, 0, 1, 1], [0, 0, 1, 1], [1, 1, 0, 0], [1, 1, 0, 0]], dtype=float)
    assert silhouette(D, [0, 0, 1, 1]) == 1.0


def test_silhouette_singletons():
    rng = np.random.default_rng(1)
    assert silhouette(_random_D(rng, 5), [0, 1, 2, 3, 4]) == 0.0


def test_silhouette_hand_example():
    D = np.array([[0.0, 0.2, 0.7, 0.9],
                  [0.2, 0.0, 0.6, 0.8],
                  [0.7, 0.6, 0.0, 0.3],
                  [0.9, 0.8, 0.3, 0.0]])
    # s0 = (0.8-0.2)/0.8, s1 = (0.7-0.2)/0.7, s2 = (0.65-0.3)/0.65, s3 = (0.85-0.3)/0.85
    expected = (0.6 / 0.8 + 0.5 / 0.7 + 0.35 / 0.65 + 0.55 / 0.85) / 4
    assert silhouette(D, [0, 0, 1, 1]) == pytest.approx(expected, abs=1e-12)


def test_silhouette_k_lt_2():
    with pytest.raises(ArgumentError):
        silhouette(np.zeros((3, 3)), [0, 0, 0])


@pytest.mark.parametrize("seed", range(20))
def test_silhouette_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 7))
    D = _random_D(rng, n)
    while True:
        labels = rng.integers(0, int(rng.integers(2, n + 1)), n)
        if np.unique(labels).size >= 2:
            break
    assert silhouette(D, labels) == pytest.approx(silhouette_oracle(D, labels.tolist()), abs=1e-12)


def planted_blocks(sizes, seed, within=0.05, between=0.9):
    rng = np.random.default_rng(seed)
    n = sum(sizes)
    block = np.repeat(np.arange(len(sizes)), sizes)
    D = np.where(block[:, None] == block[None, :], within, between) + rng.uniform(-0.03, 0.03, (n, n))
    D = (D + D.T) / 2
    np.fill_diagonal(D, 0)
    return D


@pytest.mark.parametrize("sizes, k", [((4, 5), 2), ((3, 4, 4), 3)])
def test_choose_k_planted(sizes, k):
    assert choose_k(planted_blocks(sizes, 0), 0)[0] == k


def test_choose_k_n3():
    rng = np.random.default_rng(2)
    k, scores = choose_k(_random_D(rng, 3), 0)
    assert k == 2 and list(scores) == [2]


def test_choose_k_tie_goes_small():
    D = np.ones((5, 5)) - np.eye(5)
    k, scores = choose_k(D, 0)
    assert len(set(scores.values())) == 1 and k == 2


# -- PCA and scoring ---------------------------------------------------------------

@given(st.integers(0, 2**32), st.integers(2, 6))
def test_pca_properties(seed, n):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 40)) * rng.uniform(0.5, 3, (n, 1))
    p = pca_2d(X)
    np.testing.assert_allclose(p.components @ p.components.T, np.eye(2), atol=1e-9)
    ev = np.sort(np.linalg.eigvalsh(np.cov(X, bias=True)))[::-1][:2]
    np.testing.assert_allclose(p.coordinates.var(axis=0), ev, rtol=1e-9)
    for r in range(2):
        assert p.components[r, np.argmax(np.abs(p.components[r]))] > 0


def test_pca_isotropic_2d_preserves_distances():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(2, 30))
    Z = pca_2d(X).coordinates
    Xc = (X - X.mean(axis=1, keepdims=True)).T
    d1 = np.linalg.norm(Xc[:, None] - Xc[None], axis=2)
    d2 = np.linalg.norm(Z[:, None] - Z[None], axis=2)
    np.testing.assert_allclose(d1, d2, atol=1e-9)


def test_pca_rank_one_warns():
    x = np.arange(10.0)
    with pytest.warns(UserWarning, match="degenerate"):
        p = pca_2d(np.vstack([x, 2 * x]))
    assert p.components.shape == (1, 2)


def test_score_separable():
    rng = np.random.default_rng(0)
    y = (np.arange(500) % 2)
    F = fm([y + 0.01 * rng.normal(size=500), y + 0.01 * rng.normal(size=500)])
    assert score_combination(F, y, 1) <= 0.05


def test_score_noise_chance():
    rng = np.random.default_rng(0)
    y = (np.arange(500) % 2)
    F = fm(rng.normal(size=(3, 500)))
    assert abs(score_combination(F, y, 1) - 0.5) <= 0.1


def test_score_deterministic():
    rng = np.random.default_rng(3)
    y = rng.integers(0, 2, 120)
    F = fm(rng.normal(size=(3, 120)) + y)
    assert score_combination(F, y, 5) == score_combination(F, y, 5)


# -- combination search ------------------------------------------------------------

def _clustered(seed=0, n=300):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    a = y + 0.3 * rng.normal(size=n)
    b = y + 0.3 * rng.normal(size=n)
    noise = rng.normal(size=n)
    rows = [a, a + 0.5 * rng.normal(size=n), noise, noise + 0.3 * rng.normal(size=n)]
    return fm(rows, ["sig", "sig_noisy", "noise", "noise2"]), y


def test_select_best_evaluates_product():
    F, y = _clustered()
    cl = cluster_features(dissimilarity(F), 2, 0, F.names)
    assert sorted(np.bincount(cl.labels)) == [2, 2]
    res = select_best(cl, F, y, 0)
    assert len(res.alternatives) == 4
    assert res.cv_error == min(e for _, e in res.alternatives)
    assert res.k == 2


def test_select_best_planted_wins():
    F, y = _clustered()
    cl = cluster_features(dissimilarity(F), 2, 0, F.names)
    assert "sig" in select_best(cl, F, y, 0).selected


def test_candidate_sampling_cap():
    rng = np.random.default_rng(0)
    names = [f"f{j}" for j in range(12)]
    from avisa.isa import FeatureClusters
    cl = FeatureClusters(3, tuple(names), tuple(j % 3 for j in range(12)), (0, 1, 2), 0.0)
    combos = candidate_combinations(cl, 1, 10)
    assert len(set(combos)) == len(combos) and (10 <= len(combos) <= 11)
    assert ("f0", "f1", "f2") in combos
    assert combos == candidate_combinations(cl, 1, 10)


def test_select_features_deterministic():
    F, y = _clustered(1)
    tags = ["a", "b"] * (F.n_instances // 2)
    r1 = select_features(F, y, tags, 3)
    r2 = select_features(F, y, tags, 3)
    assert r1.to_dict() == r2.to_dict()
