import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from avisa.errors import ArgumentError, DataError
from avisa.features import FeatureMatrix
from avisa.pilot import (InstanceSpace, ProjectionModel, build_instance_space, fit_pilot, fit_projection,
                         min_max, pack, pilot_objective, standardize, unpack)


def fm(rows):
    rows = np.asarray(rows, dtype=float)
    return FeatureMatrix(tuple(f"f{j}" for j in range(rows.shape[0])), rows,
                         tuple(f"i{k}" for k in range(rows.shape[1])))


def objective_oracle(A, B, C, F, Y):
    Z = A @ F
    return float(np.linalg.norm(F - B @ Z, "fro") ** 2 + np.linalg.norm(Y - C @ Z) ** 2)


def latent_data(seed=0, n=6, i=200):
    rng = np.random.default_rng(seed)
    latent = rng.normal(size=(2, i))
    F = rng.normal(size=(n, 2)) @ latent
    Y = np.array([0.7, -1.3]) @ latent
    return F, Y


def test_standardize_examples():
    F = fm([[1, 2, 3, 4], [2, 2, 3, 3]])
    Fs, Ys, rec = standardize(F, [0, 1, 0, 1])
    np.testing.assert_allclose(Ys, [-1, 1, -1, 1])
    Fs3, _, _ = standardize(fm([[1, 2, 3]]), [0, 1, 1])
    np.testing.assert_allclose(Fs3[0], [-math.sqrt(1.5), 0, math.sqrt(1.5)])
    np.testing.assert_allclose(rec.invert(Fs), F.values, atol=1e-12)


def test_standardize_zero_variance():
    with pytest.raises(DataError, match="zero variance feature f1"):
        standardize(fm([[1, 2, 3], [4, 4, 4]]), [0, 1, 0])


def test_objective_perfect_reconstruction():
    rng = np.random.default_rng(0)
    F = rng.normal(size=(2, 20))
    value, _ = pilot_objective(np.eye(2), np.eye(2), np.zeros(2), F, np.zeros(20))
    assert value == pytest.approx(0.0, abs=1e-20)


def test_objective_zero_projection():
    rng = np.random.default_rng(0)
    F, Y = rng.normal(size=(4, 20)), rng.normal(size=20)
    value, _ = pilot_objective(np.zeros((2, 4)), rng.normal(size=(4, 2)), rng.normal(size=2), F, Y)
    assert value == pytest.approx(np.sum(F**2) + np.sum(Y**2), rel=1e-12)


def test_objective_shape_mismatch():
    with pytest.raises(ArgumentError):
        pilot_objective(np.zeros((2, 3)), np.zeros((4, 2)), np.zeros(2), np.zeros((4, 5)), np.zeros(5))


def finite_difference(F, Y, theta, h=1e-6):
    n = F.shape[0]
    g = np.zeros_like(theta)
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e[k] = h
        g[k] = (objective_oracle(*unpack(theta + e, n), F, Y) - objective_oracle(*unpack(theta - e, n), F, Y)) / (2 * h)
    return g


@pytest.mark.parametrize("seed", range(5))
def test_gradient_vs_finite_difference(seed):
    rng = np.random.default_rng(seed)
    F, Y = rng.normal(size=(4, 20)), rng.normal(size=20)
    theta = rng.normal(size=18)
    value, grads = pilot_objective(*unpack(theta, 4), F, Y)
    assert value == pytest.approx(objective_oracle(*unpack(theta, 4), F, Y), rel=1e-12)
    np.testing.assert_allclose(pack(*grads), finite_difference(F, Y, theta), rtol=1e-5, atol=1e-5)


@given(st.integers(0, 2**32), st.floats(0, 2 * math.pi), st.booleans())
def test_rotation_invariance(seed, angle, reflect):
    rng = np.random.default_rng(seed)
    F, Y = rng.normal(size=(5, 30)), rng.normal(size=30)
    A, B, C = rng.normal(size=(2, 5)), rng.normal(size=(5, 2)), rng.normal(size=2)
    Q = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    if reflect:
        Q = Q @ np.diag([1.0, -1.0])
    v1, _ = pilot_objective(A, B, C, F, Y)
    v2, _ = pilot_objective(Q @ A, B @ Q.T, Q @ C, F, Y)
    assert v2 == pytest.approx(v1, rel=1e-9)


@pytest.fixture(scope="module")
def latent_model():
    F, Y = latent_data()
    return fit_projection(fm(F), Y, 0, restarts=5), F, Y


def test_fit_latent_recovery(latent_model):
    model, F, Y = latent_model
    assert model.objective <= 1e-3 * model.initial_objective
    Fs = model.standardization.apply(F)
    Z = model.Z
    X = np.column_stack([Z.T, np.ones(Z.shape[1])])
    for row in Fs:
        coef, *_ = np.linalg.lstsq(X, row, rcond=None)
        resid = row - X @ coef
        assert 1 - resid @ resid / np.sum((row - row.mean()) ** 2) >= 0.99


def test_fit_invariants(latent_model):
    model, F, Y = latent_model
    Fs, Ys, _ = standardize(fm(F), Y)
    np.testing.assert_allclose(model.Z, model.A @ Fs, atol=1e-12)
    assert model.objective == pytest.approx(objective_oracle(model.A, model.B, model.C, Fs, Ys), rel=1e-9)
    trace = np.array(model.trace)
    assert np.all(np.diff(trace) <= 1e-12 * np.maximum(1.0, trace[:-1]))
    assert model.A.shape == (2, 6)


def test_fit_deterministic():
    F, Y = latent_data(1)
    m1 = fit_projection(fm(F), Y, 4, restarts=3)
    m2 = fit_projection(fm(F), Y, 4, restarts=3)
    assert m1.to_dict() == m2.to_dict()


def test_ten_features_shape():
    F, Y = latent_data(2, n=10, i=60)
    model = fit_projection(fm(F + 0.01 * np.random.default_rng(0).normal(size=F.shape)), Y, 0, restarts=2)
    assert model.A.shape == (2, 10) and model.B.shape == (10, 2) and model.C.shape == (2,)


def test_fit_preconditions():
    with pytest.raises(ArgumentError):
        fit_pilot(np.zeros((1, 20)), np.zeros(20), 0)
    with pytest.raises(ArgumentError):
        fit_pilot(np.zeros((3, 5)), np.zeros(5), 0)


def test_model_round_trip(latent_model):
    model, F, _ = latent_model
    back = ProjectionModel.from_dict(model.to_dict(), fm(F))
    np.testing.assert_allclose(back.Z, model.Z, atol=1e-12)


def test_instance_space(latent_model):
    model, F, Y = latent_model
    y = (Y > 0).astype(int)
    space = build_instance_space(model, fm(F), y)
    vals = space.normalized_features
    assert vals.min() >= 0 and vals.max() <= 1
    assert np.all(vals.min(axis=0) == 0) and np.all(vals.max(axis=0) == 1)
    assert np.array_equal(space.labels, y)
    back = InstanceSpace.from_csv(space.to_csv())
    np.testing.assert_array_equal(back.coordinates, space.coordinates)
    np.testing.assert_array_equal(back.normalized_features, space.normalized_features)


def test_instance_space_name_mismatch(latent_model):
    model, F, Y = latent_model
    other = FeatureMatrix(tuple(f"g{j}" for j in range(F.shape[0])), F, tuple(f"i{k}" for k in range(F.shape[1])))
    with pytest.raises(ArgumentError):
        build_instance_space(model, other, Y > 0)


def test_min_max_constant_row():
    np.testing.assert_array_equal(min_max([[2.0, 2.0, 2.0]]), [[0.0, 0.0, 0.0]])


def test_malformed_instance_space_csv():
    with pytest.raises(DataError):
        InstanceSpace.from_csv("id,z1,z2,outcome\na,1,2,maybe\n")


def logistic_accuracy(X, y, iters=2000, lr=0.5):
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    X = np.column_stack([X, np.ones(len(X))])
    w = np.zeros(X.shape[1])
    for _ in range(iters):
        p = 1 / (1 + np.exp(-X @ w))
        w -= lr * X.T @ (p - y) / len(y)
    return float(np.mean(((X @ w) > 0) == y))


def test_planted_separable_space():
    rng = np.random.default_rng(3)
    i = 400
    y = rng.integers(0, 2, i)
    latent = np.vstack([y + 0.25 * rng.normal(size=i), rng.normal(size=i)])
    F = rng.normal(size=(5, 2)) @ latent + 0.05 * rng.normal(size=(5, i))
    model = fit_projection(fm(F), y, 0, restarts=5)
    space = build_instance_space(model, fm(F), y)
    assert logistic_accuracy(space.coordinates, y) >= 0.85
