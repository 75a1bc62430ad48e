"""PILOT: a linear 2-D projection that keeps feature and outcome trends linear.

With the standardised feature matrix ``F`` (n x i) and outcome row ``y``
(length i), PILOT minimises

    ||F - B Z||_F^2 + ||y - C^T Z||^2     subject to   Z = A F

over ``A`` (2 x n), ``B`` (n x 2) and ``C`` (2,).  Substituting the
constraint gives a smooth unconstrained problem in ``theta = [A.ravel(),
B.ravel(), C]`` (length 4n + 2), solved here by L-BFGS from several
seeded starts.  The solution is defined only up to an orthogonal 2x2
transform ``(QA, BQ^T, QC)``.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from ._rng import derive_rng
from .errors import ArgumentError, ConvergenceError, DataError
from .features import FeatureMatrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Standardization:
    feature_names: tuple[str, ...]
    feature_mean: np.ndarray
    feature_std: np.ndarray
    outcome_mean: float
    outcome_std: float

    def apply(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        return (v - self.feature_mean[:, None]) / self.feature_std[:, None]

    def invert(self, standardized) -> np.ndarray:
        s = np.asarray(standardized, dtype=float)
        return s * self.feature_std[:, None] + self.feature_mean[:, None]

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "feature_mean": self.feature_mean.tolist(),
            "feature_std": self.feature_std.tolist(),
            "outcome_mean": self.outcome_mean,
            "outcome_std": self.outcome_std,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Standardization":
        return cls(tuple(d["feature_names"]), np.asarray(d["feature_mean"], dtype=float),
                   np.asarray(d["feature_std"], dtype=float), float(d["outcome_mean"]), float(d["outcome_std"]))


def standardize(F: FeatureMatrix, Y) -> tuple[np.ndarray, np.ndarray, Standardization]:
    """Z-score each feature row and the outcome vector (population std)."""
    Y = np.asarray(Y, dtype=float)
    if Y.shape != (F.n_instances,):
        raise ArgumentError("outcomes do not align with the feature matrix")
    mean = F.values.mean(axis=1)
    std = F.values.std(axis=1)
    for name, s in zip(F.names, std):
        if s == 0.0:
            raise DataError(f"zero variance feature {name}")
    y_mean, y_std = float(Y.mean()), float(Y.std())
    if y_std == 0.0:
        raise DataError("outcome vector has a single class")
    rec = Standardization(F.names, mean, std, y_mean, y_std)
    return rec.apply(F.values), (Y - y_mean) / y_std, rec


def _shapes(n: int) -> tuple[slice, slice, slice]:
    return slice(0, 2 * n), slice(2 * n, 4 * n), slice(4 * n, 4 * n + 2)


def pack(A, B, C) -> np.ndarray:
    return np.concatenate([np.ravel(A), np.ravel(B), np.ravel(C)])


def unpack(theta, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    sa, sb, sc = _shapes(n)
    return theta[sa].reshape(2, n), theta[sb].reshape(n, 2), theta[sc].copy()


def pilot_objective(A, B, C, F, Y) -> tuple[float, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Objective value and its gradient ``(dA, dB, dC)``."""
    A, B, C = np.asarray(A, float), np.asarray(B, float), np.ravel(np.asarray(C, float))
    F, Y = np.asarray(F, float), np.ravel(np.asarray(Y, float))
    n, i = F.shape
    if A.shape != (2, n) or B.shape != (n, 2) or C.shape != (2,) or Y.shape != (i,):
        raise ArgumentError(f"shape mismatch: A{A.shape} B{B.shape} C{C.shape} F{F.shape} Y{Y.shape}")
    Z = A @ F
    R = F - B @ Z
    r = Y - C @ Z
    value = float(np.sum(R * R) + r @ r)
    dZ = -2.0 * (B.T @ R + np.outer(C, r))
    return value, (dZ @ F.T, -2.0 * R @ Z.T, -2.0 * Z @ r)


def _flat_objective(theta, F, Y):
    n = F.shape[0]
    A, B, C = unpack(theta, n)
    value, (dA, dB, dC) = pilot_objective(A, B, C, F, Y)
    return value, pack(dA, dB, dC)


@dataclass(frozen=True, eq=False)
class ProjectionModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Z: np.ndarray
    objective: float
    feature_names: tuple[str, ...]
    standardization: Standardization | None = None
    initial_objective: float = float("nan")
    trace: tuple[float, ...] = ()
    restart: int = 0
    iterations: int = 0
    converged: bool = False

    def project(self, F: FeatureMatrix) -> np.ndarray:
        """Coordinates (2 x i) of new instances, standardised with the fitted record."""
        if tuple(F.names) != self.feature_names:
            raise ArgumentError("feature names differ from the fitted model")
        return self.A @ self.standardization.apply(F.values)

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "C": self.C.tolist(),
            "objective": self.objective,
            "initial_objective": self.initial_objective,
            "restart": self.restart,
            "iterations": self.iterations,
            "converged": self.converged,
            "standardization": None if self.standardization is None else self.standardization.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict, F: FeatureMatrix | None = None) -> "ProjectionModel":
        std = Standardization.from_dict(d["standardization"]) if d.get("standardization") else None
        A = np.asarray(d["A"], dtype=float)
        Z = A @ std.apply(F.values) if (F is not None and std is not None) else np.zeros((2, 0))
        return cls(A, np.asarray(d["B"], dtype=float), np.asarray(d["C"], dtype=float), Z,
                   float(d["objective"]), tuple(d["feature_names"]), std, float(d["initial_objective"]),
                   (), int(d["restart"]), int(d["iterations"]), bool(d["converged"]))


def _run_once(F, Y, theta0, max_iters, grad_tol):
    last = {}

    def fun(theta):
        v, g = _flat_objective(theta, F, Y)
        last["x"], last["v"], last["g"] = theta.copy(), v, g
        return v, g

    v0, _ = fun(theta0)
    trace = [v0]
    state = {"converged": False}

    def callback(intermediate_result):
        x = intermediate_result.x
        if "x" in last and np.array_equal(last["x"], x):
            v, g = last["v"], last["g"]
        else:
            v, g = _flat_objective(x, F, Y)
        trace.append(float(v))
        if not np.isfinite(v):
            raise StopIteration
        if np.linalg.norm(g) < grad_tol:
            state["converged"] = True
            raise StopIteration

    res = minimize(fun, theta0, jac=True, method="L-BFGS-B", callback=callback,
                   options={"maxiter": max_iters, "maxcor": 10, "ftol": 0.0, "gtol": 0.0,
                            "maxfun": 20 * max_iters, "maxls": 40})
    value, grad = _flat_objective(res.x, F, Y)
    converged = state["converged"] or np.linalg.norm(grad) < grad_tol
    return res.x, value, v0, trace, int(res.nit), bool(converged)


def fit_pilot(F_std, Y_std, seed: int, restarts: int = 30, max_iters: int = 1000, grad_tol: float = 1e-6,
              feature_names=None, standardization: Standardization | None = None) -> ProjectionModel:
    """Minimise the PILOT objective from ``restarts`` seeded Gaussian starts; keep the best."""
    F = np.asarray(F_std, dtype=float)
    Y = np.ravel(np.asarray(Y_std, dtype=float))
    n, i = F.shape
    if n < 2 or i < 10:
        raise ArgumentError(f"PILOT needs n >= 2 features and i >= 10 instances, got n={n}, i={i}")
    if Y.shape != (i,):
        raise ArgumentError("outcome vector does not match the instances")
    names = tuple(feature_names) if feature_names is not None else tuple(f"f{j}" for j in range(n))
    best = None
    for r in range(restarts):
        theta0 = derive_rng(seed, "pilot", r).normal(0.0, np.sqrt(1.0 / n), size=4 * n + 2)
        with np.errstate(over="ignore", invalid="ignore"):
            theta, value, v0, trace, nit, conv = _run_once(F, Y, theta0, max_iters, grad_tol)
        if not np.isfinite(value):
            logger.warning("pilot restart %d diverged", r)
            continue
        if best is None or value < best[1]:
            best = (theta, value, v0, trace, nit, conv, r)
    if best is None:
        raise ConvergenceError("pilot failed to converge")
    theta, value, v0, trace, nit, conv, r = best
    A, B, C = unpack(theta, n)
    return ProjectionModel(A, B, C, A @ F, value, names, standardization, v0, tuple(trace), r, nit, conv)


def fit_projection(F: FeatureMatrix, Y, seed: int, **kwargs) -> ProjectionModel:
    """Standardise ``F`` and ``Y`` and fit PILOT."""
    Fs, Ys, rec = standardize(F, Y)
    return fit_pilot(Fs, Ys, seed, feature_names=F.names, standardization=rec, **kwargs)


@dataclass(frozen=True, eq=False)
class InstanceSpace:
    instance_ids: tuple[str, ...]
    coordinates: np.ndarray          # (i, 2)
    labels: np.ndarray               # (i,) 1 = Effective
    feature_names: tuple[str, ...]
    normalized_features: np.ndarray  # (i, n), each column min-max scaled to [0, 1]

    def __len__(self) -> int:
        return len(self.instance_ids)

    def feature(self, name: str) -> np.ndarray:
        if name not in self.feature_names:
            raise ArgumentError(f"unknown feature {name}")
        return self.normalized_features[:, self.feature_names.index(name)]

    def to_csv(self) -> str:
        head = ["id", "z1", "z2", "outcome"] + list(self.feature_names)
        lines = [",".join(head)]
        for j, iid in enumerate(self.instance_ids):
            outcome = "effective" if self.labels[j] == 1 else "ineffective"
            vals = [repr(float(self.coordinates[j, 0])), repr(float(self.coordinates[j, 1])), outcome]
            vals += [repr(float(v)) for v in self.normalized_features[j]]
            lines.append(iid + "," + ",".join(vals))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "InstanceSpace":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        if not rows or rows[0][:4] != ["id", "z1", "z2", "outcome"]:
            raise DataError("instance space CSV must start with id,z1,z2,outcome")
        names = tuple(rows[0][4:])
        body = rows[1:]
        try:
            coords = np.array([[float(r[1]), float(r[2])] for r in body], dtype=float).reshape(len(body), 2)
            labels = np.array([{"effective": 1, "ineffective": 0}[r[3]] for r in body], dtype=int)
            feats = np.array([[float(v) for v in r[4:]] for r in body], dtype=float).reshape(len(body), len(names))
        except (KeyError, ValueError, IndexError) as exc:
            raise DataError(f"malformed instance space CSV: {exc}") from None
        return cls(tuple(r[0] for r in body), coords, labels, names, feats)


def min_max(values) -> np.ndarray:
    """Scale each row to [0, 1]; constant rows map to 0."""
    v = np.asarray(values, dtype=float)
    lo = v.min(axis=1, keepdims=True)
    span = v.max(axis=1, keepdims=True) - lo
    out = np.where(span > 0, (v - lo) / np.where(span > 0, span, 1.0), 0.0)
    return np.clip(out, 0.0, 1.0)


def build_instance_space(model: ProjectionModel, F: FeatureMatrix, Y) -> InstanceSpace:
    if tuple(F.names) != model.feature_names:
        raise ArgumentError(
            f"feature names {list(F.names)} do not match the model's {list(model.feature_names)}")
    Y = np.asarray(Y, dtype=int)
    Z = model.Z if model.Z.shape == (2, F.n_instances) else model.project(F)
    return InstanceSpace(F.instance_ids, np.ascontiguousarray(Z.T), Y, F.names, min_max(F.values).T.copy())
