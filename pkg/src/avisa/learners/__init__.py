"""Outcome classifiers, metrics and the Dynamic / Static / All comparison."""
from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .._rng import derive_int
from ..dataset import Corpus, Outcome, split_indices
from ..errors import ArgumentError, DataError
from ..features import FeatureMatrix
from .metrics import MetricsRow, f1_score, metrics
from .mlp import MultilayerPerceptron
from .naive_bayes import NaiveBayes
from .neighbors import KNearest
from .scaling import Standardizer
from .tree import DecisionTree, RandomForest, Tree

MODEL_FORMAT = "avisa-model"
MODEL_VERSION = 1
CONFIGURATIONS = ("Dynamic", "Static", "All")


class ModelKind(enum.Enum):
    RANDOM_FOREST = "RF"
    DECISION_TREE = "DT"
    K_NEAREST = "KNN"
    MULTILAYER_PERCEPTRON = "MLP"
    NAIVE_BAYES = "NB"


def make_estimator(kind: ModelKind):
    """Default configuration for each kind."""
    if kind is ModelKind.RANDOM_FOREST:
        return RandomForest(n_trees=100, max_features="sqrt", bootstrap=True)
    if kind is ModelKind.DECISION_TREE:
        return DecisionTree()
    if kind is ModelKind.K_NEAREST:
        return KNearest(k=5)
    if kind is ModelKind.MULTILAYER_PERCEPTRON:
        return MultilayerPerceptron(hidden=64, epochs=500, learning_rate=1e-2)
    return NaiveBayes(var_smoothing=1e-9)


@dataclass(frozen=True, eq=False)
class TrainedModel:
    kind: ModelKind
    estimator: object
    feature_names: tuple[str, ...]
    train_seed: int


def train(kind: ModelKind, X: FeatureMatrix, y, seed: int) -> TrainedModel:
    y = np.asarray(y, dtype=int)
    if y.shape != (X.n_instances,):
        raise ArgumentError("labels do not align with the feature matrix")
    counts = np.bincount(y, minlength=2)
    if counts.size > 2 or counts.min() < 2:
        raise DataError("degenerate labels: need at least 2 instances of each class")
    est = make_estimator(kind).fit(X.samples(), y, seed=seed)
    return TrainedModel(kind, est, X.names, int(seed))


def predict_labels(model: TrainedModel, X: FeatureMatrix) -> np.ndarray:
    if tuple(X.names) != model.feature_names:
        raise ArgumentError(
            f"feature mismatch: model expects {list(model.feature_names)}, got {list(X.names)}"
        )
    return model.estimator.predict(X.samples())


def predict(model: TrainedModel, X: FeatureMatrix) -> list[Outcome]:
    return [Outcome.from_label(v) for v in predict_labels(model, X)]


# -- serialisation ---------------------------------------------------------------

def _arr(a) -> list:
    return np.asarray(a).tolist()


def _state(model: TrainedModel) -> dict:
    est = model.estimator
    if isinstance(est, RandomForest):
        return {"n_trees": est.n_trees, "max_depth": est.max_depth, "max_features": est.max_features,
                "bootstrap": est.bootstrap, "trees": [t.to_dict() for t in est.trees_]}
    if isinstance(est, DecisionTree):
        return {"max_depth": est.max_depth, "tree": est.tree_.to_dict()}
    if isinstance(est, KNearest):
        return {"k": est.k, "X": _arr(est.X_), "y": _arr(est.y_),
                "mean": _arr(est.scaler_.mean), "scale": _arr(est.scaler_.scale)}
    if isinstance(est, MultilayerPerceptron):
        return {"hidden": est.hidden, "epochs": est.epochs, "learning_rate": est.learning_rate,
                "params": {k: _arr(v) for k, v in est.params_.items()},
                "mean": _arr(est.scaler_.mean), "scale": _arr(est.scaler_.scale)}
    return {"var_smoothing": est.var_smoothing, "theta": _arr(est.theta_), "var": _arr(est.var_),
            "prior": _arr(est.prior_)}


def _restore(kind: ModelKind, s: dict):
    if kind is ModelKind.RANDOM_FOREST:
        est = RandomForest(s["n_trees"], s["max_depth"], s["max_features"], s["bootstrap"])
        est.trees_ = [Tree.from_dict(t) for t in s["trees"]]
    elif kind is ModelKind.DECISION_TREE:
        est = DecisionTree(s["max_depth"])
        est.tree_ = Tree.from_dict(s["tree"])
    elif kind is ModelKind.K_NEAREST:
        est = KNearest(s["k"])
        est.X_, est.y_ = np.asarray(s["X"], dtype=float), np.asarray(s["y"], dtype=int)
        est.scaler_ = Standardizer(np.asarray(s["mean"]), np.asarray(s["scale"]))
    elif kind is ModelKind.MULTILAYER_PERCEPTRON:
        est = MultilayerPerceptron(s["hidden"], s["epochs"], s["learning_rate"])
        est.params_ = {k: np.asarray(v, dtype=float) for k, v in s["params"].items()}
        est.scaler_ = Standardizer(np.asarray(s["mean"]), np.asarray(s["scale"]))
    else:
        est = NaiveBayes(s["var_smoothing"])
        est.theta_, est.var_, est.prior_ = (np.asarray(s[k], dtype=float) for k in ("theta", "var", "prior"))
    return est


def model_to_json(model: TrainedModel) -> str:
    return json.dumps({
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind.value,
        "feature_names": list(model.feature_names),
        "train_seed": model.train_seed,
        "state": _state(model),
    }, sort_keys=True)


def model_from_json(text: str) -> TrainedModel:
    doc = json.loads(text)
    if doc.get("format") != MODEL_FORMAT:
        raise DataError("not a serialised model")
    if doc.get("version") != MODEL_VERSION:
        raise DataError(f"unsupported model version {doc.get('version')}")
    kind = ModelKind(doc["kind"])
    return TrainedModel(kind, _restore(kind, doc["state"]), tuple(doc["feature_names"]), doc["train_seed"])


def save_model(model: TrainedModel, path: str | Path) -> None:
    Path(path).write_text(model_to_json(model))


def load_model(path: str | Path) -> TrainedModel:
    return model_from_json(Path(path).read_text())


# -- comparison protocol -----------------------------------------------------------

@dataclass(frozen=True)
class ClassifierReport:
    rows: dict[tuple[ModelKind, str], MetricsRow]

    def __post_init__(self):
        if len(self.rows) != len(ModelKind) * len(CONFIGURATIONS):
            raise DataError(f"report needs {len(ModelKind) * len(CONFIGURATIONS)} rows, got {len(self.rows)}")

    def f1(self, kind: ModelKind, configuration: str) -> float:
        return self.rows[(kind, configuration)].f1

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "configuration", "precision", "recall", "f1"])
        for kind in ModelKind:
            for cfg in CONFIGURATIONS:
                r = self.rows[(kind, cfg)]
                w.writerow([kind.value, cfg, repr(r.precision), repr(r.recall), repr(r.f1)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ClassifierReport":
        rows = {}
        for rec in csv.DictReader(io.StringIO(text)):
            rows[(ModelKind(rec["model"]), rec["configuration"])] = MetricsRow(
                float(rec["precision"]), float(rec["recall"]), float(rec["f1"]))
        return cls(rows)

    def to_table(self) -> str:
        """Text table: one block per model, rows P/R/F1, columns Dynamic/Static/All."""
        lines = [f"{'':6}{'':4}" + "".join(f"{c:>10}" for c in CONFIGURATIONS)]
        for kind in ModelKind:
            for label, attr in (("P", "precision"), ("R", "recall"), ("F1", "f1")):
                head = kind.value if label == "R" else ""
                vals = "".join(f"{getattr(self.rows[(kind, c)], attr):>10.3f}" for c in CONFIGURATIONS)
                lines.append(f"{head:6}{label:4}{vals}")
            lines.append("-" * (10 + 10 * len(CONFIGURATIONS)))
        return "\n".join(lines[:-1]) + "\n"


def compare_configurations(features: FeatureMatrix, y, selected_static: Sequence[str],
                           selected_dynamic: Sequence[str], split_seed: int, train_seed: int,
                           train_fraction: float = 0.8) -> ClassifierReport:
    """Train every kind on Dynamic, Static and All feature sets over one shared split.

    ``features`` must contain every selected feature for all instances, with
    ``y`` aligned to its instances.
    """
    if not selected_static or not selected_dynamic:
        raise ArgumentError("both static and dynamic selections must be non-empty")
    y = np.asarray(y, dtype=int)
    train_idx, test_idx = split_indices(features.n_instances, train_fraction, split_seed)
    ids = features.instance_ids
    train_ids = [ids[i] for i in train_idx]
    test_ids = [ids[i] for i in test_idx]
    configs = {
        "Dynamic": list(selected_dynamic),
        "Static": list(selected_static),
        "All": list(selected_static) + [n for n in selected_dynamic if n not in selected_static],
    }
    rows = {}
    for kind in ModelKind:
        for cfg in CONFIGURATIONS:
            M = features.select(configs[cfg])
            seed = derive_int(train_seed, kind.value, cfg)
            model = train(kind, M.take(train_ids), y[train_idx], seed)
            rows[(kind, cfg)] = metrics(predict_labels(model, M.take(test_ids)), y[test_idx])
    return ClassifierReport(rows)


def compare_corpus(corpus: Corpus, selected_static, selected_dynamic, split_seed: int, train_seed: int,
                   features: FeatureMatrix) -> ClassifierReport:
    feats = features.take(corpus.ids)
    return compare_configurations(feats, corpus.labels, selected_static, selected_dynamic, split_seed, train_seed)


__all__ = [
    "ClassifierReport", "CONFIGURATIONS", "DecisionTree", "KNearest", "MetricsRow", "ModelKind",
    "MultilayerPerceptron", "NaiveBayes", "RandomForest", "TrainedModel", "compare_configurations",
    "compare_corpus", "f1_score", "load_model", "metrics", "model_from_json", "model_to_json",
    "predict", "predict_labels", "save_model", "train",
]
