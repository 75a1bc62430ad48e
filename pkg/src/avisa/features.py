"""Feature matrices and corpus-wide feature extraction.

A :class:`FeatureMatrix` stores features as rows and instances as columns
(``n x i``).  On disk it is written transposed: one CSV row per instance,
``id`` first, then one column per feature.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dataset import Corpus
from .dynamic_features import dynamic_feature_names, dynamic_vector
from .errors import ArgumentError, DataError
from .static_features import DEFAULT_TURN_THRESHOLD, STATIC_FEATURES, static_vector


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    names: tuple[str, ...]
    values: np.ndarray
    instance_ids: tuple[str, ...]

    def __post_init__(self):
        names = tuple(self.names)
        ids = tuple(self.instance_ids)
        values = np.array(self.values, dtype=float).reshape(len(names), len(ids))
        values.setflags(write=False)
        if len(set(names)) != len(names):
            raise ArgumentError("feature names must be unique")
        if len(set(ids)) != len(ids):
            raise ArgumentError("instance ids must be unique")
        if not np.all(np.isfinite(values)):
            bad = [names[r] for r in np.unique(np.nonzero(~np.isfinite(values))[0])]
            raise DataError(f"non-finite values in features {', '.join(bad)}")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "instance_ids", ids)
        object.__setattr__(self, "values", values)

    @property
    def n_features(self) -> int:
        return len(self.names)

    @property
    def n_instances(self) -> int:
        return len(self.instance_ids)

    def row(self, name: str) -> np.ndarray:
        return self.values[self.names.index(name)]

    def select(self, names: Sequence[str]) -> "FeatureMatrix":
        missing = [n for n in names if n not in self.names]
        if missing:
            raise ArgumentError(f"unknown features: {', '.join(missing)}")
        idx = [self.names.index(n) for n in names]
        return FeatureMatrix(tuple(names), self.values[idx], self.instance_ids)

    def take(self, ids: Sequence[str]) -> "FeatureMatrix":
        pos = {iid: j for j, iid in enumerate(self.instance_ids)}
        try:
            cols = [pos[i] for i in ids]
        except KeyError as exc:
            raise ArgumentError(f"unknown instance id {exc.args[0]}") from None
        return FeatureMatrix(self.names, self.values[:, cols], tuple(ids))

    def samples(self) -> np.ndarray:
        """Instances-by-features view for the learners."""
        return np.ascontiguousarray(self.values.T)

    @staticmethod
    def stack(parts: Iterable["FeatureMatrix"]) -> "FeatureMatrix":
        parts = list(parts)
        ids = parts[0].instance_ids
        if any(p.instance_ids != ids for p in parts):
            raise ArgumentError("feature matrices cover different instances")
        return FeatureMatrix(
            tuple(n for p in parts for n in p.names), np.vstack([p.values for p in parts]), ids
        )

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        buf.write(",".join(("id",) + self.names) + "\n")
        for j, iid in enumerate(self.instance_ids):
            buf.write(iid + "," + ",".join(repr(float(v)) for v in self.values[:, j]) + "\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path: str | Path) -> "FeatureMatrix":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        if not rows or rows[0][0] != "id":
            raise DataError(f"{path}: expected a header starting with 'id'")
        names = tuple(rows[0][1:])
        try:
            data = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=float)
        except ValueError as exc:
            raise DataError(f"{path}: {exc}") from None
        return cls(names, data.reshape(len(rows) - 1, len(names)).T, tuple(r[0] for r in rows[1:]))


def static_matrix(corpus: Corpus, threshold_deg: float = DEFAULT_TURN_THRESHOLD,
                  include_attributes: bool = True) -> FeatureMatrix:
    """19 road-geometry features, followed by any per-case numeric attributes."""
    attrs = sorted({k for c in corpus for k in c.attributes}) if include_attributes else []
    cols = []
    for case in corpus:
        vec = static_vector(case, threshold_deg)
        try:
            extra = [case.attributes[a] for a in attrs]
        except KeyError as exc:
            raise DataError(f"case {case.id} lacks attribute {exc.args[0]}") from None
        cols.append([vec[n] for n in STATIC_FEATURES] + extra)
    return FeatureMatrix(STATIC_FEATURES + tuple(attrs), np.array(cols).T, tuple(corpus.ids))


def common_channels(corpus: Corpus) -> list[str]:
    """Channels present in every case, in first-case order."""
    first = list(corpus.cases[0].telemetry)
    return [c for c in first if all(c in case.telemetry for case in corpus)]


def dynamic_matrix(corpus: Corpus, channels: Sequence[str] | None = None) -> FeatureMatrix:
    channels = list(channels) if channels is not None else common_channels(corpus)
    names = dynamic_feature_names(channels)
    cols = []
    for case in corpus:
        vec = dynamic_vector(case, channels)
        cols.append([vec[n] for n in names])
    return FeatureMatrix(tuple(names), np.array(cols, dtype=float).reshape(len(corpus), len(names)).T,
                         tuple(corpus.ids))
