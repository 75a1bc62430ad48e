"""Scenario data model, on-disk corpus format and subset construction.

A corpus directory looks like::

    index.csv            id,technique,outcome,road_file,telemetry_file[,<extra>...]
    roads/<id>.csv       x,y
    telemetry/<id>.csv   <channel>,<channel>,...   (one row per tick)
    provenance.txt       optional free text

Extra numeric columns in ``index.csv`` are carried as per-case static
attributes (the synthetic generator uses them for distractor features).
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from ._rng import derive_rng
from .errors import ArgumentError, DataError

INDEX_FILE = "index.csv"
INDEX_COLUMNS = ("id", "technique", "outcome", "road_file", "telemetry_file")
PROVENANCE_FILE = "provenance.txt"


class Outcome(enum.Enum):
    EFFECTIVE = "effective"
    INEFFECTIVE = "ineffective"

    @property
    def label(self) -> int:
        """1 for Effective, 0 for Ineffective."""
        return 1 if self is Outcome.EFFECTIVE else 0

    @classmethod
    def from_label(cls, value: int) -> "Outcome":
        return cls.EFFECTIVE if int(value) == 1 else cls.INEFFECTIVE


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TestCase:
    """One scenario.

    ``road`` is an ``(m, 2)`` array of road points (metres); ``telemetry``
    maps channel names to 1-D sample arrays.
    """

    __test__ = False  # not a pytest class

    id: str
    technique: str
    road: np.ndarray
    outcome: Outcome
    telemetry: Mapping[str, np.ndarray] = field(default_factory=dict)
    attributes: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "road", _frozen(self.road))
        object.__setattr__(
            self,
            "telemetry",
            MappingProxyType({str(k): _frozen(v) for k, v in self.telemetry.items()}),
        )
        object.__setattr__(
            self, "attributes", MappingProxyType({str(k): float(v) for k, v in self.attributes.items()})
        )
        problem = self.validation_problem()
        if problem is not None:
            raise DataError(f"malformed case {self.id}: {problem}")

    def validation_problem(self) -> str | None:
        road = self.road
        if road.ndim != 2 or road.shape[1] != 2:
            return "road must be an (m, 2) array"
        if road.shape[0] < 2:
            return f"road has {road.shape[0]} point(s), need at least 2"
        if not np.all(np.isfinite(road)):
            return "non-finite road coordinate"
        seg = np.hypot(*np.diff(road, axis=0).T)
        if np.any(seg == 0.0):
            return "zero-length road segment"
        if not isinstance(self.outcome, Outcome):
            return "outcome must be an Outcome"
        for name, samples in self.telemetry.items():
            if samples.ndim != 1 or samples.size == 0:
                return f"empty telemetry channel {name}"
            if not np.all(np.isfinite(samples)):
                return f"non-finite sample in channel {name}"
        for name, value in self.attributes.items():
            if not math.isfinite(value):
                return f"non-finite attribute {name}"
        return None

    @property
    def label(self) -> int:
        return self.outcome.label


@dataclass(frozen=True, eq=False)
class Corpus:
    cases: tuple[TestCase, ...]
    provenance: str = ""

    def __post_init__(self):
        object.__setattr__(self, "cases", tuple(self.cases))
        if not self.cases:
            raise DataError("corpus is empty")
        seen: set[str] = set()
        for case in self.cases:
            if case.id in seen:
                raise DataError(f"duplicate id {case.id}")
            seen.add(case.id)

    def __len__(self) -> int:
        return len(self.cases)

    def __iter__(self):
        return iter(self.cases)

    @property
    def ids(self) -> list[str]:
        return [c.id for c in self.cases]

    @property
    def labels(self) -> np.ndarray:
        return np.array([c.label for c in self.cases], dtype=int)

    @property
    def techniques(self) -> list[str]:
        return [c.technique for c in self.cases]

    def subset(self, ids: Iterable[str]) -> "Corpus":
        """Cases whose id is in ``ids``, in corpus order."""
        wanted = set(ids)
        return Corpus(tuple(c for c in self.cases if c.id in wanted), self.provenance)


# -- disk format ------------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def _write_table(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    if columns:
        for row in zip(*columns):
            buf.write(",".join(_fmt(v) for v in row) + "\n")
    path.write_text(buf.getvalue())


def _read_table(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError("empty file")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise ValueError(f"non-numeric value in {path.name}: {exc}") from None
    if body and data.shape[1] != len(header):
        raise ValueError(f"ragged rows in {path.name}")
    return header, data.reshape(len(body), len(header))


def save_corpus(corpus: Corpus, root: str | Path) -> Path:
    """Write ``corpus`` in the directory layout described in the module docstring."""
    root = Path(root)
    (root / "roads").mkdir(parents=True, exist_ok=True)
    (root / "telemetry").mkdir(parents=True, exist_ok=True)
    extra = sorted({k for c in corpus for k in c.attributes})
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(INDEX_COLUMNS) + extra)
    for case in corpus:
        road_file = f"roads/{case.id}.csv"
        tel_file = f"telemetry/{case.id}.csv" if case.telemetry else ""
        _write_table(root / road_file, ["x", "y"], [case.road[:, 0], case.road[:, 1]])
        if case.telemetry:
            names = list(case.telemetry)
            _write_table(root / tel_file, names, [case.telemetry[n] for n in names])
        writer.writerow(
            [case.id, case.technique, case.outcome.value, road_file, tel_file]
            + [_fmt(case.attributes[k]) for k in extra]
        )
    (root / INDEX_FILE).write_text(buf.getvalue())
    if corpus.provenance:
        (root / PROVENANCE_FILE).write_text(corpus.provenance)
    return root


def _load_case(root: Path, row: dict[str, str], extra: list[str]) -> TestCase:
    cid = row["id"]
    outcome_text = row["outcome"]
    try:
        outcome = Outcome(outcome_text)
    except ValueError:
        raise DataError(f"malformed case {cid}: outcome {outcome_text!r} is not 'effective' or 'ineffective'")
    try:
        header, road = _read_table(root / row["road_file"])
        if header != ["x", "y"]:
            raise ValueError(f"road header must be x,y, got {','.join(header)}")
        telemetry = {}
        if row["telemetry_file"]:
            names, samples = _read_table(root / row["telemetry_file"])
            if len(set(names)) != len(names):
                raise ValueError("duplicate telemetry channel names")
            telemetry = {n: samples[:, j] for j, n in enumerate(names)}
        attributes = {k: float(row[k]) for k in extra}
    except (OSError, ValueError) as exc:
        raise DataError(f"malformed case {cid}: {exc}") from None
    return TestCase(cid, row["technique"], road, outcome, telemetry, attributes)


def load_corpus(root_path: str | Path) -> Corpus:
    """Load and validate a corpus directory.

    Raises :class:`DataError` for a missing index, any malformed case (all
    problems are reported, sorted by id) or duplicate ids.
    """
    root = Path(root_path)
    index = root / INDEX_FILE
    if not index.is_file():
        raise DataError(f"corpus not found: {index}")
    with open(index, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        missing = [c for c in INDEX_COLUMNS if c not in fields]
        if missing:
            raise DataError(f"malformed index: missing columns {', '.join(missing)}")
        rows = list(reader)
    extra = [f for f in fields if f not in INDEX_COLUMNS]
    ids = [r["id"] for r in rows]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        raise DataError(f"duplicate id {', '.join(dup)}")
    cases, errors = [], []
    for row in rows:
        try:
            cases.append(_load_case(root, row, extra))
        except DataError as exc:
            errors.append((row["id"], str(exc)))
    if errors:
        errors.sort()
        raise DataError("; ".join(msg for _, msg in errors))
    prov = root / PROVENANCE_FILE
    return Corpus(tuple(cases), prov.read_text() if prov.is_file() else "")


# -- subsets ----------------------------------------------------------------------

def balanced_subset(corpus: Corpus, seed: int) -> Corpus:
    """All Effective cases plus, per technique, as many sampled Ineffective ones."""
    keep: set[str] = set()
    for technique in sorted(set(corpus.techniques)):
        eff = [c.id for c in corpus if c.technique == technique and c.outcome is Outcome.EFFECTIVE]
        ineff = [c.id for c in corpus if c.technique == technique and c.outcome is Outcome.INEFFECTIVE]
        if not eff or len(ineff) < len(eff):
            raise DataError(f"cannot balance technique {technique}")
        rng = derive_rng(seed, "balanced_subset", technique)
        picked = rng.choice(len(ineff), size=len(eff), replace=False)
        keep.update(eff)
        keep.update(ineff[i] for i in picked)
    return corpus.subset(keep)


def split_sizes(n: int, train_fraction: float) -> tuple[int, int]:
    """Train/test sizes; the train size is ``floor(train_fraction * n)``.

    6,122 cases at 0.8 give 4,897 / 1,225.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ArgumentError(f"train_fraction must be in (0, 1), got {train_fraction}")
    # guard against 0.29 * 100 == 28.999999999999996
    n_train = int(math.floor(train_fraction * n + 1e-9))
    return n_train, n - n_train


def split_indices(n: int, train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    n_train, _ = split_sizes(n, train_fraction)
    perm = derive_rng(seed, "split").permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def split(corpus: Corpus, train_fraction: float, seed: int) -> tuple[Corpus, Corpus]:
    """Seeded disjoint train/test partition (both parts keep corpus order)."""
    train_idx, test_idx = split_indices(len(corpus), train_fraction, seed)
    if train_idx.size == 0 or test_idx.size == 0:
        raise ArgumentError(f"train_fraction {train_fraction} leaves an empty part of {len(corpus)} cases")
    cases = corpus.cases
    return (
        Corpus(tuple(cases[i] for i in train_idx), corpus.provenance),
        Corpus(tuple(cases[i] for i in test_idx), corpus.provenance),
    )
