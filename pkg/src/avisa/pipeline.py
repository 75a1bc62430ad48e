"""End-to-end run: load or synthesise, extract, select, project, train, report.

Each run writes into ``<out>/run-<hash>``, where the hash is taken over the
canonical JSON of the configuration, so reruns of one configuration land in
the same directory with byte-identical artefacts.  Outputs are assembled in
a temporary sibling directory and moved into place only when every stage
has succeeded.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import synthetic
from .dataset import Corpus, balanced_subset, load_corpus
from .errors import ArgumentError, AvisaError, DataError
from .features import FeatureMatrix, dynamic_matrix, static_matrix
from .isa import SelectionResult, select_features
from .learners import ClassifierReport, compare_configurations
from .pilot import InstanceSpace, ProjectionModel, build_instance_space, fit_projection
from .report import projection_table, write_plots
from .static_features import DEFAULT_TURN_THRESHOLD

logger = logging.getLogger(__name__)

FAMILIES = ("static", "dynamic")


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of a run.  ``out`` only says where runs go and is not hashed."""

    corpus: str | None = None          # corpus directory; None means synthesise
    synth_n: int = 2000
    synth_seed: int = 42
    seed: int = 42                     # balancing, selection, projection
    split_seed: int | None = None      # defaults to ``seed``
    train_seed: int | None = None      # defaults to ``seed``
    balance: bool = True
    turn_threshold: float = DEFAULT_TURN_THRESHOLD
    channels: tuple[str, ...] | None = None
    prefilter_threshold: float = 0.3
    k_range: tuple[int, int] | None = None
    max_combinations: int = 10_000
    pilot_restarts: int = 30
    pilot_max_iters: int = 1000
    pilot_grad_tol: float = 1e-6
    train_fraction: float = 0.8
    classifiers: bool = True
    plots: bool = True
    out: str = "out"

    def __post_init__(self):
        if self.corpus is None and self.synth_n < 50:
            raise ArgumentError("synth_n must be at least 50")
        if not 0.0 < self.train_fraction < 1.0:
            raise ArgumentError("train_fraction must be in (0, 1)")
        if self.k_range is not None and (len(self.k_range) != 2 or self.k_range[0] < 2
                                         or self.k_range[1] < self.k_range[0]):
            raise ArgumentError("k_range must be [lo, hi] with 2 <= lo <= hi")
        if self.channels is not None:
            object.__setattr__(self, "channels", tuple(self.channels))
        if self.k_range is not None:
            object.__setattr__(self, "k_range", tuple(int(k) for k in self.k_range))

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ArgumentError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        for key in ("channels", "k_range"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d

    def digest(self) -> str:
        d = self.to_dict()
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    @property
    def run_name(self) -> str:
        return "run-" + self.digest()[:12]

    @property
    def k_values(self) -> range | None:
        return None if self.k_range is None else range(self.k_range[0], self.k_range[1] + 1)


class StageError(AvisaError):
    """A pipeline stage failed; carries the stage name and keeps the cause's exit code."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)


@dataclass
class FamilySelection:
    results: dict[str, SelectionResult] = field(default_factory=dict)

    @property
    def selected_static(self) -> list[str]:
        return list(self.results["static"].selected)

    @property
    def selected_dynamic(self) -> list[str]:
        return list(self.results["dynamic"].selected)

    @property
    def selected(self) -> list[str]:
        out: list[str] = []
        for fam in FAMILIES:
            if fam in self.results:
                out += [n for n in self.results[fam].selected if n not in out]
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "selected": self.selected,
            "families": {fam: res.to_dict() for fam, res in self.results.items()},
        }

    @staticmethod
    def selected_from_dict(d: dict[str, Any]) -> dict[str, list[str]]:
        """``{"static": [...], "dynamic": [...]}`` from a selection document."""
        try:
            return {fam: list(v["selected"]) for fam, v in d["families"].items()}
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed selection document: {exc}") from None


def select_families(families: dict[str, FeatureMatrix], y, techniques: Sequence[str], seed: int,
                    threshold: float = 0.3, k_range=None, max_combinations: int = 10_000) -> FamilySelection:
    """Run prefilter, clustering and selection separately on each feature family."""
    sel = FamilySelection()
    for fam, F in families.items():
        logger.info("selecting %s features from %d candidates", fam, F.n_features)
        sel.results[fam] = select_features(F, y, techniques, seed, threshold, k_range, max_combinations)
    return sel


def _dump_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=True) + "\n"


def load_stage(config: PipelineConfig) -> Corpus:
    if config.corpus is not None:
        return load_corpus(config.corpus)
    return synthetic.generate_corpus(config.synth_n, config.synth_seed)


def run_pipeline(config: PipelineConfig) -> Path:
    """Execute every stage and return the run directory."""
    out_root = Path(config.out)
    out_root.mkdir(parents=True, exist_ok=True)
    final = out_root / config.run_name
    work = Path(tempfile.mkdtemp(prefix=f".{config.run_name}-", dir=out_root))
    stage = "load"
    try:
        corpus = load_stage(config)
        if config.balance:
            stage = "balance"
            corpus = balanced_subset(corpus, config.seed)
        y = corpus.labels

        stage = "extract"
        families = {
            "static": static_matrix(corpus, config.turn_threshold),
            "dynamic": dynamic_matrix(corpus, config.channels),
        }

        stage = "select"
        sel = select_families(families, y, corpus.techniques, config.seed, config.prefilter_threshold,
                              config.k_values, config.max_combinations)
        (work / "selection.json").write_text(_dump_json(sel.to_dict()))

        stage = "project"
        everything = FeatureMatrix.stack(families.values())
        chosen = everything.select(sel.selected)
        model = fit_projection(chosen, y, config.seed, restarts=config.pilot_restarts,
                               max_iters=config.pilot_max_iters, grad_tol=config.pilot_grad_tol)
        space = build_instance_space(model, chosen, y)
        (work / "projection.json").write_text(_dump_json(model.to_dict()))
        (work / "instance_space.csv").write_text(space.to_csv())
        (work / "projection.txt").write_text(projection_table(model))

        if config.classifiers:
            stage = "train"
            split_seed = config.seed if config.split_seed is None else config.split_seed
            train_seed = config.seed if config.train_seed is None else config.train_seed
            report = compare_configurations(everything, y, sel.selected_static, sel.selected_dynamic,
                                            split_seed, train_seed, config.train_fraction)
            stage = "report"
            write_report(report, work)
        if config.plots:
            stage = "report"
            write_plots(space, work / "plots")

        (work / "config.json").write_text(_dump_json(config.to_dict() | {"run": config.run_name}))
        stage = "finalize"
        if final.exists():
            shutil.rmtree(final)
        os.replace(work, final)
    except BaseException as exc:
        shutil.rmtree(work, ignore_errors=True)
        if isinstance(exc, (KeyboardInterrupt, SystemExit)):
            raise
        raise StageError(stage, exc) from exc
    return final


def write_report(report: ClassifierReport, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.csv").write_text(report.to_csv())
    (out_dir / "report.txt").write_text(report.to_table())


def load_projection(path: str | Path, F: FeatureMatrix | None = None) -> ProjectionModel:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read projection {path}: {exc}") from None
    return ProjectionModel.from_dict(doc, F)


def load_instance_space(path: str | Path) -> InstanceSpace:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read instance space {path}: {exc}") from None
    return InstanceSpace.from_csv(text)


def labels_for(F: FeatureMatrix, corpus: Corpus) -> tuple[np.ndarray, list[str]]:
    """Outcome labels and technique tags aligned to ``F``'s instances."""
    by_id = {c.id: c for c in corpus}
    missing = [i for i in F.instance_ids if i not in by_id]
    if missing:
        raise DataError(f"no label for instance {missing[0]}")
    cases = [by_id[i] for i in F.instance_ids]
    return np.array([c.label for c in cases], dtype=int), [c.technique for c in cases]
