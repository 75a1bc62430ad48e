"""Command-line entry point: instance space analysis of simulation-based test cases.

Global flags ``--seed``, ``--config`` and ``--out`` are accepted before or
after the subcommand.  A ``--config`` JSON file supplies defaults: for
``run`` it is a full pipeline configuration, for the other subcommands any
matching key (``seed``, ``prefilter_threshold``, ``k_range`` and so on)
fills a flag that was not given on the command line.

Exit codes: 0 success, 2 argument error, 3 data error, 4 convergence failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import synthetic
from .dataset import Outcome, load_corpus, save_corpus, split_indices
from .errors import ArgumentError, AvisaError, DataError
from .features import FeatureMatrix, dynamic_matrix, static_matrix
from .learners import (CONFIGURATIONS, ClassifierReport, ModelKind, compare_configurations, load_model,
                       predict, save_model, train)
from .pilot import build_instance_space, fit_projection
from .pipeline import (FamilySelection, PipelineConfig, labels_for, load_instance_space, load_projection,
                       run_pipeline, select_families, write_report)
from .report import projection_table, write_plots
from .static_features import DEFAULT_TURN_THRESHOLD
from ._rng import derive_int

logger = logging.getLogger("avisa")

# flag dest -> config key
CONFIG_KEYS = {
    "seed": "seed",
    "threshold": "prefilter_threshold",
    "max_combinations": "max_combinations",
    "k_range": "k_range",
    "channels": "channels",
    "turn_threshold": "turn_threshold",
    "restarts": "pilot_restarts",
    "max_iters": "pilot_max_iters",
    "grad_tol": "pilot_grad_tol",
    "train_fraction": "train_fraction",
    "n": "synth_n",
}

DEFAULTS = {
    "seed": 42,
    "threshold": 0.3,
    "max_combinations": 10_000,
    "k_range": None,
    "channels": None,
    "turn_threshold": DEFAULT_TURN_THRESHOLD,
    "restarts": 30,
    "max_iters": 1000,
    "grad_tol": 1e-6,
    "train_fraction": 0.8,
    "n": 2000,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ArgumentError(message)


def _k_range(text: str) -> list[int]:
    parts = text.replace(":", ",").split(",")
    try:
        lo, hi = (int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError("k-range must look like 2:8") from None
    return [lo, hi]


def _channels(text: str) -> list[str]:
    return [c.strip() for c in text.split(",") if c.strip()]


def _global_flags(top: bool) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    default = None if top else argparse.SUPPRESS
    p.add_argument("--seed", type=int, default=default, help="master seed (default 42)")
    p.add_argument("--config", default=default, help="JSON file of default settings")
    p.add_argument("--out", default=default, help="output path")
    return p


def _labels_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--corpus", help="corpus directory supplying outcomes and techniques")
    p.add_argument("--labels", help="CSV id,outcome[,technique] (outcome: effective/ineffective or 1/0)")


def _feature_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--static", help="static feature CSV")
    p.add_argument("--dynamic", help="dynamic feature CSV")


def build_parser() -> argparse.ArgumentParser:
    glob = _global_flags(top=False)
    parser = _Parser(prog="avisa", description=__doc__.splitlines()[0], parents=[_global_flags(top=True)])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", parents=[glob], help="generate a synthetic corpus")
    p.add_argument("--n", type=int)

    for name, help_text in (("extract-static", "road geometry features"),
                            ("extract-dynamic", "telemetry channel statistics")):
        p = sub.add_parser(name, parents=[glob], help=help_text)
        p.add_argument("corpus", help="corpus directory")
        if name == "extract-static":
            p.add_argument("--turn-threshold", dest="turn_threshold", type=float)
            p.add_argument("--no-attributes", action="store_true", help="drop per-case attribute columns")
        else:
            p.add_argument("--channels", type=_channels, help="comma-separated channel list")

    isa = sub.add_parser("isa", help="feature selection and projection")
    isa_sub = isa.add_subparsers(dest="isa_command", required=True, parser_class=_Parser)
    p = isa_sub.add_parser("select", parents=[glob], help="prefilter, cluster and select features")
    _feature_flags(p)
    _labels_flags(p)
    p.add_argument("--threshold", type=float)
    p.add_argument("--max-combinations", dest="max_combinations", type=int)
    p.add_argument("--k-range", dest="k_range", type=_k_range)
    p = isa_sub.add_parser("project", parents=[glob], help="fit the 2D projection")
    p.add_argument("--selection", required=True)
    _feature_flags(p)
    _labels_flags(p)
    p.add_argument("--restarts", type=int)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--grad-tol", dest="grad_tol", type=float)

    p = sub.add_parser("train", parents=[glob], help="train and compare all classifiers")
    p.add_argument("--selection", required=True)
    _feature_flags(p)
    _labels_flags(p)
    p.add_argument("--train-fraction", dest="train_fraction", type=float)

    p = sub.add_parser("predict", parents=[glob], help="predict outcomes with a saved model")
    p.add_argument("--model", required=True)
    _feature_flags(p)

    p = sub.add_parser("report", parents=[glob], help="plots and tables from earlier outputs")
    p.add_argument("--instance-space", dest="instance_space")
    p.add_argument("--projection")
    p.add_argument("--report")

    p = sub.add_parser("run", parents=[glob], help="full pipeline")
    p.add_argument("--corpus", help="corpus directory (omit to synthesise)")
    p.add_argument("--n", type=int, help="synthetic corpus size")
    p.add_argument("--synth-seed", dest="synth_seed", type=int)
    p.add_argument("--no-classifiers", dest="classifiers", action="store_false", default=None)
    p.add_argument("--no-plots", dest="plots", action="store_false", default=None)
    return parser


def _read_config(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ArgumentError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ArgumentError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ArgumentError("config must be a JSON object")
    return doc


def _fill(args: argparse.Namespace, config: dict[str, Any]) -> None:
    for dest, default in DEFAULTS.items():
        if getattr(args, dest, None) is None and (hasattr(args, dest) or dest == "seed"):
            setattr(args, dest, config.get(CONFIG_KEYS[dest], default))


def _require_out(args, what: str) -> Path:
    if not args.out:
        raise ArgumentError(f"--out {what} is required")
    return Path(args.out)


def _read_labels(args, F: FeatureMatrix) -> tuple[np.ndarray, list[str]]:
    if args.corpus:
        return labels_for(F, load_corpus(args.corpus))
    if not args.labels:
        raise ArgumentError("one of --corpus or --labels is required")
    try:
        with open(args.labels, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise DataError(f"cannot read labels {args.labels}: {exc}") from None
    table = {}
    for r in rows:
        if "id" not in r or "outcome" not in r:
            raise DataError("labels CSV needs id and outcome columns")
        text = r["outcome"].strip().lower()
        if text in ("1", "0"):
            label = int(text)
        else:
            try:
                label = Outcome(text).label
            except ValueError:
                raise DataError(f"bad outcome {r['outcome']!r} for {r['id']}") from None
        table[r["id"]] = (label, r.get("technique") or "all")
    missing = [i for i in F.instance_ids if i not in table]
    if missing:
        raise DataError(f"no label for instance {missing[0]}")
    return (np.array([table[i][0] for i in F.instance_ids], dtype=int),
            [table[i][1] for i in F.instance_ids])


def _read_families(args) -> dict[str, FeatureMatrix]:
    fams = {}
    for fam in ("static", "dynamic"):
        path = getattr(args, fam, None)
        if path:
            try:
                fams[fam] = FeatureMatrix.from_csv(path)
            except OSError as exc:
                raise DataError(f"cannot read {path}: {exc}") from None
    if not fams:
        raise ArgumentError("at least one of --static or --dynamic is required")
    ids = [F.instance_ids for F in fams.values()]
    if len(fams) == 2 and ids[0] != ids[1]:
        fams["dynamic"] = fams["dynamic"].take(ids[0])
    return fams


def _read_selection(path: str) -> dict[str, list[str]]:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read selection {path}: {exc}") from None
    return FamilySelection.selected_from_dict(doc)


def _dump(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# -- subcommands -------------------------------------------------------------------

def cmd_synth(args) -> None:
    out = _require_out(args, "<dir>")
    corpus = synthetic.generate_corpus(args.n, args.seed)
    save_corpus(corpus, out)
    print(f"wrote {len(corpus)} cases to {out}")


def cmd_extract(args) -> None:
    corpus = load_corpus(args.corpus)
    if args.command == "extract-static":
        F = static_matrix(corpus, args.turn_threshold, include_attributes=not args.no_attributes)
    else:
        F = dynamic_matrix(corpus, args.channels)
    text = F.to_csv()
    if args.out:
        _write_text(Path(args.out), text)
    else:
        sys.stdout.write(text)


def cmd_isa_select(args) -> None:
    out = _require_out(args, "<dir>")
    fams = _read_families(args)
    y, tech = _read_labels(args, next(iter(fams.values())))
    k_range = None if args.k_range is None else range(args.k_range[0], args.k_range[1] + 1)
    sel = select_families(fams, y, tech, args.seed, args.threshold, k_range, args.max_combinations)
    _write_text(out / "selection.json", _dump(sel.to_dict()))
    print("selected: " + ", ".join(sel.selected))


def _selected_matrix(args) -> tuple[FeatureMatrix, dict[str, list[str]], FeatureMatrix]:
    chosen = _read_selection(args.selection)
    fams = _read_families(args)
    everything = FeatureMatrix.stack(fams.values())
    names = [n for fam in ("static", "dynamic") for n in chosen.get(fam, [])]
    missing = [n for n in names if n not in everything.names]
    if missing:
        raise DataError(f"selected feature {missing[0]} is not in the supplied feature CSVs")
    return everything.select(list(dict.fromkeys(names))), chosen, everything


def cmd_isa_project(args) -> None:
    out = _require_out(args, "<dir>")
    M, _, _ = _selected_matrix(args)
    y, _ = _read_labels(args, M)
    model = fit_projection(M, y, args.seed, restarts=args.restarts, max_iters=args.max_iters,
                           grad_tol=args.grad_tol)
    space = build_instance_space(model, M, y)
    _write_text(out / "projection.json", _dump(model.to_dict()))
    _write_text(out / "instance_space.csv", space.to_csv())
    print(f"objective {model.objective:.6g}")


def cmd_train(args) -> None:
    out = _require_out(args, "<dir>")
    _, chosen, everything = _selected_matrix(args)
    y, _ = _read_labels(args, everything)
    st, dy = chosen.get("static", []), chosen.get("dynamic", [])
    report = compare_configurations(everything, y, st, dy, args.seed, args.seed, args.train_fraction)
    write_report(report, out)
    # persist the fitted models on the same split the report used
    train_idx, _ = split_indices(everything.n_instances, args.train_fraction, args.seed)
    train_ids = [everything.instance_ids[i] for i in train_idx]
    configs = {"Dynamic": dy, "Static": st, "All": list(dict.fromkeys(st + dy))}
    (out / "models").mkdir(parents=True, exist_ok=True)
    for kind in ModelKind:
        for cfg in CONFIGURATIONS:
            M = everything.select(configs[cfg]).take(train_ids)
            model = train(kind, M, y[train_idx], derive_int(args.seed, kind.value, cfg))
            save_model(model, out / "models" / f"{kind.value}_{cfg}.json")
    sys.stdout.write(report.to_table())


def cmd_predict(args) -> None:
    try:
        model = load_model(args.model)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise DataError(f"cannot read model {args.model}: {exc}") from None
    F = FeatureMatrix.stack(_read_families(args).values())
    missing = [n for n in model.feature_names if n not in F.names]
    if missing:
        raise DataError(f"model feature {missing[0]} is not in the supplied feature CSVs")
    outcomes = predict(model, F.select(model.feature_names))
    text = "id,outcome\n" + "".join(f"{i},{o.value}\n" for i, o in zip(F.instance_ids, outcomes))
    if args.out:
        _write_text(Path(args.out), text)
    else:
        sys.stdout.write(text)


def cmd_report(args) -> None:
    out = _require_out(args, "<dir>")
    if not (args.instance_space or args.report or args.projection):
        raise ArgumentError("nothing to report: give --instance-space, --projection or --report")
    if args.instance_space:
        write_plots(load_instance_space(args.instance_space), out / "plots")
    if args.projection:
        _write_text(out / "projection.txt", projection_table(load_projection(args.projection)))
    if args.report:
        try:
            report = ClassifierReport.from_csv(Path(args.report).read_text())
        except OSError as exc:
            raise DataError(f"cannot read report {args.report}: {exc}") from None
        except (KeyError, ValueError) as exc:
            raise DataError(f"malformed report {args.report}: {exc}") from None
        write_report(report, out)
    print(f"wrote report to {out}")


def cmd_run(args, config: dict[str, Any]) -> None:
    merged = dict(config)
    overrides = {"seed": args.seed, "corpus": args.corpus, "synth_n": args.n, "synth_seed": args.synth_seed,
                 "classifiers": args.classifiers, "plots": args.plots, "out": args.out}
    merged.update({k: v for k, v in overrides.items() if v is not None})
    cfg = PipelineConfig.from_dict(merged)
    print(run_pipeline(cfg))


def main(argv: Sequence[str] | None = None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        config = _read_config(args.config)
        if args.command == "run":
            cmd_run(args, config)
            return 0
        _fill(args, config)
        if args.out is None and "out" in config:
            args.out = config["out"]
        if args.command == "synth":
            cmd_synth(args)
        elif args.command.startswith("extract"):
            cmd_extract(args)
        elif args.command == "isa":
            (cmd_isa_select if args.isa_command == "select" else cmd_isa_project)(args)
        elif args.command == "train":
            cmd_train(args)
        elif args.command == "predict":
            cmd_predict(args)
        elif args.command == "report":
            cmd_report(args)
    except AvisaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
