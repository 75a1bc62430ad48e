import json
import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from avisa import cli
from avisa.dataset import save_corpus
from avisa.errors import ArgumentError
from avisa.learners import ClassifierReport, f1_score
from avisa.pilot import InstanceSpace
from avisa.pipeline import PipelineConfig, StageError, run_pipeline
from avisa.report import (EFFECTIVE_COLOR, INEFFECTIVE_COLOR, gradient_color, render_instance_space,
                          write_plots)
from avisa.synthetic import generate_corpus

SVG = "{http://www.w3.org/2000/svg}"


def space(n=2):
    rng = np.random.default_rng(0)
    feats = np.linspace(0, 1, n)[:, None]
    return InstanceSpace(tuple(f"i{k}" for k in range(n)), rng.normal(size=(n, 2)),
                         np.arange(n) % 2, ("f",), feats)


def marks(svg):
    root = ET.fromstring(svg)
    return [c for c in root.iter(SVG + "circle") if c.get("class") == "mark"]


def test_two_points_two_marks():
    assert len(marks(render_instance_space(space(2)))) == 2


def test_outcome_colors():
    m = marks(render_instance_space(space(4)))
    assert [c.get("fill") for c in m] == [INEFFECTIVE_COLOR, EFFECTIVE_COLOR] * 2
    assert EFFECTIVE_COLOR == "#1f77b4" and INEFFECTIVE_COLOR == "#ff7f0e"


def test_feature_legend_endpoints():
    svg = render_instance_space(space(5), "f")
    texts = [t.text for t in ET.fromstring(svg).iter(SVG + "text") if t.get("class") == "legend-label"]
    assert texts == ["1.0", "0.0"]
    fills = [c.get("fill") for c in marks(svg)]
    assert fills[0] == gradient_color(0.0) and fills[-1] == gradient_color(1.0)


def test_axis_labels():
    texts = [t.text for t in ET.fromstring(render_instance_space(space(3))).iter(SVG + "text")
             if t.get("class") == "axis-label"]
    assert texts == ["z1", "z2"]


def test_unknown_feature():
    with pytest.raises(ArgumentError):
        render_instance_space(space(3), "nope")


def test_empty_space():
    empty = InstanceSpace((), np.zeros((0, 2)), np.zeros(0, dtype=int), ("f",), np.zeros((0, 1)))
    with pytest.raises(ArgumentError):
        render_instance_space(empty)


def test_svg_deterministic(tmp_path):
    s = space(6)
    assert render_instance_space(s, "f") == render_instance_space(s, "f")
    paths = write_plots(s, tmp_path)
    assert [p.name for p in paths] == ["instance_space_outcome.svg", "instance_space_f.svg"]


def test_gradient_clipped():
    assert gradient_color(-1) == gradient_color(0) and gradient_color(2) == gradient_color(1)


# -- pipeline ----------------------------------------------------------------------

ARTIFACTS = ("config.json", "selection.json", "projection.json", "instance_space.csv", "report.csv",
             "report.txt", "plots/instance_space_outcome.svg")


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    code = cli.main(["run", "--n", "500", "--seed", "3", "--out", str(out)])
    assert code == 0
    (d,) = out.glob("run-*")
    return d


def test_run_artifacts(run_dir):
    for name in ARTIFACTS:
        assert (run_dir / name).is_file(), name
    cfg = json.loads((run_dir / "config.json").read_text())
    assert cfg["synth_n"] == 500 and cfg["seed"] == 3 and cfg["run"] == run_dir.name
    sel = json.loads((run_dir / "selection.json").read_text())
    assert set(sel["families"]) == {"static", "dynamic"}
    for fam in sel["families"].values():
        assert {"selected", "cv_error", "k", "silhouette", "combinations"} <= set(fam)
    proj = json.loads((run_dir / "projection.json").read_text())
    assert {"A", "B", "C", "objective", "standardization"} <= set(proj)
    assert len(proj["A"]) == 2 and len(proj["A"][0]) == len(sel["selected"])
    head = (run_dir / "instance_space.csv").read_text().splitlines()[0].split(",")
    assert head == ["id", "z1", "z2", "outcome"] + sel["selected"]
    svgs = list((run_dir / "plots").glob("*.svg"))
    assert len(svgs) == 1 + len(sel["selected"])


def test_report_csv_round_trip(run_dir):
    rep = ClassifierReport.from_csv((run_dir / "report.csv").read_text())
    assert len(rep.rows) == 15
    for r in rep.rows.values():
        assert r.f1 == pytest.approx(f1_score(r.precision, r.recall), abs=1e-15)


def test_run_name_is_config_hash():
    a = PipelineConfig(synth_n=500, seed=3, out="x")
    b = PipelineConfig(synth_n=500, seed=3, out="y")
    c = PipelineConfig(synth_n=501, seed=3)
    assert a.run_name == b.run_name != c.run_name
    assert re.fullmatch(r"run-[0-9a-f]{12}", a.run_name)
    assert PipelineConfig.from_dict(a.to_dict()) == a


def test_config_rejects_unknown_key():
    with pytest.raises(ArgumentError):
        PipelineConfig.from_dict({"bogus": 1})


def test_corrupt_corpus_stage_load(tmp_path, capsys):
    root = save_corpus(generate_corpus(50, 1), tmp_path / "c")
    (root / "roads" / "case00003.csv").write_text("x,y\n1,1\n")
    with pytest.raises(StageError) as info:
        run_pipeline(PipelineConfig(corpus=str(root), out=str(tmp_path / "out")))
    assert info.value.stage == "load" and info.value.exit_code == 3
    assert list((tmp_path / "out").iterdir()) == []
    assert cli.main(["run", "--corpus", str(root), "--out", str(tmp_path / "out")]) == 3
    assert "stage load" in capsys.readouterr().err


def test_stage_error_names_failing_stage(tmp_path):
    root = save_corpus(generate_corpus(60, 2), tmp_path / "c")
    cfg = PipelineConfig(corpus=str(root), channels=("steering", "missing"), balance=False, out=str(tmp_path / "o"))
    with pytest.raises(StageError) as info:
        run_pipeline(cfg)
    assert info.value.stage == "extract"
    assert list((tmp_path / "o").iterdir()) == []


# -- individual subcommands --------------------------------------------------------

@pytest.fixture(scope="module")
def staged(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert cli.main(["synth", "--n", "150", "--seed", "4", "--out", str(d / "corpus")]) == 0
    assert cli.main(["extract-static", str(d / "corpus"), "--out", str(d / "s.csv")]) == 0
    assert cli.main(["--seed", "4", "extract-dynamic", str(d / "corpus"), "--out", str(d / "d.csv")]) == 0
    return d


def _feat(d):
    return ["--static", str(d / "s.csv"), "--dynamic", str(d / "d.csv"), "--corpus", str(d / "corpus")]


def test_extract_static_columns(staged):
    from avisa.static_features import STATIC_FEATURES
    head = (staged / "s.csv").read_text().splitlines()[0].split(",")
    assert head[0] == "id" and tuple(head[1:20]) == STATIC_FEATURES
    assert cli.main(["extract-static", str(staged / "corpus"), "--no-attributes", "--out", str(staged / "s19.csv")]) == 0
    assert len((staged / "s19.csv").read_text().splitlines()[0].split(",")) == 20


def test_extract_dynamic_channels(staged):
    out = staged / "d2.csv"
    assert cli.main(["extract-dynamic", str(staged / "corpus"), "--channels", "steering,esc", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "id,steering_min,steering_max,steering_mean,steering_std,esc_min,esc_max,esc_mean,esc_std"


def test_select_project_train_predict_report(staged):
    d = staged
    assert cli.main(["isa", "select", *_feat(d), "--k-range", "2:4", "--max-combinations", "50",
                     "--out", str(d / "sel")]) == 0
    sel = json.loads((d / "sel" / "selection.json").read_text())
    for fam in sel["families"].values():
        assert 2 <= fam["k"] <= 4 or fam["clusters"] is None
    assert cli.main(["isa", "project", "--selection", str(d / "sel" / "selection.json"), *_feat(d),
                     "--restarts", "3", "--out", str(d / "proj")]) == 0
    assert (d / "proj" / "instance_space.csv").is_file()
    assert cli.main(["train", "--selection", str(d / "sel" / "selection.json"), *_feat(d),
                     "--out", str(d / "tr")]) == 0
    assert len(list((d / "tr" / "models").glob("*.json"))) == 15
    assert cli.main(["predict", "--model", str(d / "tr" / "models" / "NB_All.json"),
                     "--static", str(d / "s.csv"), "--dynamic", str(d / "d.csv"), "--out", str(d / "pred.csv")]) == 0
    lines = (d / "pred.csv").read_text().splitlines()
    assert lines[0] == "id,outcome" and len(lines) == 151
    assert {ln.split(",")[1] for ln in lines[1:]} <= {"effective", "ineffective"}
    assert cli.main(["report", "--instance-space", str(d / "proj" / "instance_space.csv"),
                     "--projection", str(d / "proj" / "projection.json"),
                     "--report", str(d / "tr" / "report.csv"), "--out", str(d / "rep")]) == 0
    assert (d / "rep" / "plots" / "instance_space_outcome.svg").is_file()
    assert (d / "rep" / "report.txt").read_text() == (d / "tr" / "report.txt").read_text()


def test_config_file_supplies_defaults(staged, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"prefilter_threshold": 0.2, "k_range": [2, 3], "max_combinations": 30, "seed": 4}))
    assert cli.main(["isa", "select", *_feat(staged), "--config", str(cfg), "--out", str(tmp_path / "sel")]) == 0
    sel = json.loads((tmp_path / "sel" / "selection.json").read_text())
    for fam in sel["families"].values():
        assert set(fam["silhouette"]) <= {"2", "3"}


def test_labels_csv(staged, tmp_path):
    from avisa.dataset import load_corpus
    corpus = load_corpus(staged / "corpus")
    labels = tmp_path / "labels.csv"
    labels.write_text("id,outcome,technique\n" + "".join(f"{c.id},{c.label},{c.technique}\n" for c in corpus))
    args = ["--static", str(staged / "s.csv"), "--labels", str(labels), "--k-range", "2:3",
            "--max-combinations", "20"]
    assert cli.main(["isa", "select", *args, "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["isa", "select", "--static", str(staged / "s.csv"), "--corpus", str(staged / "corpus"),
                     "--k-range", "2:3", "--max-combinations", "20", "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "selection.json").read_text() == (tmp_path / "b" / "selection.json").read_text()


@pytest.mark.parametrize("argv, code", [
    (["bogus"], 2),
    (["synth", "--n", "notanint"], 2),
    (["synth", "--n", "10", "--out", "x"], 2),
    (["isa", "select", "--out", "x"], 2),
    (["extract-static", "/nonexistent/corpus"], 3),
    (["run", "--config", "/nonexistent.json"], 2),
])
def test_exit_codes(argv, code, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert cli.main(argv) == code


def test_convergence_exit_code(monkeypatch, staged, tmp_path):
    from avisa import pilot
    from avisa.errors import ConvergenceError

    def fail(*a, **k):
        raise ConvergenceError("pilot failed to converge")
    monkeypatch.setattr(cli, "fit_projection", fail)
    assert cli.main(["isa", "select", *_feat(staged), "--k-range", "2:3", "--max-combinations", "10",
                     "--out", str(tmp_path / "s")]) == 0
    assert cli.main(["isa", "project", "--selection", str(tmp_path / "s" / "selection.json"), *_feat(staged),
                     "--out", str(tmp_path / "p")]) == 4


def test_global_flags_either_position(staged, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["--out", str(a), "extract-static", str(staged / "corpus")]) == 0
    assert cli.main(["extract-static", str(staged / "corpus"), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
