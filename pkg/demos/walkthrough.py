"""Walk through the analysis on a small synthetic corpus, one stage at a time.

    python3 demos/walkthrough.py [n] [out_dir]
"""
import sys
from pathlib import Path

from avisa import synthetic
from avisa.dataset import balanced_subset
from avisa.features import FeatureMatrix, dynamic_matrix, static_matrix
from avisa.learners import compare_configurations
from avisa.pilot import build_instance_space, fit_projection
from avisa.pipeline import select_families
from avisa.report import projection_table, write_plots

n = int(sys.argv[1]) if len(sys.argv) > 1 else 600
out = Path(sys.argv[2] if len(sys.argv) > 2 else "demo_out")

corpus = balanced_subset(synthetic.generate_corpus(n, 42), 42)
print(f"{len(corpus)} balanced cases, techniques {sorted(set(corpus.techniques))}")

families = {"static": static_matrix(corpus), "dynamic": dynamic_matrix(corpus)}
for name, F in families.items():
    print(f"{name}: {F.n_features} candidate features")

sel = select_families(families, corpus.labels, corpus.techniques, seed=42, max_combinations=2000)
for name, res in sel.results.items():
    print(f"{name} selection (k={res.k}, cv error {res.cv_error:.3f}): {', '.join(res.selected)}")
print("planted features recovered:", sorted(set(synthetic.PLANTED_INFORMATIVE) & set(sel.selected)))

everything = FeatureMatrix.stack(families.values())
chosen = everything.select(sel.selected)
model = fit_projection(chosen, corpus.labels, seed=42, restarts=10)
print(projection_table(model))

space = build_instance_space(model, chosen, corpus.labels)
paths = write_plots(space, out)
print(f"wrote {len(paths)} plots to {out}/")

report = compare_configurations(everything, corpus.labels, sel.selected_static, sel.selected_dynamic, 42, 42)
print(report.to_table())
