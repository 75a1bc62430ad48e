"""Static report artefacts: SVG scatter plots of the instance space and text tables.

Plots are written as plain SVG text with fixed number formatting, so the
bytes depend only on the input.  Outcome mode colours Effective instances
blue and Ineffective ones orange.  Feature mode colours each instance by
its min-max normalised feature value on a linear RGB gradient from
``GRADIENT_LOW`` (0.0) to ``GRADIENT_HIGH`` (1.0).
"""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .errors import ArgumentError
from .pilot import InstanceSpace, ProjectionModel

EFFECTIVE_COLOR = "#1f77b4"    # blue
INEFFECTIVE_COLOR = "#ff7f0e"  # orange
GRADIENT_LOW = "#2c3e91"       # value 0.0
GRADIENT_HIGH = "#f2d024"      # value 1.0

WIDTH, HEIGHT = 640, 520
PLOT_LEFT, PLOT_TOP, PLOT_SIZE = 70, 40, 400
MARK_RADIUS = 3


def _rgb(hex_color: str) -> np.ndarray:
    return np.array([int(hex_color[i : i + 2], 16) for i in (1, 3, 5)], dtype=float)


def gradient_color(value: float) -> str:
    """Colour for a normalised value, clipped to [0, 1]."""
    t = min(max(float(value), 0.0), 1.0)
    rgb = np.rint((1.0 - t) * _rgb(GRADIENT_LOW) + t * _rgb(GRADIENT_HIGH)).astype(int)
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _scale(values: np.ndarray, lo: float, span: float, flip: bool) -> np.ndarray:
    frac = (values - lo) / span if span > 0 else np.full_like(values, 0.5)
    if flip:
        frac = 1.0 - frac
    return frac * PLOT_SIZE


def _axis_range(v: np.ndarray) -> tuple[float, float]:
    lo, hi = float(v.min()), float(v.max())
    pad = 0.05 * (hi - lo) if hi > lo else 1.0
    return lo - pad, (hi - lo) + 2 * pad


def render_instance_space(space: InstanceSpace, color_by: str = "outcome") -> str:
    """SVG scatter of the instances on (z1, z2), one ``<circle class="mark">`` each."""
    if len(space) == 0:
        raise ArgumentError("instance space is empty")
    if color_by == "outcome":
        colors = [EFFECTIVE_COLOR if lab == 1 else INEFFECTIVE_COLOR for lab in space.labels]
        title = "Instance space by outcome"
    else:
        values = space.feature(color_by)      # raises ArgumentError for unknown names
        colors = [gradient_color(v) for v in values]
        title = f"Instance space coloured by {color_by}"

    z = space.coordinates
    x0, xs = _axis_range(z[:, 0])
    y0, ys = _axis_range(z[:, 1])
    px = PLOT_LEFT + _scale(z[:, 0], x0, xs, flip=False)
    py = PLOT_TOP + _scale(z[:, 1], y0, ys, flip=True)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<title>{escape(title)}</title>',
        f'<rect x="{PLOT_LEFT}" y="{PLOT_TOP}" width="{PLOT_SIZE}" height="{PLOT_SIZE}" '
        'fill="white" stroke="black"/>',
        f'<text class="axis-label" x="{PLOT_LEFT + PLOT_SIZE / 2:.1f}" y="{PLOT_TOP + PLOT_SIZE + 40}" '
        'text-anchor="middle">z1</text>',
        f'<text class="axis-label" x="{PLOT_LEFT - 45}" y="{PLOT_TOP + PLOT_SIZE / 2:.1f}" '
        'text-anchor="middle">z2</text>',
    ]
    for value, anchor_x in ((x0, PLOT_LEFT), (x0 + xs, PLOT_LEFT + PLOT_SIZE)):
        out.append(f'<text class="tick" x="{anchor_x}" y="{PLOT_TOP + PLOT_SIZE + 18}" '
                   f'text-anchor="middle">{value:.2f}</text>')
    for value, anchor_y in ((y0, PLOT_TOP + PLOT_SIZE), (y0 + ys, PLOT_TOP)):
        out.append(f'<text class="tick" x="{PLOT_LEFT - 8}" y="{anchor_y}" text-anchor="end">{value:.2f}</text>')
    out.append('<g class="marks">')
    for x, y, c in zip(px, py, colors):
        out.append(f'<circle class="mark" cx="{x:.2f}" cy="{y:.2f}" r="{MARK_RADIUS}" fill="{c}" '
                   'fill-opacity="0.8"/>')
    out.append("</g>")
    out.extend(_legend(color_by))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _legend(color_by: str) -> list[str]:
    lx, ly = PLOT_LEFT + PLOT_SIZE + 25, PLOT_TOP + 10
    if color_by == "outcome":
        lines = ['<g class="legend">']
        for k, (name, color) in enumerate((("Effective", EFFECTIVE_COLOR), ("Ineffective", INEFFECTIVE_COLOR))):
            y = ly + 22 * k
            lines.append(f'<circle cx="{lx}" cy="{y}" r="5" fill="{color}"/>')
            lines.append(f'<text class="legend-label" x="{lx + 12}" y="{y + 4}">{name}</text>')
        lines.append("</g>")
        return lines
    bar_h = 200
    return [
        '<defs><linearGradient id="value-gradient" x1="0" y1="1" x2="0" y2="0">'
        f'<stop offset="0" stop-color="{GRADIENT_LOW}"/><stop offset="1" stop-color="{GRADIENT_HIGH}"/>'
        "</linearGradient></defs>",
        '<g class="legend">',
        f'<text class="legend-title" x="{lx}" y="{ly}">{escape(color_by)}</text>',
        f'<rect x="{lx}" y="{ly + 10}" width="16" height="{bar_h}" fill="url(#value-gradient)" stroke="black"/>',
        f'<text class="legend-label" x="{lx + 22}" y="{ly + 14}">1.0</text>',
        f'<text class="legend-label" x="{lx + 22}" y="{ly + 10 + bar_h}">0.0</text>',
        "</g>",
    ]


def projection_table(model: ProjectionModel) -> str:
    """Per-feature loadings on z1 and z2 (rows of ``A``), one line per feature."""
    width = max(12, max(len(n) for n in model.feature_names))
    lines = [f"{'feature':<{width}}  {'z1':>10}  {'z2':>10}"]
    for j, name in enumerate(model.feature_names):
        lines.append(f"{name:<{width}}  {model.A[0, j]:>10.4f}  {model.A[1, j]:>10.4f}")
    lines.append(f"objective {model.objective:.6g} (initial {model.initial_objective:.6g})")
    return "\n".join(lines) + "\n"


def write_plots(space: InstanceSpace, out_dir: str | Path) -> list[Path]:
    """Outcome plot plus one plot per feature; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    path = out_dir / "instance_space_outcome.svg"
    path.write_text(render_instance_space(space, "outcome"))
    written.append(path)
    for name in space.feature_names:
        path = out_dir / f"instance_space_{name}.svg"
        path.write_text(render_instance_space(space, name))
        written.append(path)
    return written
