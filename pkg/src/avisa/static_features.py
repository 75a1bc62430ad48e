"""Road-geometry (static) features computed from the road polyline alone.

Feature list (``STATIC_FEATURES``, version 1), in CSV column order:

================================  ===============================================
full_road_diversity               sum over curved runs of the area between the run
                                  and its chord (m^2)
max_angle / min_angle             extreme signed turn angles (deg, left positive)
std_angle / mean_angle            population std / mean of the turn angles
road_distance                     polyline length (m)
num_l_turns / num_r_turns         maximal runs of angles beyond +/- threshold
min/max/mean/std_segment_length   statistics of segment lengths (m)
max_curvature / mean_curvature    |angle| per metre at interior points (deg/m)
straight_length / curved_length   total length of segments not touching /
                                  touching a turning point (m)
num_direction_changes             left/right alternations between successive runs
displacement                      start-to-end distance (m)
sinuosity                         road_distance / displacement (0 for closed roads)
================================  ===============================================

A turning point is an interior point whose angle magnitude exceeds
``threshold_deg`` (5 degrees by default).  A curved run spans the turning
points of one run plus the points just before and after them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import TestCase

DEFAULT_TURN_THRESHOLD = 5.0

STATIC_FEATURES = (
    "full_road_diversity",
    "max_angle",
    "min_angle",
    "std_angle",
    "mean_angle",
    "road_distance",
    "num_l_turns",
    "num_r_turns",
    "min_segment_length",
    "max_segment_length",
    "mean_segment_length",
    "std_segment_length",
    "max_curvature",
    "mean_curvature",
    "straight_length",
    "curved_length",
    "num_direction_changes",
    "displacement",
    "sinuosity",
)


@dataclass(frozen=True)
class TurnRun:
    """Angles ``start..stop`` (inclusive, angle indices) all turning one way."""

    start: int
    stop: int
    direction: int  # +1 left, -1 right

    def road_points(self) -> slice:
        # angle j sits at road point j + 1
        return slice(self.start, self.stop + 3)


def _as_road(road) -> np.ndarray:
    arr = np.asarray(road, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("road must be an (m, 2) array of points")
    return arr


def turn_angles(road) -> np.ndarray:
    """Signed turn angle (degrees, in (-180, 180]) at each interior road point."""
    road = _as_road(road)
    if road.shape[0] < 3:
        return np.zeros(0)
    d = np.diff(road, axis=0)
    v1, v2 = d[:-1], d[1:]
    cross = v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0]
    dot = np.einsum("ij,ij->i", v1, v2)
    ang = np.degrees(np.arctan2(cross, dot))
    return np.where(ang <= -180.0, ang + 360.0, ang)


def segment_lengths(road) -> np.ndarray:
    d = np.diff(_as_road(road), axis=0)
    return np.hypot(d[:, 0], d[:, 1])


def road_distance(road) -> float:
    return float(segment_lengths(road).sum())


def angle_stats(angles) -> tuple[float, float, float]:
    """(max, min, population std) of the angles; zeros for an empty sequence."""
    a = np.asarray(angles, dtype=float)
    if a.size == 0:
        return 0.0, 0.0, 0.0
    return float(a.max()), float(a.min()), float(a.std())


def turn_runs(angles, threshold_deg: float = DEFAULT_TURN_THRESHOLD) -> list[TurnRun]:
    if threshold_deg <= 0:
        raise ValueError("threshold_deg must be positive")
    a = np.asarray(angles, dtype=float)
    sign = np.where(a > threshold_deg, 1, np.where(a < -threshold_deg, -1, 0))
    runs: list[TurnRun] = []
    j = 0
    while j < sign.size:
        if sign[j] == 0:
            j += 1
            continue
        k = j
        while k + 1 < sign.size and sign[k + 1] == sign[j]:
            k += 1
        runs.append(TurnRun(j, k, int(sign[j])))
        j = k + 1
    return runs


def turn_counts(angles, threshold_deg: float = DEFAULT_TURN_THRESHOLD) -> tuple[int, int]:
    """(left, right) turn counts; a maximal run of same-side turning angles is one turn."""
    runs = turn_runs(angles, threshold_deg)
    left = sum(1 for r in runs if r.direction > 0)
    return left, len(runs) - left


def shoelace_area(points) -> float:
    """Absolute area of the closed polygon through ``points``."""
    p = np.asarray(points, dtype=float)
    p = p - p[0]
    x, y = p[:, 0], p[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def full_road_diversity(road, threshold_deg: float = DEFAULT_TURN_THRESHOLD) -> float:
    """Sum over curved runs of the area enclosed by the run and its chord."""
    road = _as_road(road)
    runs = turn_runs(turn_angles(road), threshold_deg)
    return float(sum(shoelace_area(road[r.road_points()]) for r in runs))


def _curved_segments(n_segments: int, runs: list[TurnRun]) -> np.ndarray:
    curved = np.zeros(n_segments, dtype=bool)
    for r in runs:
        # turning points r.start+1 .. r.stop+1 touch segments r.start .. r.stop+1
        curved[r.start : r.stop + 2] = True
    return curved


def static_features(road, threshold_deg: float = DEFAULT_TURN_THRESHOLD) -> dict[str, float]:
    """All 19 static features of a road, keyed as in ``STATIC_FEATURES``."""
    road = _as_road(road)
    seg = segment_lengths(road)
    angles = turn_angles(road)
    runs = turn_runs(angles, threshold_deg)
    max_a, min_a, std_a = angle_stats(angles)
    left = sum(1 for r in runs if r.direction > 0)
    distance = float(seg.sum())
    displacement = float(np.hypot(*(road[-1] - road[0])))

    if angles.size:
        curvature = np.abs(angles) / (0.5 * (seg[:-1] + seg[1:]))
        max_k, mean_k = float(curvature.max()), float(curvature.mean())
    else:
        max_k = mean_k = 0.0
    curved = _curved_segments(seg.size, runs)
    changes = sum(1 for a, b in zip(runs, runs[1:]) if a.direction != b.direction)

    values = {
        "full_road_diversity": float(sum(shoelace_area(road[r.road_points()]) for r in runs)),
        "max_angle": max_a,
        "min_angle": min_a,
        "std_angle": std_a,
        "mean_angle": float(angles.mean()) if angles.size else 0.0,
        "road_distance": distance,
        "num_l_turns": float(left),
        "num_r_turns": float(len(runs) - left),
        "min_segment_length": float(seg.min()),
        "max_segment_length": float(seg.max()),
        "mean_segment_length": float(seg.mean()),
        "std_segment_length": float(seg.std()),
        "max_curvature": max_k,
        "mean_curvature": mean_k,
        "straight_length": float(seg[~curved].sum()),
        "curved_length": float(seg[curved].sum()),
        "num_direction_changes": float(changes),
        "displacement": displacement,
        "sinuosity": distance / displacement if displacement > 1e-9 * distance else 0.0,
    }
    return {name: values[name] for name in STATIC_FEATURES}


def static_vector(case: TestCase, threshold_deg: float = DEFAULT_TURN_THRESHOLD) -> dict[str, float]:
    return static_features(case.road, threshold_deg)


def preceding_straight_length(road, threshold_deg: float = DEFAULT_TURN_THRESHOLD) -> float:
    """Length of the straight stretch that leads into the sharpest bend.

    Points count as bending when ``|angle|`` exceeds
    ``min(threshold_deg, max|angle| / 4)``, so a bend gentler than the turn
    threshold is still told apart from the straight before it.  The bend
    is the bending run holding the largest ``|angle|`` (first on ties).  A
    perfectly straight road has no bend and scores 0.
    """
    road = _as_road(road)
    seg = segment_lengths(road)
    a = np.abs(turn_angles(road))
    if a.size == 0 or a.max() <= 1e-9:
        return 0.0
    cut = min(threshold_deg, 0.25 * float(a.max()))
    j = int(np.argmax(a))
    while j > 0 and a[j - 1] > cut:
        j -= 1
    s = j                       # segment ending at road point j + 1, where the bend starts
    total = seg[s]
    while s >= 1 and a[s - 1] <= cut:
        s -= 1
        total += seg[s]
    return float(total)
