"""Descriptive-statistics (dynamic) features of telemetry channels.

Each channel contributes ``<channel>_min``, ``_max``, ``_mean`` and ``_std``
(population std), in that order, channels in the order requested.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .dataset import TestCase
from .errors import DataError

STATS = ("min", "max", "mean", "std")

# channels behind every dynamic feature name reported for SensoDat
REQUIRED_CHANNELS = ("steering", "steering_input", "altitude", "esc", "esc_active")


def channel_stats(samples) -> tuple[float, float, float, float]:
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise DataError("empty channel")
    lo, hi, mean = float(x.min()), float(x.max()), float(x.mean())
    # rounding can push the mean a hair outside [min, max] for near-constant data
    mean = min(max(mean, lo), hi)
    return lo, hi, mean, float(x.std())


def dynamic_feature_names(channels: Sequence[str]) -> list[str]:
    return [f"{c}_{s}" for c in channels for s in STATS]


def dynamic_vector(case: TestCase, channels: Sequence[str]) -> dict[str, float]:
    out: dict[str, float] = {}
    for name in channels:
        if name not in case.telemetry:
            raise DataError(f"missing channel {name} in case {case.id}")
        for stat, value in zip(STATS, channel_stats(case.telemetry[name])):
            out[f"{name}_{stat}"] = value
    return out
