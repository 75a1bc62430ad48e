"""Static road features on a few hand-built roads, and how they react to motion and mirroring.

    python3 demos/road_geometry.py
"""
import numpy as np

from avisa.static_features import STATIC_FEATURES, static_features


def road(lengths, turns_deg):
    heading = np.radians(np.concatenate([[0.0], np.cumsum(turns_deg)]))
    steps = np.column_stack([np.cos(heading), np.sin(heading)]) * np.asarray(lengths)[:, None]
    return np.vstack([[0.0, 0.0], np.cumsum(steps, axis=0)])


roads = {
    "straight": road([100.0], []),
    "left hairpin": road([40.0] + [5.0] * 18 + [40.0], [10.0] * 18 + [0.0]),
    "s-bend": road([30.0] + [5.0] * 12 + [30.0], [12.0] * 6 + [-12.0] * 6 + [0.0]),
}

width = max(len(n) for n in STATIC_FEATURES)
print(f"{'feature':<{width}}" + "".join(f"{name:>15}" for name in roads))
values = {name: static_features(r) for name, r in roads.items()}
for feat in STATIC_FEATURES:
    print(f"{feat:<{width}}" + "".join(f"{values[name][feat] + 0.0:>15.3f}" for name in roads))

r = roads["s-bend"]
t = np.radians(37.0)
R = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
moved = static_features(r @ R.T + [250.0, -80.0])
mirrored = static_features(roads["left hairpin"] * [1.0, -1.0])
print("\nmax change under rotation + shift:",
      max(abs(moved[f] - values["s-bend"][f]) for f in STATIC_FEATURES))
hairpin = values["left hairpin"]
print("mirroring the hairpin swaps (left, right) turns:", (hairpin["num_l_turns"], hairpin["num_r_turns"]),
      "->", (mirrored["num_l_turns"], mirrored["num_r_turns"]))
