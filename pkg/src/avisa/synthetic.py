"""Seeded synthetic corpora with a planted failure mechanism.

Roads are composed of straights and circular arcs.  A kinematic driver
script runs each road: speed relaxes towards the cruise speed on straights
and towards ``cruise / (1 + slowdown * |curvature|)`` in curves, but reacts
to curvature ``reaction_lag`` ticks late, so long straights followed by
sharp curves produce large lateral acceleration ``speed^2 * |curvature|``.
The outcome is Effective with probability
``sigmoid(alpha * max lateral acceleration - beta)``.

Each case also carries 20 pure-noise static attributes (``noise_s00`` ...)
and 20 pure-noise telemetry channels (``noise_c00`` ...), generated
independently of the outcome, to act as distractors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._rng import derive_rng
from .dataset import Corpus, Outcome, TestCase
from .errors import ArgumentError
from .static_features import preceding_straight_length, turn_angles

# outcome rule, calibrated once for a ~45% Effective rate at the default archetype mix
ALPHA = 1.0
BETA = 7.6

DEFAULT_STEP = 5.0
START_SPEED = 5.0
ACCEL_GAIN = 0.025
BRAKE_GAIN = 0.35
STEER_SMOOTHING = 0.6
LOAD_REFERENCE = 2.0           # m/s^2 of lateral load that doubles the steering jitter
JITTER_CURVATURE = 0.01        # 1/m of path wobble per unit of steering jitter
STEER_GAIN = 2.7 / 0.5        # steering units per 1/m of path curvature
MAX_IDLE_TICKS = 600

# per-case driver parameter ranges
CRUISE_RANGE = (12.0, 30.0)
SLOWDOWN_RANGE = (8.0, 25.0)
LAG_RANGE = (1, 3)
NOISE_RANGE = (0.01, 0.2)
ESC_THRESHOLD_RANGE = (4.0, 25.0)
ROLL_GAIN_RANGE = (0.001, 0.03)

TOTAL_LENGTH = (500.0, 900.0)
MIN_PADDING = 20.0

TECHNIQUES = ("gen_a", "gen_b", "gen_c")
ARCHETYPES = ("straight_heavy", "curve_heavy", "straight_then_sharp")
ARCHETYPE_WEIGHTS = (1 / 3, 1 / 3, 1 / 3)
N_NOISE_STATIC = 20
N_NOISE_CHANNELS = 20
NOISE_STATIC = tuple(f"noise_s{j:02d}" for j in range(N_NOISE_STATIC))
NOISE_CHANNELS = tuple(f"noise_c{j:02d}" for j in range(N_NOISE_CHANNELS))
DRIVE_CHANNELS = ("steering", "steering_input", "altitude", "esc", "esc_active", "speed")
CHANNELS = DRIVE_CHANNELS + NOISE_CHANNELS

# features that carry the planted signal, by construction
PLANTED_INFORMATIVE = ("max_angle", "speed_max", "steering_std", "preceding_straight_length")
DISTRACTORS = NOISE_STATIC + NOISE_CHANNELS


@dataclass(frozen=True)
class Straight:
    length: float

    def __post_init__(self):
        if not self.length > 0:
            raise ArgumentError("straight length must be positive")


@dataclass(frozen=True)
class Arc:
    radius: float
    sweep: float           # degrees, in (0, 180]
    direction: str = "left"

    def __post_init__(self):
        if not self.radius > 0:
            raise ArgumentError("arc radius must be positive")
        if not 0 < abs(self.sweep) <= 180:
            raise ArgumentError("arc sweep must be in (0, 180] degrees")
        if self.direction not in ("left", "right"):
            raise ArgumentError("arc direction must be 'left' or 'right'")

    @property
    def length(self) -> float:
        return self.radius * math.radians(abs(self.sweep))


RoadSpec = Sequence["Straight | Arc"]


@dataclass(frozen=True)
class DriverParams:
    cruise_speed: float = 25.0       # m/s
    curve_slowdown: float = 15.0     # metres: speed target is cruise / (1 + slowdown * |kappa|)
    reaction_lag: int = 2            # ticks
    noise_std: float = 0.01
    esc_lat_threshold: float = 9.0   # m/s^2
    roll_gain: float = 0.01          # altitude per unit lateral acceleration
    idle_ticks: int = 0              # stationary warm-up ticks recorded before the drive

    def __post_init__(self):
        if min(self.cruise_speed, self.curve_slowdown, self.noise_std, self.esc_lat_threshold,
               self.roll_gain) <= 0 or self.reaction_lag < 0 or self.idle_ticks < 0:
            raise ArgumentError("driver parameters must be positive (reaction_lag, idle_ticks >= 0)")


def render_road(spec: RoadSpec, step: float = DEFAULT_STEP) -> np.ndarray:
    """Sample the composed road every ``step`` metres, starting at the origin heading +x.

    The end point is always included.
    """
    if step <= 0:
        raise ArgumentError("step must be positive")
    segments = list(spec)
    if not segments:
        raise ArgumentError("road spec is empty")
    total = sum(s.length for s in segments)
    s_values = np.arange(0.0, total, step)
    if total - s_values[-1] > 1e-9 * max(1.0, total):
        s_values = np.append(s_values, total)

    points = np.empty((s_values.size, 2))
    x, y, heading, s0 = 0.0, 0.0, 0.0, 0.0
    j = 0
    for seg in segments:
        s1 = s0 + seg.length
        is_last = seg is segments[-1]
        while j < s_values.size and (s_values[j] < s1 or (is_last and s_values[j] <= s1 + 1e-9)):
            u = min(s_values[j] - s0, seg.length)
            if isinstance(seg, Straight):
                points[j] = (x + u * math.cos(heading), y + u * math.sin(heading))
            else:
                sgn = 1.0 if seg.direction == "left" else -1.0
                phi = sgn * u / seg.radius
                cx, cy = x - sgn * seg.radius * math.sin(heading), y + sgn * seg.radius * math.cos(heading)
                h = heading + phi
                points[j] = (cx + sgn * seg.radius * math.sin(h), cy - sgn * seg.radius * math.cos(h))
            j += 1
        if isinstance(seg, Straight):
            x, y = x + seg.length * math.cos(heading), y + seg.length * math.sin(heading)
        else:
            sgn = 1.0 if seg.direction == "left" else -1.0
            cx, cy = x - sgn * seg.radius * math.sin(heading), y + sgn * seg.radius * math.cos(heading)
            heading += sgn * math.radians(abs(seg.sweep))
            x, y = cx + sgn * seg.radius * math.sin(heading), cy - sgn * seg.radius * math.cos(heading)
        s0 = s1
    return points


def point_curvature(road) -> np.ndarray:
    """Signed curvature (1/m) at every road point; zero at the two ends."""
    road = np.asarray(road, dtype=float)
    kappa = np.zeros(road.shape[0])
    if road.shape[0] >= 3:
        seg = np.hypot(*np.diff(road, axis=0).T)
        kappa[1:-1] = np.radians(turn_angles(road)) / (0.5 * (seg[:-1] + seg[1:]))
    return kappa


def _lagged(a: np.ndarray, lag: int) -> np.ndarray:
    if lag == 0:
        return a.copy()
    return np.concatenate([np.zeros(min(lag, a.size)), a[:-lag]]) if lag < a.size else np.zeros_like(a)


def speed_profile(kappa: np.ndarray, params: DriverParams) -> np.ndarray:
    perceived = np.abs(_lagged(kappa, params.reaction_lag))
    target = params.cruise_speed / (1.0 + params.curve_slowdown * perceived)
    v = np.empty(kappa.size)
    v[0] = min(START_SPEED, params.cruise_speed)
    for k in range(1, kappa.size):
        gap = target[k - 1] - v[k - 1]
        v[k] = v[k - 1] + (ACCEL_GAIN if gap > 0 else BRAKE_GAIN) * gap
    return v


def effective_probability(max_lateral: float) -> float:
    z = ALPHA * max_lateral - BETA
    return 0.5 * (1.0 + math.tanh(0.5 * z))


def simulate_drive(road, params: DriverParams, seed: int) -> tuple[dict[str, np.ndarray], Outcome, float]:
    """Telemetry per tick, the outcome, and its probability.

    The drive has one tick per road point, preceded by ``idle_ticks``
    stationary ticks in which only sensor noise is recorded.
    """
    rng = derive_rng(seed, "drive")
    idle = np.zeros(params.idle_ticks)
    kappa = np.concatenate([idle, point_curvature(road)])
    v = np.concatenate([idle, speed_profile(kappa[idle.size:], params)])

    steer_cmd = np.clip(STEER_GAIN * _lagged(kappa, params.reaction_lag), -1.0, 1.0)
    # jitter grows with the lateral load of the road itself
    load = v**2 * np.abs(kappa)
    jitter = params.noise_std * (1.0 + load / LOAD_REFERENCE) * rng.standard_normal(kappa.size)
    steering_input = steer_cmd + jitter
    steering = np.empty_like(steering_input)
    acc = 0.0
    for k, u in enumerate(steering_input):
        acc = STEER_SMOOTHING * acc + (1.0 - STEER_SMOOTHING) * u
        steering[k] = acc
    # steering jitter wobbles the driven path a little on top of the road curvature
    driven = kappa + JITTER_CURVATURE * jitter
    lateral = v**2 * np.abs(driven)
    altitude = params.roll_gain * lateral + 0.002 * rng.standard_normal(kappa.size)
    esc_active = (lateral > params.esc_lat_threshold).astype(float)
    esc = np.maximum(lateral - params.esc_lat_threshold, 0.0) / params.esc_lat_threshold

    p = effective_probability(float(lateral.max()))
    outcome = Outcome.EFFECTIVE if rng.random() < p else Outcome.INEFFECTIVE
    channels = {
        "steering": steering,
        "steering_input": steering_input,
        "altitude": altitude,
        "esc": esc,
        "esc_active": esc_active,
        "speed": v,
    }
    return channels, outcome, p


def _u(rng, lo, hi) -> float:
    return float(rng.uniform(lo, hi))


# archetype -> radius range of the critical curve; see random_road_spec
CRITICAL_RADIUS = {
    "straight_heavy": (40.0, 90.0),
    "curve_heavy": (20.0, 70.0),
    "straight_then_sharp": (12.0, 40.0),
}
# the straight leading into the critical curve, shared by all archetypes
LEAD_STRAIGHT = (20.0, 400.0)


def random_road_spec(rng: np.random.Generator, archetype: str) -> list:
    """A random road of the given archetype.

    Every road starts with a straight leading into one critical left curve,
    whose sharpness range is set by the archetype.  What follows is
    archetype-specific too (gentle bends and long straights, or a mostly
    right-handed winding section), and a final straight pads the road to a
    total length drawn independently of the archetype.
    """
    if archetype not in CRITICAL_RADIUS:
        raise ArgumentError(f"unknown archetype {archetype}")

    def arc(r_lo, r_hi, s_lo, s_hi, direction):
        return Arc(_u(rng, r_lo, r_hi), _u(rng, s_lo, s_hi), direction)

    segs: list = [Straight(_u(rng, *LEAD_STRAIGHT)), arc(*CRITICAL_RADIUS[archetype], 60, 150, "left")]
    if archetype == "straight_heavy":
        for _ in range(int(rng.integers(0, 3))):
            segs += [Straight(_u(rng, 50, 150)), arc(100, 250, 10, 40, "right" if rng.random() < 0.5 else "left")]
    elif archetype == "curve_heavy":
        for _ in range(int(rng.integers(2, 6))):
            segs += [Straight(_u(rng, 5, 20)), arc(50, 90, 30, 100, "right" if rng.random() < 0.8 else "left")]
    length = sum(s.length for s in segs)
    segs.append(Straight(max(MIN_PADDING, _u(rng, *TOTAL_LENGTH) - length)))
    return segs


def random_driver(rng: np.random.Generator) -> DriverParams:
    return DriverParams(
        cruise_speed=_u(rng, *CRUISE_RANGE),
        curve_slowdown=_u(rng, *SLOWDOWN_RANGE),
        reaction_lag=int(rng.integers(LAG_RANGE[0], LAG_RANGE[1] + 1)),
        noise_std=_u(rng, *NOISE_RANGE),
        esc_lat_threshold=_u(rng, *ESC_THRESHOLD_RANGE),
        roll_gain=_u(rng, *ROLL_GAIN_RANGE),
        idle_ticks=int(rng.integers(0, MAX_IDLE_TICKS + 1)),
    )


def _noise_channel(rng: np.random.Generator, n_ticks: int) -> np.ndarray:
    level = rng.normal(0.0, 1.0)
    scale = math.exp(rng.normal(-1.0, 0.3))
    return level + scale * rng.standard_normal(n_ticks)


def generate_case(index: int, seed: int, step: float = DEFAULT_STEP) -> TestCase:
    rng = derive_rng(seed, "case", index)
    archetype = ARCHETYPES[int(rng.choice(len(ARCHETYPES), p=ARCHETYPE_WEIGHTS))]
    road = render_road(random_road_spec(rng, archetype), step)
    params = random_driver(rng)
    channels, outcome, _ = simulate_drive(road, params, int(rng.integers(2**63)))
    noise_rng = derive_rng(seed, "noise", index)
    for name in NOISE_CHANNELS:
        channels[name] = _noise_channel(noise_rng, channels["speed"].size)
    attributes = {name: float(noise_rng.standard_normal()) for name in NOISE_STATIC}
    attributes["preceding_straight_length"] = preceding_straight_length(road)
    return TestCase(f"case{index:05d}", TECHNIQUES[index % len(TECHNIQUES)], road, outcome, channels, attributes)


def generate_corpus(n: int, seed: int, step: float = DEFAULT_STEP) -> Corpus:
    if n < 50:
        raise ArgumentError("generate_corpus needs n >= 50")
    cases = tuple(generate_case(i, seed, step) for i in range(n))
    return Corpus(cases, f"synthetic corpus: n={n} seed={seed} step={step} alpha={ALPHA} beta={BETA}")
