# l1mpc/services/trajectory_service.py
import logging
import math
from typing import Callable, Dict, List, Optional

import numpy as np

from l1mpc.exceptions import ConfigurationError
from l1mpc.models.bench import Trajectory
from l1mpc.schemas.bench import TrajectoryParams

logger = logging.getLogger(__name__)

TRAJECTORY_NAMES = {
    1: "line",
    2: "circle",
    3: "figure_eight",
    4: "spiral",
    5: "rounded_square",
}

DESCRIPTIONS = {
    1: "3D straight line from the hover point with a quintic time scaling",
    2: "horizontal circle",
    3: "horizontal figure-eight (2:1 lissajous)",
    4: "3D spiral with an altitude ramp",
    5: "square path with rounded corners (squircle)",
}


def _smoothstep(x: np.ndarray) -> np.ndarray:
    """Quintic 10x³ - 15x⁴ + 6x⁵; zero first and second derivative at 0 and 1."""
    x = np.clip(x, 0.0, 1.0)
    return x ** 3 * (10.0 + x * (-15.0 + 6.0 * x))


def _smoothstep_integral(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, 1.0)
    return x ** 4 * (2.5 + x * (-3.0 + x))


def _phase(t: np.ndarray, rate: float, ramp: float, total_phase: float) -> np.ndarray:
    """
    Phase of a closed curve: the rate rises from 0 to `rate` over `ramp`
    seconds, stays constant, then falls back to 0 so the curve ends at rest
    after exactly `total_phase` radians.
    """
    motion = total_phase / rate + ramp
    phase = np.empty_like(t)
    up = t < ramp
    down = t > motion - ramp
    middle = ~(up | down)
    phase[up] = rate * ramp * _smoothstep_integral(t[up] / ramp)
    phase[middle] = rate * ramp / 2.0 + rate * (t[middle] - ramp)
    phase[down] = total_phase - rate * ramp * _smoothstep_integral((motion - t[down]) / ramp)
    return phase


def _closed_curve(
    params: TrajectoryParams,
    period: float,
    laps: int,
    shape: Callable[[np.ndarray], np.ndarray],
):
    """Returns (motion duration, offset function of motion time) for a curve shape(φ)."""
    if laps * period < params.ramp_duration:
        raise ConfigurationError(
            f"lap time {laps * period} s is shorter than the ramp {params.ramp_duration} s"
        )
    rate = 2.0 * math.pi / period
    total = 2.0 * math.pi * laps
    origin = shape(np.zeros(1))[0]

    def offset(t):
        return shape(_phase(t, rate, params.ramp_duration, total)) - origin

    return laps * period + params.ramp_duration, offset


def _line(params: TrajectoryParams):
    start = np.asarray(params.hover_point)
    delta = np.asarray(params.line.end) - start
    duration = params.line.duration

    def offset(t):
        return _smoothstep(t / duration)[:, None] * delta

    return duration, offset


def _circle(params: TrajectoryParams):
    p = params.circle

    def shape(phi):
        return np.column_stack([p.radius * np.cos(phi), p.radius * np.sin(phi), np.zeros_like(phi)])

    return _closed_curve(params, p.period, p.laps, shape)


def _lissajous(params: TrajectoryParams):
    p = params.lissajous

    def shape(phi):
        return np.column_stack(
            [p.amplitude_x * np.sin(phi), p.amplitude_y * np.sin(2.0 * phi), np.zeros_like(phi)]
        )

    return _closed_curve(params, p.period, p.laps, shape)


def _spiral(params: TrajectoryParams):
    p = params.spiral
    total = 2.0 * math.pi * p.laps

    def shape(phi):
        return np.column_stack(
            [p.radius * np.cos(phi), p.radius * np.sin(phi), p.climb * phi / total]
        )

    return _closed_curve(params, p.period, p.laps, shape)


def _squircle(params: TrajectoryParams):
    p = params.squircle

    def shape(phi):
        radius = p.radius * (4.0 / (3.0 + np.cos(4.0 * phi))) ** 0.25
        return np.column_stack([radius * np.cos(phi), radius * np.sin(phi), np.zeros_like(phi)])

    return _closed_curve(params, p.period, p.laps, shape)


BUILDERS = {1: _line, 2: _circle, 3: _lissajous, 4: _spiral, 5: _squircle}


def make_trajectory(trajectory_id: int, params: Optional[TrajectoryParams] = None) -> Trajectory:
    """
    Hover at the start point for hover_duration, run the shape, then hold
    the final waypoint for hold_duration. Raises ConfigurationError when the
    sampled speed exceeds params.max_speed.
    """
    params = params or TrajectoryParams()
    if trajectory_id not in BUILDERS:
        raise ConfigurationError(f"unknown trajectory id {trajectory_id}, expected 1..5")
    motion, offset = BUILDERS[trajectory_id](params)

    ts = params.sample_period
    hover_samples = int(round(params.hover_duration / ts))
    total = params.hover_duration + motion + params.hold_duration
    n = int(round(total / ts)) + 1
    t = np.arange(n) * ts
    tau = np.clip(t - hover_samples * ts, 0.0, motion)
    positions = np.asarray(params.hover_point, dtype=float) + offset(tau)
    positions[: hover_samples + 1] = params.hover_point
    velocities = np.gradient(positions, ts, axis=0)

    trajectory = Trajectory(
        id=trajectory_id,
        name=TRAJECTORY_NAMES[trajectory_id],
        sample_period=ts,
        positions=positions,
        velocities=velocities,
        hover_samples=hover_samples,
    )
    if trajectory.max_speed > params.max_speed:
        raise ConfigurationError(
            f"trajectory {trajectory_id} peaks at {trajectory.max_speed:.3f} m/s, "
            f"above the {params.max_speed} m/s limit"
        )
    logger.debug(
        f"trajectory {trajectory_id} ({trajectory.name}): {n} samples, "
        f"max speed {trajectory.max_speed:.3f} m/s"
    )
    return trajectory


def list_trajectories(params: Optional[TrajectoryParams] = None) -> List[Dict]:
    params = params or TrajectoryParams()
    listing = []
    for trajectory_id in sorted(BUILDERS):
        trajectory = make_trajectory(trajectory_id, params)
        listing.append(
            {
                "id": trajectory_id,
                "name": trajectory.name,
                "description": DESCRIPTIONS[trajectory_id],
                "duration": round(trajectory.duration, 9),
                "samples": len(trajectory),
                "max_speed": round(trajectory.max_speed, 6),
            }
        )
    return listing
