"""Point-laser altimeters: ray casting against ground and vehicle, and the drive-under trigger."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .se3 import rot_z
from .world import DECK_SIZE, TruckState, UAVState

DEFAULT_RAYS = ((0.0, np.pi / 2), (np.pi / 6, np.pi / 2), (-np.pi / 6, np.pi / 2))


@dataclass(frozen=True)
class LaserConfig:
    """Laser fan. Each ray is ``(tilt, azimuth)`` in the body frame.

    ``tilt`` is measured from body down, ``azimuth`` from body forward toward
    body right; the default fan is nadir plus +/-30 degrees in the lateral plane.
    Ray 0 is used as the height sensor.
    """

    rays: tuple = DEFAULT_RAYS
    max_range: float = 40.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        rays = tuple((float(t), float(a)) for t, a in self.rays)
        if not 1 <= len(rays) <= 8:
            raise ValueError("between 1 and 8 rays are supported")
        if not self.max_range > 0 or self.noise_sigma < 0:
            raise ValueError("max_range must be positive and noise_sigma non-negative")
        object.__setattr__(self, "rays", rays)

    def directions_body(self) -> np.ndarray:
        t = np.array([r[0] for r in self.rays])
        a = np.array([r[1] for r in self.rays])
        return np.column_stack([np.sin(t) * np.cos(a), np.sin(t) * np.sin(a), np.cos(t)])


@dataclass(frozen=True)
class TriggerConfig:
    drop_threshold: float = 1.0
    window: float = 0.2

    def __post_init__(self):
        if not (self.drop_threshold > 0 and self.window > 0):
            raise ValueError("drop_threshold and window must be positive")


def _ray_box(origin, direction, lo, hi) -> float:
    """Entry distance of a ray into an axis-aligned box, ``inf`` on a miss (slab method)."""
    t_near, t_far = -np.inf, np.inf
    for k in range(3):
        if abs(direction[k]) < 1e-12:
            if origin[k] < lo[k] or origin[k] > hi[k]:
                return np.inf
            continue
        t1 = (lo[k] - origin[k]) / direction[k]
        t2 = (hi[k] - origin[k]) / direction[k]
        t_near = max(t_near, min(t1, t2))
        t_far = min(t_far, max(t1, t2))
    if t_near > t_far or t_far < 0:
        return np.inf
    return max(t_near, 0.0)


def cast_ray(origin, direction, truck: TruckState | None) -> float:
    """First hit along a world-frame ray against the ground plane and the vehicle box."""
    hits = [np.inf]
    if direction[2] > 1e-12:
        hits.append(-origin[2] / direction[2])
    if truck is not None:
        R = rot_z(truck.heading)
        center = truck.deck_center
        o = R.T @ (np.asarray(origin) - center)
        d = R.T @ np.asarray(direction)
        half = DECK_SIZE / 2
        # box spans from the ground (z = +deck_height below the deck top) to the deck top
        hits.append(_ray_box(o, d, (-half, -half, 0.0), (half, half, truck.deck_height)))
    return float(min(hits))


def laser_measure(
    uav: UAVState,
    truck: TruckState | None,
    cfg: LaserConfig,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Range of every laser; ``cfg.max_range`` when nothing is hit within range."""
    dirs = cfg.directions_body() @ rot_z(uav.yaw).T
    out = np.empty(len(dirs))
    for i, d in enumerate(dirs):
        r = cast_ray(uav.position, d, truck)
        if r > cfg.max_range:
            out[i] = cfg.max_range
            continue
        if cfg.noise_sigma > 0:
            r += rng.normal(0.0, cfg.noise_sigma)
        out[i] = min(max(r, 0.0), cfg.max_range)
    return out


def lateral_coverage(altitude: float, deck_top_height: float, tilt: float) -> float:
    """Lateral distance of a tilted ray from nadir when it reaches the deck-top height."""
    if altitude <= deck_top_height:
        raise ValueError("altitude must be above the deck top")
    return (altitude - deck_top_height) * np.tan(tilt)


class TriggerDetector:
    """Fires when any ray's range falls by more than ``drop_threshold`` within ``window`` seconds.

    No-return readings (at or beyond ``max_range``) are ignored.
    """

    def __init__(self, cfg: TriggerConfig, max_range: float = np.inf):
        self.cfg = cfg
        self.max_range = max_range
        self._history: deque[tuple[float, np.ndarray]] = deque()

    def update(self, ranges, t: float) -> bool:
        r = np.asarray(ranges, dtype=float).copy()
        r[r >= self.max_range] = np.nan
        if self._history and t <= self._history[-1][0]:
            raise ValueError("trigger samples must have increasing time stamps")
        self._history.append((t, r))
        while self._history[0][0] < t - self.cfg.window - 1e-9:
            self._history.popleft()
        past = np.vstack([h[1] for h in self._history])
        if np.all(np.isnan(past)):
            return False
        peak = np.where(np.isnan(past), -np.inf, past).max(axis=0)
        with np.errstate(invalid="ignore"):
            drop = peak - r
        return bool(np.any(drop[np.isfinite(drop)] > self.cfg.drop_threshold))
