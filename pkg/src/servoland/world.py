"""Fixed-step kinematic world: quadrotor with first-order velocity lag, gimbal, ground vehicle."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .ibvs import CommandVelocity
from .se3 import RigidTransform, rot_z, rotation_from_gimbal

DECK_HEIGHT = 1.5
DECK_SIZE = 1.5


@dataclass(frozen=True)
class SimParams:
    dt: float = 1.0 / 150.0
    uav_lag_tau: float = 0.5
    max_horiz_speed: float = 8.33
    max_vert_speed: float = 4.0
    max_yaw_rate: float = 1.0
    gimbal_rate_limit: float = 2.0
    gimbal_pitch_min: float = -np.pi / 2
    gimbal_pitch_max: float = np.pi / 6
    truck_speed_noise_sigma: float = 0.0
    camera_rate: float = 30.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.uav_lag_tau < 0:
            raise ValueError("uav_lag_tau must be non-negative")
        limits = (self.max_horiz_speed, self.max_vert_speed, self.max_yaw_rate,
                  self.gimbal_rate_limit, self.camera_rate)
        if min(limits) <= 0:
            raise ValueError("limits and rates must be positive")
        if self.truck_speed_noise_sigma < 0:
            raise ValueError("truck_speed_noise_sigma must be non-negative")
        if self.gimbal_pitch_min >= self.gimbal_pitch_max:
            raise ValueError("gimbal pitch range is empty")

    @property
    def steps_per_frame(self) -> int:
        """Physics steps per camera/controller tick."""
        n = round(1.0 / (self.camera_rate * self.dt))
        return max(1, n)


@dataclass(frozen=True)
class UAVState:
    position: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -4.0]))
    yaw: float = 0.0
    velocity: CommandVelocity = CommandVelocity()
    gimbal_pitch: float = -np.pi / 4
    gimbal_yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))

    @property
    def altitude(self) -> float:
        return -float(self.position[2])

    @property
    def pose(self) -> RigidTransform:
        return RigidTransform._unchecked(rot_z(self.yaw), self.position)

    @property
    def world_velocity(self) -> np.ndarray:
        return rot_z(self.yaw) @ self.velocity.linear


@dataclass(frozen=True)
class TruckState:
    path_origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    path_direction: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    distance_along: float = 0.0
    speed: float = 4.17
    deck_height: float = DECK_HEIGHT

    def __post_init__(self):
        d = np.asarray(self.path_direction, dtype=float).reshape(3)
        if abs(d[2]) > 1e-12 or abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError("path_direction must be a horizontal unit vector")
        object.__setattr__(self, "path_direction", d)
        object.__setattr__(self, "path_origin", np.asarray(self.path_origin, dtype=float).reshape(3))

    @property
    def heading(self) -> float:
        return float(np.arctan2(self.path_direction[1], self.path_direction[0]))

    @property
    def deck_center(self) -> np.ndarray:
        """Center of the deck top surface (NED)."""
        p = self.path_origin + self.distance_along * self.path_direction
        return p - np.array([0.0, 0.0, self.deck_height])

    @property
    def deck_pose(self) -> RigidTransform:
        return RigidTransform._unchecked(rot_z(self.heading), self.deck_center)

    @property
    def velocity(self) -> np.ndarray:
        return self.speed * self.path_direction


def _clamp(value: float, limit: float) -> float:
    return min(max(value, -limit), limit)


def saturate(cmd: CommandVelocity, params: SimParams) -> CommandVelocity:
    vx, vy, vz, om = (float(c) for c in cmd.as_array())
    h = math.hypot(vx, vy)
    if h > params.max_horiz_speed:
        vx, vy = vx * params.max_horiz_speed / h, vy * params.max_horiz_speed / h
    return CommandVelocity(
        vx, vy, _clamp(vz, params.max_vert_speed), _clamp(om, params.max_yaw_rate)
    )


def step_uav(state: UAVState, cmd: CommandVelocity, params: SimParams) -> UAVState:
    target = saturate(cmd, params).as_array()
    v = state.velocity.as_array()
    if params.uav_lag_tau == 0:
        v = target
    else:
        v = v + min(1.0, params.dt / params.uav_lag_tau) * (target - v)
    yaw = state.yaw + v[3] * params.dt
    position = state.position + (rot_z(state.yaw) @ v[:3]) * params.dt
    if position[2] > 0:
        position[2] = 0.0
    return replace(state, position=position, yaw=float(yaw), velocity=CommandVelocity.from_array(v))


def step_truck(state: TruckState, params: SimParams, rng: np.random.Generator | None = None) -> TruckState:
    noise = 0.0
    if params.truck_speed_noise_sigma > 0:
        noise = rng.normal(0.0, params.truck_speed_noise_sigma)
    return replace(state, distance_along=state.distance_along + (state.speed + noise) * params.dt)


def _toward(current: float, target: float, max_step: float) -> float:
    return current + _clamp(target - current, max_step)


def step_gimbal(
    state: UAVState, pitch_cmd: float, params: SimParams, yaw_cmd: float | None = None
) -> UAVState:
    """Rate-limited move of the gimbal toward the commanded angles.

    ``yaw_cmd`` defaults to the current gimbal yaw.
    """
    max_step = params.gimbal_rate_limit * params.dt
    target = min(max(float(pitch_cmd), params.gimbal_pitch_min), params.gimbal_pitch_max)
    pitch = _toward(state.gimbal_pitch, target, max_step)
    yaw = state.gimbal_yaw if yaw_cmd is None else _toward(state.gimbal_yaw, yaw_cmd, max_step)
    return replace(state, gimbal_pitch=pitch, gimbal_yaw=yaw)


def gimbal_transform(state: UAVState, mount: RigidTransform) -> RigidTransform:
    """``body_T_camera``: mount offset followed by the gimbal rotation."""
    gimbal = rotation_from_gimbal(0.0, state.gimbal_pitch, state.gimbal_yaw)
    return mount @ RigidTransform._unchecked(gimbal, np.zeros(3))


def camera_pose(state: UAVState, mount: RigidTransform) -> RigidTransform:
    """``world_T_camera`` for the current UAV and gimbal state."""
    return state.pose @ gimbal_transform(state, mount)


def rest_on_deck(uav: UAVState, truck: TruckState) -> UAVState:
    """Keep the UAV from sinking through the deck top while it is over the footprint."""
    if uav.altitude >= truck.deck_height:
        return uav
    offset = rot_z(truck.heading).T @ (uav.position - truck.deck_center)
    if abs(offset[0]) > DECK_SIZE / 2 or abs(offset[1]) > DECK_SIZE / 2:
        return uav
    pos = uav.position.copy()
    pos[2] = -truck.deck_height
    return replace(uav, position=pos)


def advance(
    uav: UAVState,
    truck: TruckState,
    cmd: CommandVelocity,
    pitch_cmd: float,
    params: SimParams,
    n_steps: int,
    rng: np.random.Generator | None = None,
) -> tuple[UAVState, TruckState]:
    """``n_steps`` physics steps under a held command and gimbal set point.

    Same model as repeated :func:`step_uav`, :func:`step_gimbal` (yaw set
    point 0), :func:`step_truck` and :func:`rest_on_deck`, evaluated on plain
    floats. The truck speed noise for all steps is drawn in one call.
    """
    dt = params.dt
    alpha = 1.0 if params.uav_lag_tau == 0 else min(1.0, dt / params.uav_lag_tau)
    tx, ty, tz, tw = (float(c) for c in saturate(cmd, params).as_array())
    vx, vy, vz, w = (float(c) for c in uav.velocity.as_array())
    px, py, pz = (float(c) for c in uav.position)
    yaw, pitch, gyaw = float(uav.yaw), float(uav.gimbal_pitch), float(uav.gimbal_yaw)
    max_gimbal = params.gimbal_rate_limit * dt
    pitch_target = min(max(float(pitch_cmd), params.gimbal_pitch_min), params.gimbal_pitch_max)

    if params.truck_speed_noise_sigma > 0:
        speeds = (truck.speed + rng.normal(0.0, params.truck_speed_noise_sigma, n_steps)).tolist()
    else:
        speeds = [truck.speed] * n_steps
    ox, oy, _ = (float(c) for c in truck.path_origin)
    dx, dy, _ = (float(c) for c in truck.path_direction)
    dist, deck_h, half = float(truck.distance_along), float(truck.deck_height), DECK_SIZE / 2

    for k in range(n_steps):
        vx += alpha * (tx - vx)
        vy += alpha * (ty - vy)
        vz += alpha * (tz - vz)
        w += alpha * (tw - w)
        c, s = math.cos(yaw), math.sin(yaw)
        px += (c * vx - s * vy) * dt
        py += (s * vx + c * vy) * dt
        pz += vz * dt
        yaw += w * dt
        if pz > 0:
            pz = 0.0
        pitch += _clamp(pitch_target - pitch, max_gimbal)
        gyaw += _clamp(-gyaw, max_gimbal)
        dist += speeds[k] * dt
        if -pz < deck_h:
            rx, ry = px - (ox + dist * dx), py - (oy + dist * dy)
            along, across = dx * rx + dy * ry, -dy * rx + dx * ry
            if abs(along) <= half and abs(across) <= half:
                pz = -deck_h

    new_uav = replace(
        uav,
        position=np.array([px, py, pz]),
        yaw=yaw,
        velocity=CommandVelocity(vx, vy, vz, w),
        gimbal_pitch=pitch,
        gimbal_yaw=gyaw,
    )
    return new_uav, replace(truck, distance_along=dist)
