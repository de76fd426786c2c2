"""Image-based visual servoing for a velocity-controlled quadrotor.

The controller drives five image points toward their goal positions using a
constant interaction matrix evaluated at the goal, mapped through the
body-to-camera velocity transform and the 4-DOF robot Jacobian
(``vx, vy, vz, yaw rate``), plus a feed-forward velocity for the moving deck.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .se3 import rot_z

#: Selects ``vx, vy, vz, wz`` out of a 6-D body twist.
ROBOT_JACOBIAN = np.array(
    [
        [1, 0, 0, 0],
        [0, 1, 0, 0],
        [0, 0, 1, 0],
        [0, 0, 0, 0],
        [0, 0, 0, 0],
        [0, 0, 0, 1],
    ],
    dtype=float,
)

PINV_RCOND = 1e-8


class RankDeficiencyWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class CommandVelocity:
    """Body-frame velocity command: linear ``vx, vy, vz`` (m/s) and yaw rate ``omega`` (rad/s)."""

    vx: float = 0.0
    vy: float = 0.0
    vz: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise ValueError("command must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.vz, self.omega], dtype=float)

    @property
    def linear(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.vz], dtype=float)

    @classmethod
    def from_array(cls, v) -> CommandVelocity:
        vx, vy, vz, om = (float(c) for c in np.asarray(v, dtype=float).reshape(4))
        return cls(vx, vy, vz, om)

    def __add__(self, other: CommandVelocity) -> CommandVelocity:
        return CommandVelocity.from_array(self.as_array() + other.as_array())


ZERO_COMMAND = CommandVelocity()


def interaction_block(x: float, y: float, Z: float) -> np.ndarray:
    """2x6 interaction matrix of a normalized image point ``(x, y)`` at depth ``Z``."""
    if not Z > 0:
        raise ValueError(f"depth must be positive, got {Z}")
    iz = 1.0 / Z
    return np.array(
        [
            [-iz, 0.0, x * iz, x * y, -(1.0 + x * x), y],
            [0.0, -iz, y * iz, 1.0 + y * y, -x * y, -x],
        ]
    )


def build_goal_interaction(s_star, Z_star: float) -> np.ndarray:
    """Stack one block per goal point, all at the goal depth ``Z_star``."""
    pts = np.asarray(s_star, dtype=float).reshape(-1, 2)
    return np.vstack([interaction_block(x, y, Z_star) for x, y in pts])


def pseudo_inverse(M, rcond: float = PINV_RCOND) -> tuple[np.ndarray, int]:
    """Moore-Penrose pseudo-inverse by SVD and the numerical rank.

    Singular values below ``rcond * sigma_max`` are treated as zero.
    """
    M = np.asarray(M, dtype=float)
    U, sigma, Vt = np.linalg.svd(M, full_matrices=False)
    if sigma.size == 0 or sigma[0] == 0:
        return np.zeros(M.T.shape), 0
    keep = sigma > rcond * sigma[0]
    inv = np.zeros_like(sigma)
    inv[keep] = 1.0 / sigma[keep]
    return (Vt.T * inv) @ U.T, int(keep.sum())


def feed_forward(truck_velocity_world, uav_yaw: float) -> CommandVelocity:
    """World-frame truck velocity expressed in the UAV body frame (yaw only, NED)."""
    v = rot_z(uav_yaw).T @ np.asarray(truck_velocity_world, dtype=float)
    return CommandVelocity(v[0], v[1], v[2], 0.0)


@dataclass(frozen=True)
class ServoGoal:
    s_star: np.ndarray
    z_star: float = 0.5
    gain: float = 0.8
    gimbal_gain: float = 0.5
    gimbal_center_offset: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        s = np.asarray(self.s_star, dtype=float).reshape(-1)
        if s.size != 10:
            raise ValueError("goal features must have 10 entries")
        if not (self.gain > 0 and self.gimbal_gain > 0 and self.z_star > 0):
            raise ValueError("gains and goal depth must be positive")
        object.__setattr__(self, "s_star", s)

    @property
    def desired_center(self) -> np.ndarray:
        return self.s_star[:2] + np.asarray(self.gimbal_center_offset, dtype=float)


def servo_command(s, goal: ServoGoal, L, cVb, v_ff: CommandVelocity = ZERO_COMMAND):
    """Velocity command ``-gain * (L cVb J)^+ (s - s*) + v_ff``.

    Returns ``(command, rank)``; a :class:`RankDeficiencyWarning` is emitted
    when the composite Jacobian has rank below 4.
    """
    M = np.asarray(L) @ np.asarray(cVb) @ ROBOT_JACOBIAN
    M_pinv, rank = pseudo_inverse(M)
    if rank < 4:
        warnings.warn(f"servo Jacobian has rank {rank} < 4", RankDeficiencyWarning, stacklevel=2)
    error = np.asarray(s, dtype=float).reshape(-1) - goal.s_star
    v = -goal.gain * (M_pinv @ error)
    return CommandVelocity.from_array(v) + v_ff, rank


def gimbal_command(s_c, goal: ServoGoal) -> float:
    """Pitch correction (rad) that moves the deck center toward its desired image row.

    Negative values pitch the camera down, which moves image content up.
    """
    return -goal.gimbal_gain * (float(s_c[1]) - float(goal.desired_center[1]))


class IBVSController(BaseEstimator):
    """Constant-interaction-matrix visual servo.

    ``fit`` takes the goal feature vector and freezes the interaction matrix
    at the goal depth; ``predict`` turns current features plus the current
    body-to-camera velocity transform into a body velocity command.

    Parameters
    ----------
    gain : float
        Convergence gain of the feature error (1/s).
    z_star : float
        Camera-to-deck distance at the goal (m).
    gimbal_gain : float
        Proportional gain of the gimbal pitch loop.
    gimbal_center_offset : tuple of float
        Added to the goal deck center to get the gimbal set point.
    """

    def __init__(self, gain=0.8, z_star=0.5, gimbal_gain=0.5, gimbal_center_offset=(0.0, 0.0)):
        self.gain = gain
        self.z_star = z_star
        self.gimbal_gain = gimbal_gain
        self.gimbal_center_offset = gimbal_center_offset

    def fit(self, s_star, y=None):
        self.goal_ = ServoGoal(
            s_star, self.z_star, self.gain, self.gimbal_gain, tuple(self.gimbal_center_offset)
        )
        self.interaction_matrix_ = build_goal_interaction(self.goal_.s_star, self.z_star)
        return self

    def predict(self, s, cVb, v_ff: CommandVelocity = ZERO_COMMAND) -> CommandVelocity:
        check_is_fitted(self, "interaction_matrix_")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RankDeficiencyWarning)
            cmd, self.rank_ = servo_command(s, self.goal_, self.interaction_matrix_, cVb, v_ff)
        return cmd

    def gimbal(self, s) -> float:
        check_is_fitted(self, "goal_")
        return gimbal_command(np.asarray(s)[:2], self.goal_)

    def feature_error(self, s) -> float:
        check_is_fitted(self, "goal_")
        return float(np.linalg.norm(np.asarray(s, dtype=float) - self.goal_.s_star))
