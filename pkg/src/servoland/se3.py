"""Rigid-body geometry: rotations, transforms, twists and the velocity twist matrix.

Frame conventions used across the package:

* world: north-east-down (NED), ground plane at ``z = 0``, altitude is ``-z``
* body: x forward, y right, z down
* camera: z along the optical axis, x right, y down in the image

A twist is ordered ``(linear, angular)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Camera axes expressed in the body frame at zero gimbal angles (camera looks forward).
CAMERA_BASE_ROTATION = np.array(
    [
        [0.0, 0.0, 1.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
    ]
)


def skew(t) -> np.ndarray:
    """Cross-product matrix: ``skew(t) @ v == np.cross(t, v)``."""
    x, y, z = np.asarray(t, dtype=float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


_EYE3 = np.eye(3)


def is_rotation(R, tol: float = 1e-9) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        return False
    # NaN fails both comparisons, so no separate finiteness test is needed
    gram_err = np.abs(R @ R.T - _EYE3).max()
    (a, b, c), (d, e, f), (g, h, i) = R.tolist()
    det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    return bool(gram_err <= tol and abs(det - 1.0) < tol)


def rotation_from_gimbal(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Orientation of the camera in the body frame for the given gimbal angles.

    Angles are applied yaw, then pitch, then roll (``Rz @ Ry @ Rx``) on top of
    :data:`CAMERA_BASE_ROTATION`. With all angles zero the optical axis is the
    body x axis; ``pitch = -pi/2`` points it straight down (body +z).
    """
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll) @ CAMERA_BASE_ROTATION


@dataclass(frozen=True)
class RigidTransform:
    """Pose ``a_T_b``: maps coordinates in frame b to frame a."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not is_rotation(R):
            raise ValueError("rotation must be orthonormal with det 1")
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def _unchecked(cls, rotation: np.ndarray, translation: np.ndarray) -> RigidTransform:
        # products and inverses of valid transforms stay valid; skip re-validation on hot paths
        obj = object.__new__(cls)
        object.__setattr__(obj, "rotation", rotation)
        object.__setattr__(obj, "translation", translation)
        return obj

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls()

    @classmethod
    def from_matrix(cls, T) -> RigidTransform:
        T = np.asarray(T, dtype=float)
        return cls(T[:3, :3], T[:3, 3])

    def as_matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def inverse(self) -> RigidTransform:
        Rt = self.rotation.T
        return RigidTransform._unchecked(Rt, -Rt @ self.translation)

    def apply(self, points) -> np.ndarray:
        """Transform a point ``(3,)`` or a stack of points ``(n, 3)``."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def __matmul__(self, other: RigidTransform) -> RigidTransform:
        return RigidTransform._unchecked(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )


@dataclass(frozen=True)
class Twist:
    linear: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        v = np.asarray(self.linear, dtype=float).reshape(3)
        w = np.asarray(self.angular, dtype=float).reshape(3)
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
            raise ValueError("twist must be finite")
        object.__setattr__(self, "linear", v)
        object.__setattr__(self, "angular", w)

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.linear, self.angular])

    @classmethod
    def from_array(cls, xi) -> Twist:
        xi = np.asarray(xi, dtype=float).reshape(6)
        return cls(xi[:3], xi[3:])


def velocity_twist(transform: RigidTransform) -> np.ndarray:
    """6x6 matrix ``[[R, [t]x R], [0, R]]`` of ``transform = a_T_b``.

    It maps a twist of frame b expressed in b to the twist of frame a
    expressed in a, for two frames rigidly attached to each other. Pass
    ``cam_T_body`` to obtain the body-to-camera velocity transform used by
    the servo law.
    """
    R = transform.rotation
    V = np.zeros((6, 6))
    V[:3, :3] = R
    V[:3, 3:] = skew(transform.translation) @ R
    V[3:, 3:] = R
    return V
