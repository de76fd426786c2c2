"""Pinhole camera, deck-circle rendering, ellipse fitting and image features.

The deck detector works on rendered geometry: the deck circle is sampled in
3-D, projected through a pinhole model, optionally perturbed with pixel
noise, and a direct least-squares ellipse is fitted to the surviving
samples. The five image features are the ellipse center followed by the
corners of its axis-aligned bounding box.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .se3 import RigidTransform, rotation_from_gimbal

DEPTH_EPS = 1e-6

CORNER_NAMES = ("top_left", "top_right", "bottom_right", "bottom_left")


class BehindCameraError(ValueError):
    """The point is on or behind the image plane."""


class DegenerateInputError(ValueError):
    """Too few or collinear points to determine a conic."""


class NotAnEllipseError(ValueError):
    """The least-squares conic is a hyperbola or parabola."""


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float = 320.0
    fy: float = 320.0
    cx: float = 320.0
    cy: float = 180.0
    width: int = 640
    height: int = 360

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def normalize(self, uv) -> np.ndarray:
        uv = np.asarray(uv, dtype=float)
        return (uv - [self.cx, self.cy]) / [self.fx, self.fy]

    def denormalize(self, xy) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        return xy * [self.fx, self.fy] + [self.cx, self.cy]

    def in_frame(self, uv) -> np.ndarray:
        uv = np.atleast_2d(uv)
        return (
            (uv[:, 0] >= 0) & (uv[:, 0] < self.width) & (uv[:, 1] >= 0) & (uv[:, 1] < self.height)
        )


@dataclass(frozen=True)
class EllipseParams:
    center: np.ndarray
    semi_major: float
    semi_minor: float
    orientation: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(2))
        if not (self.semi_major >= self.semi_minor > 0):
            raise ValueError("need semi_major >= semi_minor > 0")

    def sample(self, n: int, phase: float = 0.0) -> np.ndarray:
        """``n`` points on the ellipse, evenly spaced in the parametric angle."""
        t = phase + np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        c, s = np.cos(self.orientation), np.sin(self.orientation)
        local = np.column_stack([self.semi_major * np.cos(t), self.semi_minor * np.sin(t)])
        return local @ np.array([[c, s], [-s, c]]) + self.center

    def bounding_half_extents(self) -> tuple[float, float]:
        a, b, th = self.semi_major, self.semi_minor, self.orientation
        hx = np.sqrt((a * np.cos(th)) ** 2 + (b * np.sin(th)) ** 2)
        hy = np.sqrt((a * np.sin(th)) ** 2 + (b * np.cos(th)) ** 2)
        return float(hx), float(hy)


def project_point(world_point, camera_pose: RigidTransform, intr: CameraIntrinsics) -> np.ndarray:
    """Pixel ``(u, v)`` of a world point seen from ``camera_pose`` (``world_T_camera``)."""
    X, Y, Z = camera_pose.inverse().apply(world_point)
    if Z <= DEPTH_EPS:
        raise BehindCameraError(f"point depth {Z:.3g} m is not in front of the camera")
    return np.array([intr.fx * X / Z + intr.cx, intr.fy * Y / Z + intr.cy])


def project_deck_circle(
    deck_pose: RigidTransform,
    radius: float,
    camera_pose: RigidTransform,
    intr: CameraIntrinsics,
    n_samples: int = 64,
) -> tuple[np.ndarray, float]:
    """Project the deck circle, keeping only samples in front of the camera and inside the frame.

    The circle lies in the x-y plane of ``deck_pose`` around its origin.
    Returns the visible pixel points ``(k, 2)`` and the visible fraction ``k / n_samples``.
    """
    if n_samples < 8:
        raise ValueError("n_samples must be at least 8")
    phi = np.linspace(0.0, 2 * np.pi, n_samples, endpoint=False)
    local = np.column_stack([radius * np.cos(phi), radius * np.sin(phi), np.zeros(n_samples)])
    world = deck_pose.apply(local)
    cam = camera_pose.inverse().apply(world)
    front = cam[:, 2] > DEPTH_EPS
    cam = cam[front]
    uv = np.column_stack(
        [intr.fx * cam[:, 0] / cam[:, 2] + intr.cx, intr.fy * cam[:, 1] / cam[:, 2] + intr.cy]
    )
    uv = uv[intr.in_frame(uv)] if len(uv) else uv.reshape(0, 2)
    return uv, len(uv) / n_samples


def _design_matrix(xy: np.ndarray) -> np.ndarray:
    x, y = xy[:, 0], xy[:, 1]
    return np.column_stack([x * x, x * y, y * y, x, y, np.ones_like(x)])


def _direct_ellipse_fit(xy: np.ndarray) -> np.ndarray:
    """Ellipse-specific least squares with ``4AC - B^2 = 1``, split into quadratic/linear blocks.

    Returns conic coefficients ``(A, B, C, D, E, F)``.
    """
    D = _design_matrix(xy)
    D1, D2 = D[:, :3], D[:, 3:]
    S1, S2, S3 = D1.T @ D1, D1.T @ D2, D2.T @ D2
    try:
        T = -np.linalg.solve(S3, S2.T)
    except np.linalg.LinAlgError as exc:
        raise DegenerateInputError("points do not determine a conic") from exc
    M = S1 + S2 @ T
    # inverse of the constraint matrix [[0,0,2],[0,-1,0],[2,0,0]] applied on the left
    M = np.array([M[2] / 2.0, -M[1], M[0] / 2.0])
    evals, evecs = np.linalg.eig(M)
    evecs = np.real(evecs)
    cond = 4 * evecs[0] * evecs[2] - evecs[1] ** 2
    ok = np.flatnonzero(cond > 0)
    if ok.size == 0:
        raise NotAnEllipseError("no elliptic solution of the constrained fit")
    a1 = evecs[:, ok[np.argmin(np.abs(np.real(evals[ok])))]]
    return np.concatenate([a1, T @ a1])


def conic_to_params(conic) -> EllipseParams:
    conic = np.asarray(conic, dtype=float)
    if conic[0] + conic[2] < 0:
        conic = -conic
    A, B, C, D, E, F = conic
    disc = B * B - 4 * A * C
    if disc >= 0:
        raise NotAnEllipseError(f"conic discriminant {disc:.3g} is not negative")
    center = np.linalg.solve([[2 * A, B], [B, 2 * C]], [-D, -E])
    x0, y0 = center
    f_center = A * x0 * x0 + B * x0 * y0 + C * y0 * y0 + D * x0 + E * y0 + F
    Q = np.array([[A, B / 2], [B / 2, C]])
    evals, evecs = np.linalg.eigh(Q)
    if f_center >= 0:
        raise NotAnEllipseError("imaginary ellipse")
    axes = np.sqrt(-f_center / evals)
    # smallest eigenvalue -> longest axis
    major_dir = evecs[:, 0]
    orientation = np.arctan2(major_dir[1], major_dir[0])
    if orientation > np.pi / 2:
        orientation -= np.pi
    elif orientation <= -np.pi / 2:
        orientation += np.pi
    return EllipseParams(center, float(axes[0]), float(axes[1]), float(orientation))


class EllipseFitter(BaseEstimator):
    """Direct least-squares ellipse fit to 2-D points.

    Points are centered and scaled before fitting; ``conic_`` holds the
    coefficients in that normalized frame (unit norm) and ``ellipse_`` the
    geometric parameters in the input frame.

    Parameters
    ----------
    collinear_tol : float
        Relative tolerance on the smaller principal spread under which the
        input is considered collinear.
    """

    def __init__(self, collinear_tol: float = 1e-9):
        self.collinear_tol = collinear_tol

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=1)
        if X.shape[1] != 2:
            raise ValueError(f"expected points of shape (n, 2), got {X.shape}")
        if X.shape[0] < 6:
            raise DegenerateInputError(f"need at least 6 points, got {X.shape[0]}")
        shift = X.mean(axis=0)
        centered = X - shift
        spread = np.linalg.svd(centered, compute_uv=False)
        if spread[0] == 0 or spread[1] <= self.collinear_tol * spread[0]:
            raise DegenerateInputError("points are collinear")
        scale = np.sqrt(np.mean(np.sum(centered**2, axis=1)))
        xy = centered / scale
        conic = _direct_ellipse_fit(xy)
        conic = conic / np.linalg.norm(conic)
        params = conic_to_params(conic)
        self.shift_ = shift
        self.scale_ = scale
        self.conic_ = conic
        self.ellipse_ = EllipseParams(
            params.center * scale + shift,
            params.semi_major * scale,
            params.semi_minor * scale,
            params.orientation,
        )
        return self

    def residuals(self, X) -> np.ndarray:
        """Algebraic residual of each point against the fitted (normalized) conic."""
        check_is_fitted(self, "conic_")
        X = check_array(X)
        return _design_matrix((X - self.shift_) / self.scale_) @ self.conic_


def fit_ellipse(points) -> EllipseParams:
    return EllipseFitter().fit(points).ellipse_


def extract_features(ellipse: EllipseParams, intr: CameraIntrinsics) -> np.ndarray:
    """Feature vector of 10 normalized coordinates.

    Order: center, then the bounding-box corners top-left, top-right,
    bottom-right, bottom-left (image y grows downward).
    """
    hx, hy = ellipse.bounding_half_extents()
    cu, cv = ellipse.center
    pix = np.array(
        [
            [cu, cv],
            [cu - hx, cv - hy],
            [cu + hx, cv - hy],
            [cu + hx, cv + hy],
            [cu - hx, cv + hy],
        ]
    )
    return intr.normalize(pix).reshape(10)


def render_features(
    deck_pose: RigidTransform,
    radius: float,
    camera_pose: RigidTransform,
    intr: CameraIntrinsics,
    n_samples: int = 64,
) -> np.ndarray:
    """Exact features of the deck circle, ignoring the image borders (virtual features)."""
    phi = np.linspace(0.0, 2 * np.pi, n_samples, endpoint=False)
    local = np.column_stack([radius * np.cos(phi), radius * np.sin(phi), np.zeros(n_samples)])
    cam = camera_pose.inverse().apply(deck_pose.apply(local))
    if np.any(cam[:, 2] <= DEPTH_EPS):
        raise BehindCameraError("deck circle is not entirely in front of the camera")
    uv = cam[:, :2] / cam[:, 2:] * [intr.fx, intr.fy] + [intr.cx, intr.cy]
    return extract_features(fit_ellipse(uv), intr)


def goal_features(
    z_star: float,
    mount: RigidTransform,
    intr: CameraIntrinsics,
    radius: float = 0.75,
    n_samples: int = 64,
) -> np.ndarray:
    """Features seen with the body right above the deck center and the camera looking straight down.

    ``mount`` is the camera mount offset in the body frame; the camera ends
    up ``z_star`` above the deck plane, so every deck point has depth ``z_star``.
    """
    body_T_cam = mount @ RigidTransform(rotation_from_gimbal(0.0, -np.pi / 2, 0.0))
    body = RigidTransform(translation=(0.0, 0.0, -(z_star + body_T_cam.translation[2])))
    return render_features(RigidTransform(), radius, body @ body_T_cam, intr, n_samples)


def feature_points(s) -> np.ndarray:
    """View a 10-vector of features as five ``(x, y)`` rows."""
    return np.asarray(s, dtype=float).reshape(5, 2)


@dataclass(frozen=True)
class DetectionModel:
    max_range: float = 15.0
    min_range: float = 0.8
    min_visible_fraction: float = 0.5
    dropout_burst_rate: float = 0.0
    dropout_burst_len: float = 0.3
    pixel_noise_sigma: float = 0.0

    def __post_init__(self):
        if not (0 <= self.min_range < self.max_range):
            raise ValueError("need 0 <= min_range < max_range")
        if not (0.0 <= self.min_visible_fraction <= 1.0):
            raise ValueError("min_visible_fraction must lie in [0, 1]")
        if self.dropout_burst_rate < 0 or self.dropout_burst_len < 0 or self.pixel_noise_sigma < 0:
            raise ValueError("rates, lengths and noise must be non-negative")


def observe_deck(
    deck_pose: RigidTransform,
    camera_pose: RigidTransform,
    intr: CameraIntrinsics,
    model: DetectionModel,
    rng: np.random.Generator,
    radius: float = 0.75,
    n_samples: int = 64,
):
    """One detection attempt without dropout bursts. Returns features or ``None``."""
    distance = float(np.linalg.norm(deck_pose.translation - camera_pose.translation))
    if not (model.min_range <= distance <= model.max_range):
        return None
    uv, fraction = project_deck_circle(deck_pose, radius, camera_pose, intr, n_samples)
    if fraction < model.min_visible_fraction or len(uv) < 6:
        return None
    if model.pixel_noise_sigma > 0:
        uv = uv + rng.normal(0.0, model.pixel_noise_sigma, size=uv.shape)
    try:
        ellipse = fit_ellipse(uv)
    except (DegenerateInputError, NotAnEllipseError, np.linalg.LinAlgError):
        return None
    return extract_features(ellipse, intr)


class DeckDetector:
    """Stateful detector adding dropout bursts (glare, reflections) on top of :func:`observe_deck`.

    Bursts start as a Poisson process with ``dropout_burst_rate`` and last
    ``dropout_burst_len`` seconds; every call consumes the random stream in
    the same order, so a seed fixes the whole detection sequence.
    """

    def __init__(
        self,
        model: DetectionModel,
        intr: CameraIntrinsics,
        rng: np.random.Generator,
        radius: float = 0.75,
        n_samples: int = 64,
    ):
        self.model = model
        self.intr = intr
        self.rng = rng
        self.radius = radius
        self.n_samples = n_samples
        self._burst_until = -np.inf
        self._last_t = None

    def in_burst(self, t: float) -> bool:
        return t < self._burst_until

    def detect(self, deck_pose: RigidTransform, camera_pose: RigidTransform, t: float):
        m = self.model
        if m.dropout_burst_rate > 0:
            dt = 0.0 if self._last_t is None else t - self._last_t
            u = self.rng.random()
            if not self.in_burst(t) and u < -np.expm1(-m.dropout_burst_rate * dt):
                self._burst_until = t + m.dropout_burst_len
        self._last_t = t
        if self.in_burst(t):
            return None
        return observe_deck(
            deck_pose, camera_pose, self.intr, m, self.rng, self.radius, self.n_samples
        )
