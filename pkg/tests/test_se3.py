import numpy as np
import pytest
from conftest import random_transform
from hypothesis import given, settings
from hypothesis import strategies as st

from servoland.se3 import (
    CAMERA_BASE_ROTATION,
    RigidTransform,
    Twist,
    is_rotation,
    rotation_from_gimbal,
    skew,
    velocity_twist,
)

angles = st.floats(-np.pi, np.pi, allow_nan=False)


def test_skew_matches_definition():
    expected = np.array([[0, -3, 2], [3, 0, -1], [-2, 1, 0]], dtype=float)
    np.testing.assert_array_equal(skew([1, 2, 3]), expected)
    np.testing.assert_array_equal(skew([0, 0, 0]), np.zeros((3, 3)))


def test_skew_is_cross_product(rng):
    for _ in range(50):
        t, v = rng.normal(size=3), rng.normal(size=3)
        M = skew(t)
        np.testing.assert_allclose(M @ v, np.cross(t, v), atol=1e-14)
        np.testing.assert_array_equal(M + M.T, np.zeros((3, 3)))


def test_transform_validation():
    with pytest.raises(ValueError):
        RigidTransform(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(ValueError):
        RigidTransform(np.eye(3) * 1.01)
    with pytest.raises(ValueError):
        RigidTransform(np.eye(3), [0.0, np.nan, 0.0])


def test_inverse_and_associativity(rng):
    for _ in range(30):
        A, B, C = (random_transform(rng) for _ in range(3))
        np.testing.assert_allclose((A @ A.inverse()).as_matrix(), np.eye(4), atol=1e-9)
        np.testing.assert_allclose(
            ((A @ B) @ C).as_matrix(), (A @ (B @ C)).as_matrix(), atol=1e-9
        )
        T = A.as_matrix()
        np.testing.assert_allclose(RigidTransform.from_matrix(T).as_matrix(), T)


def test_apply_matches_homogeneous_matrix(rng):
    A = random_transform(rng)
    p = rng.normal(size=(7, 3))
    hom = np.c_[p, np.ones(7)] @ A.as_matrix().T
    np.testing.assert_allclose(A.apply(p), hom[:, :3], atol=1e-12)


def test_velocity_twist_identity_and_translation():
    np.testing.assert_array_equal(velocity_twist(RigidTransform()), np.eye(6))
    V = velocity_twist(RigidTransform(translation=(0, 0, 1)))
    np.testing.assert_array_equal(V[:3, 3:], skew([0, 0, 1]))
    np.testing.assert_array_equal(V[3:, :3], np.zeros((3, 3)))


def test_velocity_twist_block_structure(rng):
    T = random_transform(rng)
    V = velocity_twist(T)
    np.testing.assert_array_equal(V[:3, :3], V[3:, 3:])
    assert is_rotation(V[:3, :3])
    np.testing.assert_allclose(V[:3, 3:], skew(T.translation) @ T.rotation, atol=1e-15)


def test_velocity_twist_transports_point_velocities(rng):
    # a_T_b maps a twist expressed in b to the same rigid motion expressed in a:
    # the velocity of any point p (given in a) is v_a + w_a x p.
    for _ in range(20):
        a_T_b = random_transform(rng)
        xi_b = rng.normal(size=6)
        xi_a = velocity_twist(a_T_b) @ xi_b
        for p_b in rng.normal(size=(3, 3)):
            vel_b = xi_b[:3] + np.cross(xi_b[3:], p_b)
            vel_a_expected = a_T_b.rotation @ vel_b
            p_a = a_T_b.apply(p_b)
            vel_a = xi_a[:3] + np.cross(xi_a[3:], p_a)
            np.testing.assert_allclose(vel_a, vel_a_expected, atol=1e-12)


def test_velocity_twist_is_a_homomorphism(rng):
    for _ in range(20):
        A, B = random_transform(rng), random_transform(rng)
        np.testing.assert_allclose(
            velocity_twist(A @ B), velocity_twist(A) @ velocity_twist(B), atol=1e-9
        )


def test_gimbal_base_convention():
    np.testing.assert_array_equal(rotation_from_gimbal(0, 0, 0), CAMERA_BASE_ROTATION)
    # optical axis (camera z) in body coordinates
    np.testing.assert_allclose(rotation_from_gimbal(0, 0, 0)[:, 2], [1, 0, 0])
    np.testing.assert_allclose(rotation_from_gimbal(0, -np.pi / 2, 0)[:, 2], [0, 0, 1], atol=1e-15)
    # image x is body right at zero angles, image y is body down
    np.testing.assert_allclose(CAMERA_BASE_ROTATION[:, 0], [0, 1, 0])
    np.testing.assert_allclose(CAMERA_BASE_ROTATION[:, 1], [0, 0, 1])


@settings(max_examples=200, deadline=None)
@given(angles, angles, angles)
def test_gimbal_rotation_is_orthonormal(roll, pitch, yaw):
    R = rotation_from_gimbal(roll, pitch, yaw)
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
    assert abs(np.linalg.det(R) - 1.0) < 1e-12


def test_twist_roundtrip():
    xi = np.arange(6.0)
    tw = Twist.from_array(xi)
    np.testing.assert_array_equal(tw.as_array(), xi)
    with pytest.raises(ValueError):
        Twist([np.inf, 0, 0])
