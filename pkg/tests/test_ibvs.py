import warnings

import numpy as np
import pytest
from conftest import random_transform
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from servoland.config import ExperimentConfig
from servoland.harness import run_static_servo
from servoland.ibvs import (
    ROBOT_JACOBIAN,
    CommandVelocity,
    IBVSController,
    RankDeficiencyWarning,
    ServoGoal,
    build_goal_interaction,
    feed_forward,
    gimbal_command,
    interaction_block,
    pseudo_inverse,
    servo_command,
)
from servoland.se3 import (
    RigidTransform,
    Twist,
    rotation_from_gimbal,
    skew,
    velocity_twist,
)
from servoland.world import SimParams

S_STAR = np.array([0, 0, -0.25, -0.25, 0.25, -0.25, 0.25, 0.25, -0.25, 0.25], dtype=float)


def test_interaction_block_examples():
    np.testing.assert_allclose(
        interaction_block(0.0, 0.0, 0.5),
        [[-2, 0, 0, 0, -1, 0], [0, -2, 0, 1, 0, 0]],
    )
    L = interaction_block(0.1, -0.2, 0.5)
    np.testing.assert_allclose(
        L,
        [[-2, 0, 0.2, -0.02, -1.01, -0.2], [0, -2, -0.4, 1.04, 0.02, -0.1]],
        atol=1e-15,
    )
    with pytest.raises(ValueError):
        interaction_block(0, 0, 0.0)


def test_interaction_block_matches_finite_differences(rng):
    # Moving the camera with twist (v, w) moves a fixed point by -v - w x P in camera coordinates.
    h = 1e-6
    for _ in range(1000):
        P = np.array([*rng.uniform(-2, 2, 2), rng.uniform(0.3, 5)])
        twist = rng.normal(size=6)
        P_dot = -twist[:3] - skew(twist[3:]) @ P

        def proj(Q):
            return Q[:2] / Q[2]

        numeric = (proj(P + h * P_dot) - proj(P - h * P_dot)) / (2 * h)
        analytic = interaction_block(P[0] / P[2], P[1] / P[2], P[2]) @ twist
        np.testing.assert_allclose(analytic, numeric, rtol=1e-6, atol=1e-7)


def test_goal_interaction_scales_with_depth():
    L1 = build_goal_interaction(S_STAR, 0.5)
    L2 = build_goal_interaction(S_STAR, 1.0)
    assert L1.shape == (10, 6)
    np.testing.assert_allclose(L1[:, :3] / 2, L2[:, :3])
    np.testing.assert_array_equal(L1[:, 3:], L2[:, 3:])


def _check_penrose(M, P):
    np.testing.assert_allclose(M @ P @ M, M, atol=1e-10)
    np.testing.assert_allclose(P @ M @ P, P, atol=1e-10)
    np.testing.assert_allclose((M @ P).T, M @ P, atol=1e-10)
    np.testing.assert_allclose((P @ M).T, P @ M, atol=1e-10)


def test_pseudo_inverse_penrose_conditions(rng):
    for k in range(100):
        M = rng.normal(size=(10, 4))
        if k % 2:
            M[:, 3] = M[:, 0] - 2 * M[:, 1]  # rank 3
        P, rank = pseudo_inverse(M)
        assert P.shape == (4, 10)
        assert rank == (3 if k % 2 else 4)
        _check_penrose(M, P)
        np.testing.assert_allclose(P, np.linalg.pinv(M, rcond=1e-8), atol=1e-10)


def test_pseudo_inverse_simple_cases():
    P, rank = pseudo_inverse(np.eye(4))
    np.testing.assert_array_equal(P, np.eye(4))
    assert rank == 4
    P, rank = pseudo_inverse(np.diag([4.0, 2.0, 1e-12]))
    np.testing.assert_allclose(P, np.diag([0.25, 0.5, 0.0]))
    assert rank == 2
    P, rank = pseudo_inverse(np.zeros((3, 2)))
    assert rank == 0 and P.shape == (2, 3) and not P.any()


def _down_cVb():
    mount = RigidTransform(rotation_from_gimbal(0, -np.pi / 2, 0), (0.1, 0.0, 0.05))
    return velocity_twist(mount.inverse())


def test_zero_error_returns_feed_forward():
    goal = ServoGoal(S_STAR)
    ff = CommandVelocity(1.0, -2.0, 0.5, 0.1)
    cmd, rank = servo_command(S_STAR, goal, build_goal_interaction(S_STAR, 0.5), _down_cVb(), ff)
    assert cmd == ff
    assert rank == 4


def test_command_linear_in_gain(rng):
    s = S_STAR + rng.normal(scale=0.05, size=10)
    L, cVb = build_goal_interaction(S_STAR, 0.5), _down_cVb()
    c1, _ = servo_command(s, ServoGoal(S_STAR, gain=0.4), L, cVb)
    c2, _ = servo_command(s, ServoGoal(S_STAR, gain=0.8), L, cVb)
    np.testing.assert_allclose(c2.as_array(), 2 * c1.as_array(), rtol=1e-12)


def test_too_far_commands_descent():
    # the deck seen from twice the goal depth looks half as large: descend (NED vz > 0)
    cmd, _ = servo_command(S_STAR / 2, ServoGoal(S_STAR), build_goal_interaction(S_STAR, 0.5), _down_cVb())
    assert cmd.vz > 0
    assert abs(cmd.vx) < 1e-9 and abs(cmd.vy) < 1e-9


def test_rank_deficiency_warns():
    goal = ServoGoal(S_STAR)
    L = np.zeros((10, 6))
    L[:, 0] = 1.0
    with pytest.warns(RankDeficiencyWarning):
        _, rank = servo_command(S_STAR, goal, L, np.eye(6))
    assert rank == 1


def test_composite_jacobian_selects_body_dofs(rng):
    T = random_transform(rng)
    V = velocity_twist(T)
    u = rng.normal(size=4)
    body = Twist(u[:3], np.array([0.0, 0.0, u[3]]))
    np.testing.assert_allclose(V @ ROBOT_JACOBIAN @ u, V @ body.as_array())


def test_gimbal_command_examples():
    goal = ServoGoal(S_STAR, gimbal_gain=0.5)
    assert gimbal_command([0.0, 0.1], goal) == pytest.approx(-0.05)
    assert gimbal_command([0.3, 0.0], goal) == 0.0
    fast = ServoGoal(S_STAR, gimbal_gain=1.5)
    assert gimbal_command([0.0, 0.1], fast) == pytest.approx(3 * gimbal_command([0.0, 0.1], goal))
    shifted = ServoGoal(S_STAR, gimbal_center_offset=(0.0, -0.7))
    assert gimbal_command([0.0, -0.7], shifted) == 0.0


def test_feed_forward_rotates_into_body():
    ff = feed_forward([4.17, 0.0, 0.0], np.pi / 2)
    np.testing.assert_allclose(ff.as_array(), [0.0, -4.17, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(feed_forward([4.17, 0, 0], 0.0).as_array(), [4.17, 0, 0, 0])


def test_command_velocity_rejects_nan():
    with pytest.raises(ValueError):
        CommandVelocity(np.nan, 0, 0, 0)


def test_controller_estimator_api():
    ctrl = IBVSController(gain=0.6)
    assert clone(ctrl).get_params()["gain"] == 0.6
    with pytest.raises(NotFittedError):
        ctrl.predict(S_STAR, np.eye(6))
    ctrl.fit(S_STAR)
    assert ctrl.interaction_matrix_.shape == (10, 6)
    assert ctrl.feature_error(S_STAR) == 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert ctrl.predict(S_STAR, _down_cVb()) == CommandVelocity()
    assert ctrl.rank_ == 4
    with pytest.raises(ValueError):
        IBVSController().fit(np.zeros(8))


def test_static_servo_converges(rng):
    cfg = ExperimentConfig(sim=SimParams(uav_lag_tau=0.0))
    for _ in range(6):
        h = rng.uniform(2, 5)
        r, a = rng.uniform(0, 0.3 * h), rng.uniform(-np.pi, np.pi)
        start = [r * np.cos(a), r * np.sin(a), -(1.5 + h)]
        trace = run_static_servo(cfg, start, yaw=rng.uniform(-0.5, 0.5))
        assert trace.final_offset < 0.02
        assert np.all(np.diff(trace.errors[5:]) < 0)
        assert trace.errors[-1] < 1e-2 * trace.errors[0]
