import numpy as np
import pytest

from servoland.sensors import (
    LaserConfig,
    TriggerConfig,
    TriggerDetector,
    cast_ray,
    laser_measure,
    lateral_coverage,
)
from servoland.world import DECK_SIZE, SimParams, TruckState, UAVState, step_truck

HOVER = UAVState(position=[0.0, 0.0, -4.0])


def test_ranges_over_ground_and_deck():
    r = laser_measure(HOVER, None, LaserConfig())
    np.testing.assert_allclose(r, [4.0, 4 / np.cos(np.pi / 6), 4 / np.cos(np.pi / 6)])
    assert r[1] == pytest.approx(4.619, abs=1e-3)
    r = laser_measure(HOVER, TruckState(distance_along=0.0), LaserConfig())
    assert r[0] == pytest.approx(2.5)


def test_ray_hits_box_side():
    truck = TruckState(distance_along=0.0)
    # horizontal ray at 1 m height toward the truck from 5 m away
    assert cast_ray([-5.0, 0.0, -1.0], np.array([1.0, 0, 0]), truck) == pytest.approx(5 - DECK_SIZE / 2)
    assert cast_ray([-5.0, 0.0, -1.0], np.array([-1.0, 0, 0]), truck) == np.inf


def test_out_of_range_and_noise():
    far = UAVState(position=[0, 0, -50.0])
    np.testing.assert_array_equal(laser_measure(far, None, LaserConfig(max_range=40)), [40, 40, 40])
    cfg = LaserConfig(noise_sigma=0.05)
    rng = np.random.default_rng(0)
    samples = np.array([laser_measure(HOVER, None, cfg, rng)[0] for _ in range(2000)])
    assert samples.mean() == pytest.approx(4.0, abs=0.005)
    assert samples.std() == pytest.approx(0.05, rel=0.1)


def test_lateral_coverage():
    assert lateral_coverage(4.0, 1.5, np.pi / 6) == pytest.approx(1.443, abs=1e-3)
    assert lateral_coverage(4.0, 0.0, np.pi / 6) == pytest.approx(2.309, abs=1e-3)
    assert lateral_coverage(4.0, 1.5, 0.0) == 0.0
    with pytest.raises(ValueError):
        lateral_coverage(1.0, 1.5, 0.3)


def _feed(values, dt=1 / 30, cfg=TriggerConfig(), max_range=40.0):
    det = TriggerDetector(cfg, max_range)
    return [det.update(np.atleast_1d(v), k * dt) for k, v in enumerate(values)]


def test_trigger_constant_and_step():
    assert not any(_feed([4.0] * 60))
    fired = _feed([4.0] * 30 + [2.5] * 30)
    assert not any(fired[:30]) and fired[30]


def test_trigger_ignores_slow_ramp():
    # 1.5 m over 3 s is only 0.1 m per 0.2 s window
    assert not any(_feed(np.linspace(4.0, 2.5, 90)))


def test_trigger_shift_invariant():
    values = np.r_[[4.0] * 10, np.linspace(4.0, 2.8, 5), [2.8] * 10]
    base = _feed(values)
    for c in (-1.0, 3.0, 10.0):
        assert _feed(values + c) == base


def test_trigger_ignores_no_return_and_rejects_time_reversal():
    assert not any(_feed([40.0] * 5 + [4.0] * 10))
    det = TriggerDetector(TriggerConfig())
    det.update([1.0], 1.0)
    with pytest.raises(ValueError):
        det.update([1.0], 1.0)


def _drive_under(lateral, altitude=4.0):
    sim = SimParams(dt=1 / 30)
    cfg = LaserConfig()
    uav = UAVState(position=[0.0, 0.0, -altitude])
    truck = TruckState(path_origin=[0.0, lateral, 0.0], distance_along=-12.0)
    det = TriggerDetector(TriggerConfig(), cfg.max_range)
    for k in range(6 * 30):
        if det.update(laser_measure(uav, truck, cfg), k / 30):
            return True
        truck = step_truck(truck, sim)
    return False


@pytest.mark.parametrize("lateral", [-1.4, -0.7, 0.0, 0.7, 1.4])
def test_drive_under_triggers(lateral):
    assert _drive_under(lateral)


@pytest.mark.parametrize("lateral", [-3.2, 3.2, 5.0])
def test_passing_far_to_the_side_does_not_trigger(lateral):
    assert not _drive_under(lateral)
