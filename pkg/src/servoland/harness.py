"""Scenario runner, Monte Carlo driver and output writers."""
from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .camera import DeckDetector, goal_features, render_features
from .config import ExperimentConfig
from .ibvs import IBVSController
from .mission import Mission, MissionPhase, MissionResult, Snapshot
from .se3 import RigidTransform, rot_z, velocity_twist
from .sensors import TriggerDetector, laser_measure
from .world import (
    DECK_HEIGHT,
    TruckState,
    UAVState,
    advance,
    camera_pose,
    gimbal_transform,
    step_uav,
)

log = logging.getLogger(__name__)

TRACE_VERSION = "# servoland-trace v1"
APPROACH_DISTANCE = 1.0

SUMMARY_FIELDS = (
    "seed",
    "result",
    "approached",
    "min_distance",
    "first_detection",
    "touchdown_time",
    "detection_to_touchdown",
    "touchdown_offset",
    "touchdown_rel_speed",
    "duration",
)


class SimulationInvariantError(RuntimeError):
    """The simulation reached a physically or logically impossible state."""


@dataclass
class MissionOutcome:
    seed: int
    result: str
    approached: bool
    min_distance: float
    first_detection: float | None
    touchdown_time: float | None
    detection_to_touchdown: float | None
    touchdown_offset: float | None
    touchdown_rel_speed: float | None
    duration: float


@dataclass
class RunRecord:
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)
    summary: MissionOutcome | None = None

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])


def _trace_columns(n_lasers: int) -> list[str]:
    return (
        ["t", "phase", "event", "x", "y", "z", "yaw", "gimbal_pitch",
         "truck_x", "truck_y", "truck_z",
         "cmd_vx", "cmd_vy", "cmd_vz", "cmd_omega",
         "vel_vx", "vel_vy", "vel_vz", "vel_omega",
         "detected", "feature_error"]
        + [f"laser_{i}" for i in range(n_lasers)]
        + ["triggered"]
    )


def _initial_states(cfg: ExperimentConfig, rng: np.random.Generator):
    sc, rz, mc = cfg.scenario, cfg.randomization, cfg.mission
    heading_dir = np.asarray(mc.truck_direction_assumed, dtype=float)
    lateral_dir = rot_z(np.pi / 2) @ heading_dir
    u = rng.uniform(-1.0, 1.0, size=4)
    lateral = sc.truck_lateral_offset + rz.truck_lateral * u[0]
    origin = np.array([mc.hover_point[0], mc.hover_point[1], 0.0]) + lateral * lateral_dir
    truck = TruckState(
        path_origin=origin,
        path_direction=heading_dir,
        distance_along=sc.truck_start + rz.truck_start * u[1],
        speed=sc.truck_speed,
    )
    start = mc.hover_position if sc.uav_start is None else np.asarray(sc.uav_start, dtype=float)
    start = start + rz.uav_offset * np.array([u[2], u[3], 0.0])
    uav = UAVState(position=start, yaw=sc.uav_start_yaw, gimbal_pitch=mc.hover_gimbal_pitch)
    return uav, truck


def build_controller(cfg: ExperimentConfig) -> IBVSController:
    mount = RigidTransform(translation=cfg.camera.mount_offset)
    s_star = goal_features(
        cfg.servo.z_star, mount, cfg.camera.intrinsics, cfg.camera.deck_radius, cfg.camera.n_samples
    )
    return IBVSController(
        gain=cfg.servo.gain,
        z_star=cfg.servo.z_star,
        gimbal_gain=cfg.servo.gimbal_gain,
        gimbal_center_offset=cfg.servo.gimbal_center_offset,
    ).fit(s_star)


def _check_state(uav: UAVState, t: float):
    if not (np.all(np.isfinite(uav.position)) and np.isfinite(uav.yaw)):
        raise SimulationInvariantError(f"non-finite UAV state at t={t:.3f}")


def run_scenario(cfg: ExperimentConfig, seed: int | None = None) -> RunRecord:
    """Simulate one landing attempt: physics every ``sim.dt``, sensing and control at the camera rate."""
    seed = cfg.seed if seed is None else int(seed)
    init_rng, truck_rng, laser_rng, det_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)
    )
    sim = cfg.sim
    uav, truck = _initial_states(cfg, init_rng)
    mount = RigidTransform(translation=cfg.camera.mount_offset)
    controller = build_controller(cfg)
    mission = Mission(
        cfg.mission,
        controller,
        lag_tau=sim.uav_lag_tau,
        max_horiz_speed=sim.max_horiz_speed,
        max_vert_speed=sim.max_vert_speed,
        phase=MissionPhase.FLY_TO_HOVER,
    )
    trigger = TriggerDetector(cfg.trigger, cfg.lasers.max_range)
    detector = DeckDetector(
        cfg.detection, cfg.camera.intrinsics, det_rng, cfg.camera.deck_radius, cfg.camera.n_samples
    )
    record = RunRecord(_trace_columns(len(cfg.lasers.rays)))
    n_sub = sim.steps_per_frame
    frame_dt = n_sub * sim.dt
    n_ticks = int(math.floor(cfg.scenario.duration / frame_dt + 1e-9))
    min_distance = np.inf
    t = 0.0

    for tick in range(n_ticks + 1):
        t = tick * frame_dt
        lasers = laser_measure(uav, truck, cfg.lasers, laser_rng)
        triggered = trigger.update(lasers, t)
        body_T_cam = gimbal_transform(uav, mount)
        features = detector.detect(truck.deck_pose, uav.pose @ body_T_cam, t)
        cVb = velocity_twist(body_T_cam.inverse())
        snap = Snapshot(t, uav, lasers, triggered, features, cVb, truck)
        out = mission.step(snap)
        min_distance = min(min_distance, float(np.linalg.norm(uav.position - truck.deck_center)))
        err = controller.feature_error(features) if features is not None else float("nan")
        record.rows.append(
            (t, out.phase.value, out.event, *uav.position, uav.yaw, uav.gimbal_pitch,
             *truck.deck_center, *out.command.as_array(), *uav.velocity.as_array(),
             int(features is not None), err, *lasers, int(triggered))
        )
        if mission.done or tick == n_ticks:
            break
        uav, truck = advance(uav, truck, out.command, out.gimbal_pitch, sim, n_sub, truck_rng)
        _check_state(uav, t)

    result = mission.result
    if result is None:
        result = MissionResult.TIMED_OUT
    record.summary = MissionOutcome(
        seed=seed,
        result=result.value,
        approached=bool(min_distance < APPROACH_DISTANCE),
        min_distance=min_distance,
        first_detection=mission.first_detection,
        touchdown_time=mission.touchdown_time,
        detection_to_touchdown=mission.detection_to_touchdown(),
        touchdown_offset=mission.contact_offset,
        touchdown_rel_speed=mission.contact_rel_speed,
        duration=t,
    )
    log.debug("seed %d finished: %s", seed, record.summary)
    return record


@dataclass
class StaticServoTrace:
    """Per-tick history of :func:`run_static_servo`."""

    errors: np.ndarray
    positions: np.ndarray
    deck_center: np.ndarray

    @property
    def final_offset(self) -> float:
        """Horizontal distance between the body and the deck center at the last tick."""
        d = self.positions[-1, :2] - self.deck_center[:2]
        return float(np.hypot(d[0], d[1]))


def run_static_servo(
    cfg: ExperimentConfig,
    start,
    yaw: float = 0.0,
    duration: float = 20.0,
) -> StaticServoTrace:
    """Pure visual servo onto a parked deck at the origin, without the mission logic.

    The gimbal is held straight down and the features are rendered exactly
    (no image borders, no detection limits), so the loop can be followed all
    the way to the goal depth. Physics still uses ``cfg.sim``.
    """
    sim = cfg.sim
    mount = RigidTransform(translation=cfg.camera.mount_offset)
    controller = build_controller(cfg)
    deck = RigidTransform(translation=(0.0, 0.0, -DECK_HEIGHT))
    uav = UAVState(position=np.asarray(start, dtype=float), yaw=yaw, gimbal_pitch=-np.pi / 2)
    cVb = velocity_twist(gimbal_transform(uav, mount).inverse())
    n_ticks = int(math.floor(duration / (sim.steps_per_frame * sim.dt) + 1e-9))
    errors, positions = [], []
    for _ in range(n_ticks + 1):
        s = render_features(
            deck, cfg.camera.deck_radius, camera_pose(uav, mount),
            cfg.camera.intrinsics, cfg.camera.n_samples,
        )
        errors.append(controller.feature_error(s))
        positions.append(uav.position.copy())
        cmd = controller.predict(s, cVb)
        for _ in range(sim.steps_per_frame):
            uav = step_uav(uav, cmd, sim)
        _check_state(uav, 0.0)
    return StaticServoTrace(np.array(errors), np.array(positions), deck.translation)


@dataclass
class MonteCarloReport:
    n_runs: int
    landing_rate: float
    approach_rate: float
    results: dict[str, int]
    mean_time: float | None
    min_time: float | None
    max_time: float | None
    summaries: list[MissionOutcome]

    def lines(self) -> list[str]:
        out = [
            f"runs: {self.n_runs}",
            f"landing rate: {self.landing_rate:.3f}",
            f"approach rate (< {APPROACH_DISTANCE:g} m): {self.approach_rate:.3f}",
            "outcomes: " + ", ".join(f"{k}={v}" for k, v in sorted(self.results.items())),
        ]
        if self.mean_time is not None:
            out.append(
                f"detection-to-touchdown [s]: mean {self.mean_time:.2f}, "
                f"min {self.min_time:.2f}, max {self.max_time:.2f}"
            )
        return out


def _summary_only(args) -> MissionOutcome:
    cfg, seed = args
    return run_scenario(cfg, seed).summary


def aggregate(summaries: list[MissionOutcome]) -> MonteCarloReport:
    n = len(summaries)
    results: dict[str, int] = {}
    for s in summaries:
        results[s.result] = results.get(s.result, 0) + 1
    times = [s.detection_to_touchdown for s in summaries if s.detection_to_touchdown is not None]
    return MonteCarloReport(
        n_runs=n,
        landing_rate=results.get(MissionResult.LANDED.value, 0) / n if n else 0.0,
        approach_rate=sum(s.approached for s in summaries) / n if n else 0.0,
        results=results,
        mean_time=float(np.mean(times)) if times else None,
        min_time=float(np.min(times)) if times else None,
        max_time=float(np.max(times)) if times else None,
        summaries=summaries,
    )


def run_monte_carlo(
    cfg: ExperimentConfig, n_runs: int | None = None, workers: int | None = None
) -> MonteCarloReport:
    """Run seeds ``cfg.seed .. cfg.seed + n_runs - 1`` and aggregate the outcomes.

    Runs are independent; with ``workers > 1`` they are spread over processes
    and reduced here in seed order, so the report does not depend on scheduling.
    """
    n_runs = cfg.n_runs if n_runs is None else n_runs
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    if workers is None:
        workers = min(n_runs, os.cpu_count() or 1)
    jobs = [(cfg, cfg.seed + i) for i in range(n_runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(_summary_only, jobs, chunksize=max(1, n_runs // (4 * workers))))
    else:
        summaries = [_summary_only(j) for j in jobs]
    return aggregate(summaries)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def write_trace(record: RunRecord, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(TRACE_VERSION + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(record.columns)
        for row in record.rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_trace(path) -> tuple[list[str], list[dict[str, str]]]:
    path = Path(path)
    with path.open(newline="") as fh:
        first = fh.readline().rstrip("\n")
        if first != TRACE_VERSION:
            raise ValueError(f"{path}: missing trace header {TRACE_VERSION!r}")
        reader = csv.DictReader(fh)
        rows = list(reader)
        return list(reader.fieldnames or []), rows


def write_summary(summaries: list[MissionOutcome], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_FIELDS)
        for s in summaries:
            d = asdict(s)
            w.writerow([_fmt(d[k]) for k in SUMMARY_FIELDS])
    return path


def emit_outputs(records: list[RunRecord], out_dir, plots: bool = True) -> list[Path]:
    """Write one trace CSV per run, ``summary.csv``, and optionally the standard plots."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from exc
    written = [write_summary([r.summary for r in records], out / "summary.csv")]
    for r in records:
        trace = write_trace(r, out / f"trace_seed{r.summary.seed}.csv")
        written.append(trace)
        if plots:
            from .plots import plot_trace

            written.extend(plot_trace(trace, out))
    return written
