"""Landing mission state machine and the straight-line path tracker."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .ibvs import ZERO_COMMAND, CommandVelocity, IBVSController, feed_forward
from .se3 import rot_z
from .world import DECK_SIZE, TruckState, UAVState


class MissionPhase(str, enum.Enum):
    FLY_TO_HOVER = "FlyToHover"
    HOVER = "Hover"
    CATCH_UP = "CatchUp"
    VISUAL_SERVO = "VisualServo"
    BLIND_FINAL = "BlindFinal"
    TOUCHDOWN = "Touchdown"
    MOTORS_OFF = "MotorsOff"
    ABORTED = "Aborted"


class SwitchCriterion(str, enum.Enum):
    VISION_BASED = "vision"
    TIMING_BASED = "timing"


class MissionResult(str, enum.Enum):
    LANDED = "Landed"
    LOST_TARGET = "LostTarget"
    TIMED_OUT = "TimedOut"
    MISSED_DECK = "MissedDeck"


class Contact(str, enum.Enum):
    NONE = "none"
    LANDED = "landed"
    MISSED = "missed"


P = MissionPhase
TRANSITIONS = {
    P.FLY_TO_HOVER: {P.HOVER},
    P.HOVER: {P.CATCH_UP},
    P.CATCH_UP: {P.VISUAL_SERVO, P.ABORTED},
    P.VISUAL_SERVO: {P.BLIND_FINAL, P.TOUCHDOWN, P.ABORTED},
    P.BLIND_FINAL: {P.TOUCHDOWN, P.ABORTED},
    P.TOUCHDOWN: {P.MOTORS_OFF, P.ABORTED},
    P.MOTORS_OFF: set(),
    P.ABORTED: set(),
}
TERMINAL = {P.MOTORS_OFF, P.ABORTED}
#: Phases after the drive-under trigger in which a detection counts as "first detection".
ENGAGED = {P.CATCH_UP, P.VISUAL_SERVO, P.BLIND_FINAL, P.TOUCHDOWN, P.MOTORS_OFF}


class InvalidTransitionError(RuntimeError):
    pass


def catch_up_time(truck_speed: float, delta: float, lag_tau: float) -> float:
    """Time for a first-order-lag UAV starting at rest and commanded ``truck_speed + delta``
    to reach the truck's speed.

    Up to this moment the truck pulls away; afterwards the UAV is faster and
    the gap shrinks, which the visual servo then closes with the deck in view.
    Closed form of ``(V + d) * (1 - exp(-t / tau)) = V``.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if truck_speed < 0 or lag_tau < 0:
        raise ValueError("truck_speed and lag_tau must be non-negative")
    return float(lag_tau * np.log((truck_speed + delta) / delta))


@dataclass(frozen=True)
class MissionConfig:
    hover_point: tuple[float, float] = (0.0, 0.0)
    hover_height: float = 4.0
    hover_tolerance: float = 0.3
    hover_gimbal_pitch: float = -np.pi / 2
    catch_up_delta: float = 1.39
    switch_criterion: SwitchCriterion = SwitchCriterion.VISION_BASED
    t_a: float | None = None
    catch_up_timeout: float = 6.0
    blind_range: float = 0.9
    blind_final_periods: int = 15
    blind_final_height: float = 0.3
    blind_descent_speed: float = 3.5
    touchdown_descent_speed: float = 4.0
    touchdown_timeout: float = 3.0
    abort_timeout: float = 2.0
    truck_speed_assumed: float = 4.17
    truck_direction_assumed: tuple[float, float, float] = (1.0, 0.0, 0.0)
    track_gain: float = 1.0
    yaw_gain: float = 1.0
    contact_height: float = 0.05
    magnet_speed_tolerance: float = 1.0
    occupied_margin: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "switch_criterion", SwitchCriterion(self.switch_criterion))
        d = np.asarray(self.truck_direction_assumed, dtype=float)
        if d.shape != (3,) or abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError("truck_direction_assumed must be a unit vector")
        if not self.hover_height > 1.5:
            raise ValueError("hover_height must be above the deck height")
        if not self.catch_up_delta > 0:
            raise ValueError("catch_up_delta must be positive")
        if self.blind_final_periods < 1:
            raise ValueError("blind_final_periods must be at least 1")
        if self.t_a is not None and self.t_a < 0:
            raise ValueError("t_a must be non-negative")

    @property
    def truck_velocity_assumed(self) -> np.ndarray:
        return self.truck_speed_assumed * np.asarray(self.truck_direction_assumed, dtype=float)

    @property
    def path_heading(self) -> float:
        return float(np.arctan2(self.truck_direction_assumed[1], self.truck_direction_assumed[0]))

    @property
    def hover_position(self) -> np.ndarray:
        return np.array([self.hover_point[0], self.hover_point[1], -self.hover_height])


def path_track(
    current: UAVState,
    goal_point,
    goal_yaw: float,
    gain: float = 1.0,
    yaw_gain: float = 1.0,
    max_horiz_speed: float = 8.33,
    max_vert_speed: float = 4.0,
) -> CommandVelocity:
    """Saturated proportional velocity toward ``goal_point`` plus a yaw-rate P-law."""
    err_world = np.asarray(goal_point, dtype=float) - current.position
    v = gain * (rot_z(current.yaw).T @ err_world)
    h = np.hypot(v[0], v[1])
    if h > max_horiz_speed:
        v[:2] *= max_horiz_speed / h
    v[2] = np.clip(v[2], -max_vert_speed, max_vert_speed)
    yaw_err = (goal_yaw - current.yaw + np.pi) % (2 * np.pi) - np.pi
    return CommandVelocity(v[0], v[1], v[2], yaw_gain * yaw_err)


def touchdown_check(
    uav: UAVState,
    truck: TruckState,
    contact_height: float = 0.05,
    speed_tolerance: float = 1.0,
) -> Contact:
    """Contact outcome once the UAV is within ``contact_height`` of the deck-top level."""
    rel_height = uav.altitude - truck.deck_height
    if rel_height > contact_height:
        return Contact.NONE
    offset = rot_z(truck.heading).T @ (uav.position - truck.deck_center)
    half = DECK_SIZE / 2
    on_deck = abs(offset[0]) <= half and abs(offset[1]) <= half
    rel_speed = np.hypot(*(uav.world_velocity - truck.velocity)[:2])
    if on_deck and rel_speed <= speed_tolerance:
        return Contact.LANDED
    return Contact.MISSED


@dataclass
class Snapshot:
    """Everything the mission sees at one controller tick."""

    t: float
    uav: UAVState
    lasers: np.ndarray
    triggered: bool = False
    features: np.ndarray | None = None
    cVb: np.ndarray | None = None
    truck: TruckState | None = None

    @property
    def height(self) -> float:
        return float(self.lasers[0])


@dataclass
class MissionOutput:
    phase: MissionPhase
    command: CommandVelocity
    gimbal_pitch: float
    event: str = ""


@dataclass
class Mission:
    """One landing attempt. Call :meth:`step` once per controller tick."""

    config: MissionConfig
    controller: IBVSController
    lag_tau: float = 0.5
    max_horiz_speed: float = 8.33
    max_vert_speed: float = 4.0
    phase: MissionPhase = MissionPhase.HOVER
    result: MissionResult | None = None
    first_detection: float | None = None
    touchdown_time: float | None = None
    contact_offset: float | None = None
    contact_rel_speed: float | None = None
    _phase_start: float = 0.0
    _lost_since: float | None = None
    _blind_ticks: int = 0
    _last_command: CommandVelocity = field(default_factory=CommandVelocity)
    _events: list = field(default_factory=list)

    @property
    def t_a(self) -> float:
        if self.config.t_a is not None:
            return self.config.t_a
        return catch_up_time(self.config.truck_speed_assumed, self.config.catch_up_delta, self.lag_tau)

    @property
    def done(self) -> bool:
        return self.phase in TERMINAL

    def _goto(self, new: MissionPhase, t: float) -> None:
        if new not in TRANSITIONS[self.phase]:
            raise InvalidTransitionError(f"{self.phase.value} -> {new.value}")
        self._events.append(f"{self.phase.value}->{new.value}")
        self.phase = new
        self._phase_start = t
        self._lost_since = None
        self._blind_ticks = 0

    def _abort(self, t: float, result: MissionResult) -> None:
        self.result = result
        self._goto(P.ABORTED, t)

    def _ff(self, uav: UAVState) -> CommandVelocity:
        return feed_forward(self.config.truck_velocity_assumed, uav.yaw)

    def _descend(self, uav: UAVState, speed: float) -> CommandVelocity:
        return self._ff(uav) + CommandVelocity(0.0, 0.0, speed, 0.0)

    def _gimbal_target(self, snap: Snapshot) -> float:
        if snap.features is None:
            return snap.uav.gimbal_pitch
        return snap.uav.gimbal_pitch + self.controller.gimbal(snap.features)

    def _vehicle_below(self, snap: Snapshot) -> bool:
        # A vehicle parked under the hover point never produces a range drop,
        # so a nadir reading well short of the altitude also counts.
        return snap.uav.altitude - snap.height > self.config.occupied_margin

    def step(self, snap: Snapshot) -> MissionOutput:
        cfg = self.config
        t, uav = snap.t, snap.uav
        self._events = []
        gimbal = cfg.hover_gimbal_pitch

        if self.phase is P.FLY_TO_HOVER:
            if np.linalg.norm(uav.position - cfg.hover_position) <= cfg.hover_tolerance:
                self._goto(P.HOVER, t)

        if self.phase is P.HOVER and (snap.triggered or self._vehicle_below(snap)):
            self._goto(P.CATCH_UP, t)

        if self.phase is P.CATCH_UP:
            elapsed = t - self._phase_start
            if cfg.switch_criterion is SwitchCriterion.VISION_BASED:
                switch = snap.features is not None
            else:
                switch = elapsed >= self.t_a
            if switch:
                self._goto(P.VISUAL_SERVO, t)
            elif elapsed > cfg.catch_up_timeout:
                self._abort(t, MissionResult.LOST_TARGET)

        if self.phase is P.VISUAL_SERVO:
            if snap.features is not None:
                self._lost_since = None
                if snap.height <= cfg.blind_final_height:
                    self._goto(P.TOUCHDOWN, t)
            else:
                if self._lost_since is None:
                    self._lost_since = t
                if snap.height < cfg.blind_range:
                    self._goto(P.BLIND_FINAL, t)
                elif t - self._lost_since > cfg.abort_timeout:
                    self._abort(t, MissionResult.LOST_TARGET)

        if self.phase is P.BLIND_FINAL:
            if snap.height <= cfg.blind_final_height:
                self._goto(P.TOUCHDOWN, t)
            elif self._blind_ticks >= cfg.blind_final_periods:
                self._abort(t, MissionResult.LOST_TARGET)
            else:
                self._blind_ticks += 1

        if self.phase is P.TOUCHDOWN and snap.truck is not None:
            contact = touchdown_check(uav, snap.truck, cfg.contact_height, cfg.magnet_speed_tolerance)
            if contact is not Contact.NONE:
                offset = rot_z(snap.truck.heading).T @ (uav.position - snap.truck.deck_center)
                self.contact_offset = float(np.hypot(offset[0], offset[1]))
                self.contact_rel_speed = float(
                    np.hypot(*(uav.world_velocity - snap.truck.velocity)[:2])
                )
            if contact is Contact.LANDED:
                self.result = MissionResult.LANDED
                self.touchdown_time = t
                self._goto(P.MOTORS_OFF, t)
            elif contact is Contact.MISSED:
                self._abort(t, MissionResult.MISSED_DECK)
            elif t - self._phase_start > cfg.touchdown_timeout:
                self._abort(t, MissionResult.LOST_TARGET)

        # command for the phase we ended up in
        phase = self.phase
        if phase in (P.FLY_TO_HOVER, P.HOVER):
            cmd = path_track(
                uav, cfg.hover_position, cfg.path_heading,
                cfg.track_gain, cfg.yaw_gain, self.max_horiz_speed, self.max_vert_speed,
            )
        elif phase is P.CATCH_UP:
            v = (cfg.truck_speed_assumed + cfg.catch_up_delta) * np.asarray(cfg.truck_direction_assumed)
            body = rot_z(uav.yaw).T @ v
            cmd = CommandVelocity(body[0], body[1], body[2], 0.0)
            gimbal = self._gimbal_target(snap)
        elif phase is P.VISUAL_SERVO:
            if snap.features is not None:
                cmd = self.controller.predict(snap.features, snap.cVb, self._ff(uav))
            else:
                cmd = self._ff(uav)
            gimbal = self._gimbal_target(snap)
        elif phase is P.BLIND_FINAL:
            cmd = self._descend(uav, cfg.blind_descent_speed)
            gimbal = uav.gimbal_pitch
        elif phase is P.TOUCHDOWN:
            cmd = self._descend(uav, cfg.touchdown_descent_speed)
            gimbal = uav.gimbal_pitch
        else:
            cmd = ZERO_COMMAND
            gimbal = uav.gimbal_pitch
        if self.first_detection is None and snap.features is not None and phase in ENGAGED:
            self.first_detection = t
        self._last_command = cmd
        return MissionOutput(phase, cmd, gimbal, ";".join(self._events))

    def detection_to_touchdown(self) -> float | None:
        if self.result is MissionResult.LANDED and self.first_detection is not None:
            return self.touchdown_time - self.first_detection
        return None
