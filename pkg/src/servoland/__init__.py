"""Simulation and control stack for landing a quadrotor on a moving ground vehicle with
image-based visual servoing."""
from .camera import (
    CameraIntrinsics,
    DeckDetector,
    DetectionModel,
    EllipseFitter,
    fit_ellipse,
)
from .config import ConfigError, ExperimentConfig, load_config, with_overrides
from .harness import RunRecord, SimulationInvariantError, run_monte_carlo, run_scenario
from .ibvs import CommandVelocity, IBVSController, interaction_block, pseudo_inverse
from .mission import Mission, MissionConfig, MissionPhase, MissionResult
from .se3 import RigidTransform, Twist, velocity_twist

__version__ = "0.1.0"

__all__ = [
    "CameraIntrinsics",
    "CommandVelocity",
    "ConfigError",
    "DeckDetector",
    "DetectionModel",
    "EllipseFitter",
    "ExperimentConfig",
    "IBVSController",
    "Mission",
    "MissionConfig",
    "MissionPhase",
    "MissionResult",
    "RigidTransform",
    "RunRecord",
    "SimulationInvariantError",
    "Twist",
    "fit_ellipse",
    "interaction_block",
    "load_config",
    "pseudo_inverse",
    "run_monte_carlo",
    "run_scenario",
    "velocity_twist",
    "with_overrides",
]
