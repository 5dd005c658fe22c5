"""Decentralized two-airplane conflict resolution: a closed-form CBF safety
filter plus nonlinear opinion dynamics that break blocking stand-offs."""

from .encounter import AirplaneSpec, Mode, Scenario, TrajectoryLog, RunMetrics, run_scenario, step_world
from .geometry import Vec2, bearing, bearing_rate, normalize_angle
from .opinion import OpinionParams, critical_attention
from .safety import SafetyParams, safety_filter

__all__ = [
    "AirplaneSpec",
    "Mode",
    "OpinionParams",
    "RunMetrics",
    "SafetyParams",
    "Scenario",
    "TrajectoryLog",
    "Vec2",
    "bearing",
    "bearing_rate",
    "critical_attention",
    "normalize_angle",
    "run_scenario",
    "safety_filter",
    "step_world",
]
