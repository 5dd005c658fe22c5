"""Planar geometry shared by the filter, the opinion layer and the simulator.

Angles are plain floats in radians; every function that returns an angle
returns it normalized to the half-open range [-pi, pi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

TWO_PI = 2.0 * math.pi


class DegenerateGeometryError(ValueError):
    """Raised when two points coincide and a direction is undefined."""


class Vec2(NamedTuple):
    x: float
    y: float

    def __add__(self, other):  # type: ignore[override]
        return Vec2(self.x + other[0], self.y + other[1])

    def __sub__(self, other):
        return Vec2(self.x - other[0], self.y - other[1])

    def __mul__(self, s):  # type: ignore[override]
        return Vec2(self.x * s, self.y * s)

    __rmul__ = __mul__

    def __neg__(self):
        return Vec2(-self.x, -self.y)

    def dot(self, other) -> float:
        return self.x * other[0] + self.y * other[1]

    def cross(self, other) -> float:
        return self.x * other[1] - self.y * other[0]

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    @classmethod
    def polar(cls, length: float, angle: float) -> "Vec2":
        return cls(length * math.cos(angle), length * math.sin(angle))


def normalize_angle(a: float) -> float:
    """Wrap ``a`` into [-pi, pi) using a non-negative modulo."""
    if -math.pi <= a < math.pi:
        return a
    if not math.isfinite(a):
        raise ValueError(f"cannot normalize non-finite angle {a!r}")
    # Python's % already returns a value in [0, 2pi) for a positive modulus.
    w = (a + math.pi) % TWO_PI - math.pi
    # (a + pi) % 2pi can round up to exactly 2pi for tiny negative inputs.
    if w >= math.pi:
        w -= TWO_PI
    return w


def angle_diff(a: float, b: float) -> float:
    """Signed shortest rotation from ``b`` to ``a``."""
    return normalize_angle(a - b)


def bearing(p_i, p_j) -> float:
    """World-frame direction of ``p_j`` seen from ``p_i``."""
    dx = p_j[0] - p_i[0]
    dy = p_j[1] - p_i[1]
    if dx == 0.0 and dy == 0.0:
        raise DegenerateGeometryError("bearing between coincident points")
    return normalize_angle(math.atan2(dy, dx))


def bearing_rate(p_i, p_j, v_i, v_j) -> float:
    """Time derivative of the bearing from ``p_i`` to ``p_j``.

    The 2-D cross product of relative position and relative velocity over
    the squared distance. Swapping the roles of i and j flips both factors,
    so the value is symmetric.
    """
    rx = p_j[0] - p_i[0]
    ry = p_j[1] - p_i[1]
    d2 = rx * rx + ry * ry
    if d2 == 0.0:
        raise DegenerateGeometryError("bearing rate between coincident points")
    wx = v_j[0] - v_i[0]
    wy = v_j[1] - v_i[1]
    return (rx * wy - ry * wx) / d2


def velocity(heading: float, v: float) -> Vec2:
    return Vec2(v * math.cos(heading), v * math.sin(heading))


@dataclass(frozen=True, slots=True)
class AirplaneState:
    """Kinematic and decision state of one airplane at one instant.

    Speed is not stored: every airplane flies at the scenario's common ``v``.
    """

    id: int
    position: Vec2
    heading: float
    goal: Vec2
    desired_heading: float = 0.0
    nominal_heading: float = 0.0
    safe_heading: float = 0.0
    opinion: float = 0.0
    attention: float = 0.0
    mode: str = "cruising"
    opinion_estimate: float = 0.0
    # time attention has been continuously zero; drives the opinion reset
    calm_time: float = 0.0
    arrived_at: Optional[float] = None

    def __post_init__(self):
        if self.attention < 0.0:
            raise ValueError("attention must be non-negative")

    @property
    def arrived(self) -> bool:
        return self.arrived_at is not None


def integrate_position(
    state: AirplaneState,
    commanded_heading: float,
    dt: float,
    v: float,
    mode: str = "direct",
    gain: float = 50.0,
) -> AirplaneState:
    """Advance one airplane by a single explicit Euler step.

    ``mode="direct"`` snaps the heading to the command (the high-gain limit).
    ``mode="tracked"`` moves the heading with ``-gain * (heading - command)``
    and no feed-forward term. In both modes the position step uses the
    updated heading, so ``|dp| == v * dt`` exactly.
    """
    heading, position = advance(state.position, state.heading, commanded_heading, dt, v, mode, gain)
    return AirplaneState(
        id=state.id,
        position=position,
        heading=heading,
        goal=state.goal,
        desired_heading=state.desired_heading,
        nominal_heading=state.nominal_heading,
        safe_heading=state.safe_heading,
        opinion=state.opinion,
        attention=state.attention,
        mode=state.mode,
        opinion_estimate=state.opinion_estimate,
        calm_time=state.calm_time,
        arrived_at=state.arrived_at,
    )


def advance(position, heading, commanded_heading, dt, v, mode="direct", gain=50.0):
    """Kinematic core of ``integrate_position``: returns ``(heading, position)``."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if mode == "direct":
        heading = normalize_angle(commanded_heading)
    elif mode == "tracked":
        err = normalize_angle(heading - commanded_heading)
        heading = normalize_angle(heading - dt * gain * err)
    else:
        raise ValueError(f"unknown heading mode {mode!r}")
    step = v * dt
    return heading, Vec2(position[0] + step * math.cos(heading), position[1] + step * math.sin(heading))
