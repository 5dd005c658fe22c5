"""Two-option nonlinear opinion dynamics for choosing a bypass side.

The sign of an airplane's opinion ``z`` encodes its side: positive means it
prefers to bypass on the right, which steers its nominal heading towards
``bearing + pi/2``; negative steers towards ``bearing - pi/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import DegenerateGeometryError, bearing, normalize_angle


@dataclass(frozen=True)
class OpinionParams:
    d: float = 3.0
    a_self: float = 1.0
    gamma: float = 4.0
    bias: float = 0.0
    k1: float = 2.0
    k2: float = 0.1
    k_z: float = 1.0

    def __post_init__(self):
        for name in ("d", "a_self", "k1", "k2", "k_z"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0.0):
                raise ValueError(f"{name} must be positive, got {val!r}")
        for name in ("gamma", "bias"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def peak_attention(self) -> float:
        """Attention reached when the bearing is frozen, k1 / k2."""
        return self.k1 / self.k2


@dataclass(frozen=True)
class OpinionState:
    z: float = 0.0
    z_other_est: float = 0.0
    u: float = 0.0

    def __post_init__(self):
        if not self.u >= 0.0:
            raise ValueError("attention must be non-negative")
        if not (math.isfinite(self.z) and math.isfinite(self.z_other_est)):
            raise ValueError("opinion state must be finite")


def attention(g_of_theta_star: float, beta_dot: float, params: OpinionParams) -> float:
    """Attention grows as the bearing rate falls, but only while the desired
    heading itself violates the barrier condition."""
    if g_of_theta_star >= 0.0:
        return 0.0
    return params.k1 / (abs(beta_dot) + params.k2)


def opinion_rate(z: float, z_other: float, u: float, params: OpinionParams) -> float:
    return -params.d * z + u * math.tanh(params.a_self * z + params.gamma * z_other + params.bias)


def opinion_step(state: OpinionState, params: OpinionParams, dt: float) -> OpinionState:
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    z = state.z + dt * opinion_rate(state.z, state.z_other_est, state.u, params)
    return OpinionState(z, state.z_other_est, state.u)


def guided_heading(theta_star: float, beta: float, z: float, k_z: float) -> float:
    """Blend the desired heading towards a perpendicular bypass of the bearing.

    At ``z = 0`` this is ``theta_star``; as ``tanh(k_z z) -> +-1`` it tends to
    ``beta +- pi/2``.
    """
    t = math.tanh(k_z * z)
    if t == 0.0:
        # exactly theta_star, signed zero included, so a neutral opinion
        # leaves the trajectory bit-identical to running without opinions
        return normalize_angle(theta_star)
    return normalize_angle(theta_star + abs(t) * normalize_angle(beta - theta_star) + t * 0.5 * math.pi)


def estimate_intention(theta_other: float, p_other, p_self) -> float:
    """Read the other airplane's side from how its heading deviates from the
    bearing it has towards us. Radians are used directly as the estimate."""
    if p_other[0] == p_self[0] and p_other[1] == p_self[1]:
        raise DegenerateGeometryError("intention estimate between coincident points")
    return normalize_angle(theta_other - bearing(p_other, p_self))


def critical_attention(d: float, kappa: float) -> float:
    """Shared attention at which the neutral opinion loses stability."""
    if not (d > 0.0 and kappa > 0.0):
        raise ValueError("d and kappa must be positive")
    return d / (2.0 * kappa)


def candidate_kappas(params: OpinionParams) -> dict[str, float]:
    """Coupling strengths that could stand in for kappa when self-weight and
    coupling differ."""
    return {
        "a_self": params.a_self,
        "gamma": params.gamma,
        "mean": 0.5 * (params.a_self + params.gamma),
    }


def check_gain_condition(params: OpinionParams) -> dict[str, float]:
    """Margins ``k1/k2 - d/(2 kappa)`` for each candidate kappa.

    Raises ``ValueError`` if any margin is not strictly positive, since the
    frozen-bearing attention must exceed the bifurcation point.
    """
    margins = {
        name: params.peak_attention - critical_attention(params.d, kappa)
        for name, kappa in candidate_kappas(params).items()
        if kappa > 0.0
    }
    bad = {k: m for k, m in margins.items() if m <= 0.0}
    if bad:
        raise ValueError(f"k1/k2 does not exceed the critical attention: {bad}")
    return margins
