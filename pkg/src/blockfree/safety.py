"""Barrier function, decentralized CBF margin and the closed-form safety filter.

The filter projects a nominal heading onto the set of headings that keep the
pairwise barriers non-decreasing fast enough. With one neighbour the unsafe
headings form an open cone of half-width ``delta`` around the bearing to the
neighbour, so the projection has a closed form.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .geometry import DegenerateGeometryError, bearing, normalize_angle

HALF_PI = 0.5 * math.pi


class OracleInfeasibleError(RuntimeError):
    pass


class Branch(enum.Enum):
    OTHERWISE = "otherwise"
    PLUS_DELTA = "plus_delta"
    MINUS_DELTA = "minus_delta"
    TIE_BREAK = "tie_break"


@dataclass(frozen=True)
class SafetyParams:
    r: float = 1.0
    v: float = 1.0
    alpha_cbf: float = 1.0
    g_tolerance: float = 1e-9

    def __post_init__(self):
        for name in ("r", "v", "alpha_cbf"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0.0):
                raise ValueError(f"{name} must be positive, got {val!r}")
        if not self.g_tolerance >= 0.0:
            raise ValueError("g_tolerance must be non-negative")


class FilterResult(NamedTuple):
    safe_heading: float
    active: bool
    branch: Branch
    delta: float = 0.0
    # set when the pair is already inside the margin and no heading satisfies
    # the condition; the heading is then a perpendicular escape
    infeasible: bool = False


def barrier_h(p1, p2, params: SafetyParams) -> float:
    dx = p1[0] - p2[0]
    dy = p1[1] - p2[1]
    return dx * dx + dy * dy - params.r * params.r


def margin_g(p_i, p_j, theta: float, params: SafetyParams) -> float:
    """Left-hand side of the decentralized CBF condition for airplane i.

    Non-negative means heading ``theta`` is admissible for i given j.
    """
    dx = p_i[0] - p_j[0]
    dy = p_i[1] - p_j[1]
    if dx == 0.0 and dy == 0.0:
        raise DegenerateGeometryError("margin between coincident points")
    h = dx * dx + dy * dy - params.r * params.r
    return 0.5 * params.alpha_cbf * h + 2.0 * params.v * (dx * math.cos(theta) + dy * math.sin(theta))


def half_width_delta(p_i, p_j, params: SafetyParams) -> float:
    """Half-width of the cone of unsafe headings around the bearing to j.

    Zero when the airplanes are far apart, pi/2 at separation r. Inside the
    margin (h < 0) the argument would go negative; it is clamped, so the
    result stays pi/2 and the filter treats the pair as infeasible.
    """
    dx = p_i[0] - p_j[0]
    dy = p_i[1] - p_j[1]
    dist = math.hypot(dx, dy)
    if dist == 0.0:
        return HALF_PI
    h = dist * dist - params.r * params.r
    arg = params.alpha_cbf * h / (4.0 * params.v * dist)
    return math.acos(min(1.0, max(0.0, arg)))


def safety_filter(
    theta_star: float,
    p_i,
    p_j,
    params: SafetyParams,
    tie_hint: int = 1,
) -> FilterResult:
    """Nearest admissible heading to ``theta_star`` (closed form).

    ``tie_hint`` picks the side when ``theta_star`` points exactly at j, and
    the escape side when the pair is already inside the margin.
    """
    beta = bearing(p_i, p_j)
    h = barrier_h(p_i, p_j, params)
    delta = half_width_delta(p_i, p_j, params) if h >= 0.0 else HALF_PI
    return filter_from_geometry(theta_star, beta, h, delta, tie_hint)


def filter_from_geometry(theta_star: float, beta: float, h: float, delta: float, tie_hint: int = 1) -> FilterResult:
    """``safety_filter`` with the bearing, barrier value and cone width
    already computed; the simulator uses it to avoid repeating them."""
    hint = 1 if tie_hint >= 0 else -1
    if h < 0.0:
        return FilterResult(
            normalize_angle(beta + hint * HALF_PI),
            True,
            Branch.PLUS_DELTA if hint > 0 else Branch.MINUS_DELTA,
            HALF_PI,
            True,
        )
    theta_star = normalize_angle(theta_star)
    offset = normalize_angle(theta_star - beta)
    if delta == 0.0 or abs(offset) >= delta:
        return FilterResult(theta_star, False, Branch.OTHERWISE, delta)
    if offset == 0.0:
        return FilterResult(normalize_angle(beta + hint * delta), True, Branch.TIE_BREAK, delta)
    if offset > 0.0:
        return FilterResult(normalize_angle(beta + delta), True, Branch.PLUS_DELTA, delta)
    return FilterResult(normalize_angle(beta - delta), True, Branch.MINUS_DELTA, delta)


# -- brute-force reference -------------------------------------------------

ORACLE_RESOLUTION = 1e-4


@lru_cache(maxsize=1)
def _oracle_grid():
    grid = -math.pi + ORACLE_RESOLUTION * np.arange(int(2 * math.pi / ORACLE_RESOLUTION))
    return grid, np.cos(grid), np.sin(grid)


def _bisect_boundary(feasible_theta, infeasible_theta, g, iters=60):
    a, b = feasible_theta, infeasible_theta
    for _ in range(iters):
        mid = 0.5 * (a + b)
        if g(mid) >= 0.0:
            a = mid
        else:
            b = mid
    return a


def qp_oracle_minimizers(theta_star, p_i, p_j, params: SafetyParams) -> list[float]:
    """All minimizers of ``0.5 * angdiff(theta, theta_star)**2`` s.t. g >= 0.

    Dense grid search followed by bisection on the constraint boundary. It
    only evaluates ``margin_g``; it never uses the closed-form cone width.
    Intended for tests.
    """
    if barrier_h(p_i, p_j, params) < 0.0:
        raise OracleInfeasibleError("oracle requires h >= 0")
    theta_star = normalize_angle(theta_star)

    def g(theta):
        return margin_g(p_i, p_j, theta, params)

    if g(theta_star) >= 0.0:
        return [theta_star]

    grid, c, s = _oracle_grid()
    dx = p_i[0] - p_j[0]
    dy = p_i[1] - p_j[1]
    h = dx * dx + dy * dy - params.r**2
    gv = 0.5 * params.alpha_cbf * h + 2.0 * params.v * (dx * c + dy * s)
    # signed offset from theta_star, wrapped to [-pi, pi)
    off = np.mod(grid - theta_star + math.pi, 2 * math.pi) - math.pi
    feasible = gv >= 0.0
    if not feasible.any():
        raise OracleInfeasibleError("no admissible heading on the grid")

    candidates = []
    for side in (1.0, -1.0):
        mask = feasible & (side * off > 0.0)
        if not mask.any():
            continue
        k = np.flatnonzero(mask)[np.argmin(np.abs(off[mask]))]
        outer = theta_star + float(off[k])
        inner = outer - side * ORACLE_RESOLUTION
        if g(inner) >= 0.0:
            # grid landed exactly on the boundary region; step inwards once more
            inner -= side * ORACLE_RESOLUTION
        candidates.append(_bisect_boundary(outer, inner, g))

    cost = [abs(normalize_angle(t - theta_star)) for t in candidates]
    best = min(cost)
    return [normalize_angle(t) for t, cst in zip(candidates, cost) if cst - best <= 1e-9]


def qp_oracle_filter(theta_star, p_i, p_j, params: SafetyParams) -> float:
    return qp_oracle_minimizers(theta_star, p_i, p_j, params)[0]
