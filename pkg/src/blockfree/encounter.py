"""Closed-loop encounter simulator.

Each step, every airplane independently

1. points its desired heading at its goal,
2. picks the single most threatening neighbour,
3. estimates that neighbour's side from its heading and updates its opinion,
4. bends the desired heading by its opinion,
5. passes the result through the safety filter,

and then all airplanes move at once from the same snapshot. Heading noise is
added to the filtered command before it is applied.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .geometry import (
    AirplaneState,
    Vec2,
    bearing,
    bearing_rate,
    advance,
    normalize_angle,
)
from .opinion import OpinionParams, attention, estimate_intention, guided_heading, opinion_rate
from .safety import Branch, FilterResult, SafetyParams, barrier_h, filter_from_geometry, half_width_delta, margin_g

EPS_BETA = 1e-3
OPINION_RESET_AFTER = 1.0
SEPARATION_TOLERANCE = 1e-6

CSV_HEADER = (
    "t,id,x,y,theta,theta_star,theta_n,theta_s,z,z_est,u,delta,g,beta_dot,mode,branch,min_sep"
).split(",")


class Mode(str, enum.Enum):
    CRUISING = "cruising"
    AVOIDING = "avoiding"
    BLOCKING = "blocking"


class SimulationError(RuntimeError):
    """A run produced a non-finite quantity. ``log`` holds the rows so far."""

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log


@dataclass(frozen=True)
class AirplaneSpec:
    id: int
    start: Vec2
    goal: Vec2
    heading0: Optional[float] = None
    bias: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "start", Vec2(*map(float, self.start)))
        object.__setattr__(self, "goal", Vec2(*map(float, self.goal)))


@dataclass(frozen=True)
class Scenario:
    airplanes: tuple
    safety: SafetyParams = field(default_factory=SafetyParams)
    opinion: OpinionParams = field(default_factory=OpinionParams)
    dt: float = 0.01
    t_max: float = 200.0
    goal_radius: float = 0.1
    noise_std: float = 0.1
    seed: int = 0
    opinion_enabled: bool = True
    heading_mode: str = "direct"
    tracking_gain: float = 50.0
    name: str = "run"

    def __post_init__(self):
        object.__setattr__(self, "airplanes", tuple(self.airplanes))
        if len(self.airplanes) < 2:
            raise ValueError("a scenario needs at least two airplanes")
        ids = [a.id for a in self.airplanes]
        if len(set(ids)) != len(ids):
            raise ValueError("airplane ids must be unique")
        starts = [a.start for a in self.airplanes]
        if len(set(starts)) != len(starts):
            raise ValueError("airplane starts must be pairwise distinct")
        for name in ("dt", "t_max", "goal_radius"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if not self.noise_std >= 0.0:
            raise ValueError("noise_std must be non-negative")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.heading_mode not in ("direct", "tracked"):
            raise ValueError(f"unknown heading mode {self.heading_mode!r}")
        if not self.tracking_gain > 0.0:
            raise ValueError("tracking_gain must be positive")

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)


# -- per-step decisions ------------------------------------------------------


def desired_heading(p, goal, fallback: float = 0.0) -> float:
    if p[0] == goal[0] and p[1] == goal[1]:
        return fallback
    return bearing(p, goal)


def classify_mode(filter_active: bool, beta_dot: float, eps_beta: float = EPS_BETA) -> Mode:
    if eps_beta <= 0.0:
        raise ValueError("eps_beta must be positive")
    if not filter_active:
        return Mode.CRUISING
    if abs(beta_dot) <= eps_beta:
        return Mode.BLOCKING
    return Mode.AVOIDING


def blocking_pair_predicate(theta1_star, theta2_star, beta_12, beta_21, delta) -> bool:
    """Both airplanes are headed into mirror-image halves of their unsafe cones."""
    o1 = normalize_angle(theta1_star - beta_12)
    o2 = normalize_angle(theta2_star - beta_21)
    for s in (1.0, -1.0):
        if 0.0 <= s * o1 < delta and 0.0 <= -s * o2 < delta:
            return True
    return False


def select_threat(me: AirplaneState, others: Sequence[AirplaneState], params: SafetyParams):
    """Id of the neighbour with the widest unsafe cone, or None if all are clear.

    Ties go to the nearer airplane, then the lower id. Arrived airplanes are
    ignored.
    """
    best = None
    best_key = None
    for o in others:
        if o.id == me.id or o.arrived_at is not None:
            continue
        delta = half_width_delta(me.position, o.position, params)
        if delta <= 0.0:
            continue
        dist = math.dist(me.position, o.position)
        key = (-delta, dist, o.id)
        if best_key is None or key < best_key:
            best, best_key = o.id, key
    return best


def world_frame_tie_hint(beta: float) -> int:
    """Side for an exact tie when there is no opinion to consult.

    Picks whichever of ``beta +- delta`` points further north. Two airplanes
    facing each other head-on therefore swerve in mirror image, which is the
    deterministic behaviour that produces blocking.
    """
    return 1 if math.cos(beta) >= 0.0 else -1


class StepInfo(NamedTuple):
    """Per-airplane diagnostics of one step."""

    threat: Optional[int]
    reference: Optional[int]
    beta: float
    delta: float
    g: float
    beta_dot: float
    beta_dot_cmd: float
    result: FilterResult
    mode: Mode


@dataclass
class World:
    """Immutable snapshot of a run: every airplane's state after ``step`` steps."""

    scenario: Scenario
    airplanes: tuple
    t: float = 0.0
    step: int = 0
    info: tuple = ()
    params: dict = field(default_factory=dict)

    @classmethod
    def initial(cls, scenario: Scenario) -> "World":
        planes = []
        params = {}
        for spec in scenario.airplanes:
            theta0 = desired_heading(spec.start, spec.goal) if spec.heading0 is None else spec.heading0
            theta0 = normalize_angle(theta0)
            planes.append(
                AirplaneState(
                    id=spec.id,
                    position=spec.start,
                    heading=theta0,
                    goal=spec.goal,
                    desired_heading=theta0,
                    nominal_heading=theta0,
                    safe_heading=theta0,
                )
            )
            # per-airplane bias adds to the shared one
            params[spec.id] = replace(scenario.opinion, bias=scenario.opinion.bias + spec.bias)
        return cls(scenario, tuple(planes), params=params)

    @property
    def done(self) -> bool:
        return all(a.arrived for a in self.airplanes)


class _Flight:
    """Mutable working copy of one airplane, private to the step loop.

    ``run_scenario`` keeps these across steps; ``step_world`` builds them from
    a ``World`` and converts back, so both go through ``_step``.
    """

    __slots__ = (
        "id", "x", "y", "heading", "goal", "z", "calm", "arrived_at", "params",
        "theta_star", "theta_n", "theta_s", "u", "z_hat", "mode",
    )

    def __init__(self, a: AirplaneState, params: OpinionParams):
        self.id = a.id
        self.x, self.y = a.position
        self.heading = a.heading
        self.goal = a.goal
        self.z = a.opinion
        self.calm = a.calm_time
        self.arrived_at = a.arrived_at
        self.params = params
        self.theta_star = a.desired_heading
        self.theta_n = a.nominal_heading
        self.theta_s = a.safe_heading
        self.u = a.attention
        self.z_hat = a.opinion_estimate
        self.mode = a.mode

    def state(self) -> AirplaneState:
        return AirplaneState(
            id=self.id,
            position=Vec2(self.x, self.y),
            heading=self.heading,
            goal=self.goal,
            desired_heading=self.theta_star,
            nominal_heading=self.theta_n,
            safe_heading=self.theta_s,
            opinion=self.z,
            attention=self.u,
            mode=self.mode,
            opinion_estimate=self.z_hat,
            calm_time=self.calm,
            arrived_at=self.arrived_at,
        )


def _scan(me, flights, params):
    """One pass giving ``select_threat``'s choice and the nearest active
    neighbour."""
    threat = None
    threat_key = None
    nearest = None
    near_d = math.inf
    px, py = me.x, me.y
    r2 = params.r * params.r
    scale = params.alpha_cbf / (4.0 * params.v)
    for o in flights:
        if o is me or o.arrived_at is not None:
            continue
        dist = math.hypot(px - o.x, py - o.y)
        if dist < near_d:
            nearest, near_d = o, dist
        # same value as half_width_delta, without recomputing the distance
        if dist == 0.0:
            delta = HALF_PI
        else:
            delta = math.acos(min(1.0, max(0.0, scale * (dist * dist - r2) / dist)))
        if delta <= 0.0:
            continue
        key = (-delta, dist, o.id)
        if threat_key is None or key < threat_key:
            threat, threat_key = o, key
    return threat, nearest


_NAN = float("nan")
HALF_PI = 0.5 * math.pi


def _decide(sc: Scenario, f: _Flight, flights):
    """Everything airplane ``f`` decides from the pre-step snapshot.

    The pairwise quantities (h, beta, delta, g, z_hat, beta_dot) are computed
    from one relative-position vector; they equal ``barrier_h``, ``bearing``,
    ``half_width_delta``, ``margin_g``, ``estimate_intention`` and
    ``bearing_rate`` on the same inputs.
    """
    sp = sc.safety
    v = sp.v
    px, py = f.x, f.y
    gx, gy = f.goal
    theta_star = f.heading if (px == gx and py == gy) else normalize_angle(math.atan2(gy - py, gx - px))
    threat, nearest = _scan(f, flights, sp)
    ref = threat if threat is not None else nearest
    z = f.z
    z_new = 0.0
    u = z_hat = 0.0
    if ref is None:
        beta = delta = g = beta_dot = _NAN
        theta_n = theta_star
        res = FilterResult(theta_star, False, Branch.OTHERWISE, 0.0)
    else:
        rx = ref.x - px
        ry = ref.y - py
        d2 = rx * rx + ry * ry
        dist = math.sqrt(d2)
        h = d2 - sp.r * sp.r
        beta = normalize_angle(math.atan2(ry, rx))
        z_hat = normalize_angle(ref.heading - math.atan2(-ry, -rx))
        ca, sa = math.cos(f.heading), math.sin(f.heading)
        cr, sr = math.cos(ref.heading), math.sin(ref.heading)
        beta_dot = v * (rx * (sr - sa) - ry * (cr - ca)) / d2
        g = 0.5 * sp.alpha_cbf * h - 2.0 * v * (rx * math.cos(theta_star) + ry * math.sin(theta_star))
        if h < 0.0:
            delta = HALF_PI
        else:
            delta = math.acos(min(1.0, sp.alpha_cbf * h / (4.0 * v * dist)))
        params = f.params
        if threat is not None and g < 0.0:
            u = params.k1 / (abs(beta_dot) + params.k2)
        if sc.opinion_enabled:
            z_new = z + sc.dt * (-params.d * z + u * math.tanh(params.a_self * z + params.gamma * z_hat + params.bias))
            theta_n = guided_heading(theta_star, beta, z, params.k_z)
            hint = (1 if z > 0.0 else -1) if z != 0.0 else world_frame_tie_hint(beta)
        else:
            theta_n = theta_star
            hint = world_frame_tie_hint(beta)
        res = filter_from_geometry(theta_n, beta, h, delta, hint)
    calm = f.calm + sc.dt if u == 0.0 else 0.0
    if calm >= OPINION_RESET_AFTER - 1e-9:
        z_new = 0.0
    return theta_star, theta_n, res, ref, threat, beta, delta, g, beta_dot, u, z_hat, z_new, calm


_MODE_VALUE = {m: m.value for m in Mode}


def _step(sc: Scenario, flights: list, t_new: float, noise) -> list:
    """Advance ``flights`` in place by one synchronous step; returns a
    ``StepInfo`` per airplane (None for airplanes already arrived)."""
    v = sc.safety.v
    dt = sc.dt
    try:
        decisions = [None if f.arrived_at is not None else _decide(sc, f, flights) for f in flights]
    except ValueError as exc:  # non-finite angle reached normalize_angle
        raise SimulationError(f"non-finite state at t={t_new:.4f}: {exc}") from exc
    # pre-step positions and commanded velocities, for the noise-free bearing
    # rate used by the labels; arrived airplanes command zero velocity
    snap = {}
    for f, dec in zip(flights, decisions):
        if dec is None:
            snap[f.id] = (f.x, f.y, 0.0, 0.0)
        else:
            hs = dec[2].safe_heading
            snap[f.id] = (f.x, f.y, v * math.cos(hs), v * math.sin(hs))
    infos = []
    mode_name = _MODE_VALUE
    for k, f in enumerate(flights):
        dec = decisions[k]
        if dec is None:
            infos.append(None)
            continue
        theta_star, theta_n, res, ref, threat, beta, delta, g, beta_dot, u, z_hat, z_new, calm = dec
        if not (math.isfinite(res.safe_heading) and math.isfinite(z_new) and math.isfinite(theta_n)):
            raise SimulationError(f"non-finite state for airplane {f.id} at t={t_new:.4f}")
        x0, y0, vx, vy = snap[f.id]
        if ref is None:
            beta_dot_cmd = _NAN
            mode = Mode.CRUISING
        else:
            # ref may already have moved this step; use the snapshot
            x1, y1, wx, wy = snap[ref.id]
            rx, ry = x1 - x0, y1 - y0
            beta_dot_cmd = (rx * (wy - vy) - ry * (wx - vx)) / (rx * rx + ry * ry)
            mode = classify_mode(res.active, beta_dot_cmd)
        f.heading, (f.x, f.y) = advance(
            (x0, y0), f.heading, res.safe_heading + noise[k], dt, v, sc.heading_mode, sc.tracking_gain
        )
        f.z = z_new
        f.calm = calm
        f.theta_star, f.theta_n, f.theta_s = theta_star, theta_n, res.safe_heading
        f.u, f.z_hat, f.mode = u, z_hat, mode_name[mode]
        if math.hypot(f.x - f.goal[0], f.y - f.goal[1]) <= sc.goal_radius:
            f.arrived_at = t_new
        infos.append(
            StepInfo(None if threat is None else threat.id, None if ref is None else ref.id,
                     beta, delta, g, beta_dot, beta_dot_cmd, res, mode)
        )
    return infos


def step_world(world: World, rng: np.random.Generator, noise=None) -> World:
    """Advance every airplane by one step from the same snapshot.

    ``noise`` optionally supplies this step's heading perturbations (one per
    airplane, in order); otherwise they are drawn from ``rng``.
    """
    sc = world.scenario
    n = len(world.airplanes)
    if noise is None:
        noise = rng.normal(0.0, sc.noise_std, n).tolist() if sc.noise_std > 0.0 else [0.0] * n
    flights = [_Flight(a, world.params[a.id]) for a in world.airplanes]
    t_new = (world.step + 1) * sc.dt
    infos = _step(sc, flights, t_new, noise)
    planes = tuple(
        a if info is None else f.state() for a, f, info in zip(world.airplanes, flights, infos)
    )
    return World(sc, planes, t_new, world.step + 1, tuple(infos), world.params)


# -- logging and metrics -----------------------------------------------------


class TrajectoryLog:
    """Row-per-airplane-per-step record of a run.

    Rows are tuples in ``CSV_HEADER`` order; ``id`` is an int and ``mode`` and
    ``branch`` are lowercase strings, everything else is a float.
    """

    columns = tuple(CSV_HEADER)

    def __init__(self):
        self.rows: list[tuple] = []
        # threat id per row (None when no neighbour is inside its cone);
        # kept beside the rows because it is not part of the CSV
        self.threats: list[Optional[int]] = []

    def __len__(self):
        return len(self.rows)

    def column(self, name: str, plane_id: Optional[int] = None) -> np.ndarray:
        k = self.columns.index(name)
        rows = self.rows if plane_id is None else [r for r in self.rows if r[1] == plane_id]
        if name in ("mode", "branch"):
            return np.array([r[k] for r in rows], dtype=object)
        return np.array([r[k] for r in rows], dtype=float)

    def plane_ids(self) -> list[int]:
        return sorted({r[1] for r in self.rows})

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow(
                [x if isinstance(x, (str, int)) and not isinstance(x, bool) else f"{x:.9g}" for x in r]
            )

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


@dataclass
class AirplaneMetrics:
    id: int
    flight_time: Optional[float]
    path_length: float
    blocking_dwell: float
    reached_goal: bool
    filter_active_time: float = 0.0


@dataclass
class RunMetrics:
    airplanes: list
    min_separation: float
    violation_count: int
    infeasible_count: int = 0
    t_end: float = 0.0

    def by_id(self, plane_id: int) -> AirplaneMetrics:
        return next(m for m in self.airplanes if m.id == plane_id)

    @property
    def all_reached(self) -> bool:
        return all(m.reached_goal for m in self.airplanes)

    @property
    def max_blocking_dwell(self) -> float:
        return max(m.blocking_dwell for m in self.airplanes)

    def to_dict(self) -> dict:
        return {
            "min_separation": self.min_separation,
            "violation_count": self.violation_count,
            "infeasible_count": self.infeasible_count,
            "t_end": self.t_end,
            "airplanes": [vars(m).copy() for m in self.airplanes],
        }


def _min_separation(points) -> float:
    if len(points) == 2:
        (x0, y0), (x1, y1) = points
        return math.hypot(x0 - x1, y0 - y1)
    best = math.inf
    for i in range(len(points)):
        xi, yi = points[i]
        for j in range(i + 1, len(points)):
            d = math.hypot(xi - points[j][0], yi - points[j][1])
            if d < best:
                best = d
    return best


def run_scenario(scenario: Scenario, record: bool = True):
    """Simulate until every airplane is within ``goal_radius`` or ``t_max``.

    Returns ``(log, metrics)``; ``log`` is None when ``record`` is False.
    Identical scenarios (seed included) give bit-identical logs. The noise
    stream is the one ``step_world`` would draw from the same generator.
    """
    rng = np.random.default_rng(int(scenario.seed))
    world = World.initial(scenario)
    flights = [_Flight(a, world.params[a.id]) for a in world.airplanes]
    log = TrajectoryLog() if record else None
    n_steps = int(round(scenario.t_max / scenario.dt))
    r_tol = scenario.safety.r - SEPARATION_TOLERANCE
    n = len(flights)
    path = [0.0] * n
    run = [0] * n
    longest = [0] * n
    active_steps = [0] * n
    min_sep = _min_separation([(f.x, f.y) for f in flights])
    violations = 0
    infeasible = 0
    step_len = scenario.safety.v * scenario.dt
    blocking = Mode.BLOCKING
    # drawing the noise in blocks yields the same stream as per-step draws
    chunk = 512
    block: list = []
    zeros = [0.0] * n
    t = 0.0
    for k in range(n_steps):
        flying = [f for f in flights if f.arrived_at is None]
        if not flying:
            break
        if scenario.noise_std > 0.0:
            if k % chunk == 0:
                block = rng.normal(0.0, scenario.noise_std, (chunk, n)).tolist()
            noise = block[k % chunk]
        else:
            noise = zeros
        t = (k + 1) * scenario.dt
        try:
            infos = _step(scenario, flights, t, noise)
        except SimulationError as exc:
            exc.log = log
            raise
        # separation among the airplanes that were flying during this step
        sep = _min_separation([(f.x, f.y) for f in flying]) if len(flying) > 1 else math.inf
        if sep < min_sep:
            min_sep = sep
        if sep < r_tol:
            violations += 1
        for i, info in enumerate(infos):
            if info is None:
                continue
            path[i] += step_len
            res = info.result
            if res.infeasible:
                infeasible += 1
            if res.active:
                active_steps[i] += 1
            if info.mode is blocking:
                run[i] += 1
                if run[i] > longest[i]:
                    longest[i] = run[i]
            else:
                run[i] = 0
            if log is not None:
                f = flights[i]
                log.threats.append(info.threat)
                log.rows.append(
                    (
                        t, f.id, f.x, f.y, f.heading, f.theta_star, f.theta_n, f.theta_s,
                        f.z, f.z_hat, f.u, info.delta, info.g, info.beta_dot,
                        f.mode, res.branch.value, sep,
                    )
                )

    dt = scenario.dt
    metrics = RunMetrics(
        airplanes=[
            AirplaneMetrics(
                id=f.id,
                flight_time=f.arrived_at,
                path_length=path[i],
                blocking_dwell=longest[i] * dt,
                reached_goal=f.arrived_at is not None,
                filter_active_time=active_steps[i] * dt,
            )
            for i, f in enumerate(flights)
        ],
        min_separation=min_sep,
        violation_count=violations,
        infeasible_count=infeasible,
        t_end=t,
    )
    return log, metrics
