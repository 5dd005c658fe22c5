"""Offline analysis: equilibria of the reduced two-agent opinion system,
bifurcation sweeps, the randomized encounter generator, canned scenarios
and the baseline-versus-opinion Monte Carlo harness.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .encounter import AirplaneSpec, RunMetrics, Scenario, SimulationError, TrajectoryLog, run_scenario
from .opinion import critical_attention

# -- reduced opinion system ------------------------------------------------


@dataclass(frozen=True)
class Equilibrium:
    z1: float
    z2: float
    stable: bool
    residual: float = 0.0


@dataclass(frozen=True)
class BifurcationPoint:
    u: float
    equilibria: tuple

    @property
    def n(self) -> int:
        return len(self.equilibria)


class EquilibriumSearchError(RuntimeError):
    pass


def opinion_field(z, u, d=1.0, kappa=1.0, gamma=None, bias=(0.0, 0.0)):
    """Two-agent vector field with shared attention ``u``.

    ``gamma=None`` gives the symmetric reduction where self-weight and
    coupling are both ``kappa``.
    """
    g = kappa if gamma is None else gamma
    z1, z2 = z
    return np.array(
        [
            -d * z1 + u * math.tanh(kappa * z1 + g * z2 + bias[0]),
            -d * z2 + u * math.tanh(kappa * z2 + g * z1 + bias[1]),
        ]
    )


def opinion_jacobian(z, u, d=1.0, kappa=1.0, gamma=None, bias=(0.0, 0.0)):
    g = kappa if gamma is None else gamma
    z1, z2 = z
    s1 = 1.0 - math.tanh(kappa * z1 + g * z2 + bias[0]) ** 2
    s2 = 1.0 - math.tanh(kappa * z2 + g * z1 + bias[1]) ** 2
    return np.array([[-d + u * kappa * s1, u * g * s1], [u * g * s2, -d + u * kappa * s2]])


def _newton(z0, fargs, tol=1e-12, max_iter=100):
    """Damped Newton on the 2-D field with scalar arithmetic (2x2 solve by
    Cramer's rule); returns ``(z, |f|)`` or ``(None, |f|)`` on failure.

    A root is accepted only if the residual is below 1e-8 *and* the last
    Newton step was below 1e-9. The step test rejects points where Newton
    merely stalls on a flat field, as happens next to the degenerate origin
    at the bifurcation point.
    """
    u, d, kappa, gamma, bias = fargs
    g = kappa if gamma is None else gamma
    b1, b2 = bias
    tanh = math.tanh

    def field(z1, z2):
        return -d * z1 + u * tanh(kappa * z1 + g * z2 + b1), -d * z2 + u * tanh(kappa * z2 + g * z1 + b2)

    z1, z2 = float(z0[0]), float(z0[1])
    f1, f2 = field(z1, z2)
    nf = math.hypot(f1, f2)
    last_step = 0.0 if nf == 0.0 else math.inf
    for _ in range(max_iter):
        if nf <= tol and last_step <= 1e-9:
            break
        s1 = 1.0 - tanh(kappa * z1 + g * z2 + b1) ** 2
        s2 = 1.0 - tanh(kappa * z2 + g * z1 + b2) ** 2
        a11, a12 = -d + u * kappa * s1, u * g * s1
        a21, a22 = u * g * s2, -d + u * kappa * s2
        det = a11 * a22 - a12 * a21
        if det == 0.0:
            break
        dz1 = (-f1 * a22 + f2 * a12) / det
        dz2 = (-f2 * a11 + f1 * a21) / det
        last_step = math.hypot(dz1, dz2)
        if last_step <= 1e-15:
            break
        lam = 1.0
        while lam > 1e-8:
            c1, c2 = z1 + lam * dz1, z2 + lam * dz2
            h1, h2 = field(c1, c2)
            nc = math.hypot(h1, h2)
            if nc < nf:
                z1, z2, f1, f2, nf = c1, c2, h1, h2, nc
                break
            lam *= 0.5
        else:
            break
    return (np.array([z1, z2]), nf) if (nf <= 1e-8 and last_step <= 1e-9) else (None, nf)


def find_equilibria(u, d=1.0, kappa=1.0, *, gamma=None, bias=(0.0, 0.0), grid=21, dedupe=1e-6):
    """All equilibria reachable by damped Newton from a ``grid x grid`` set
    of starts over ``[-u/d - 1, u/d + 1]^2``, sorted by ``z1``."""
    if not (u >= 0.0 and d > 0.0 and kappa > 0.0):
        raise ValueError("need u >= 0, d > 0, kappa > 0")
    fargs = (u, d, kappa, gamma, tuple(bias))
    half = u / d + 1.0
    axis = np.linspace(-half, half, grid)
    found: list[np.ndarray] = []
    for a in axis:
        for b in axis:
            z, _ = _newton((a, b), fargs)
            if z is None:
                continue
            if all(np.max(np.abs(z - q)) > dedupe for q in found):
                found.append(z)
    if not found:
        raise EquilibriumSearchError(f"Newton failed from every start at u={u}")
    out = []
    for z in sorted(found, key=lambda q: (q[0], q[1])):
        eig = np.linalg.eigvals(opinion_jacobian(z, *fargs))
        res = float(np.linalg.norm(opinion_field(z, *fargs)))
        out.append(Equilibrium(float(z[0]), float(z[1]), bool(np.all(eig.real < 0.0)), res))
    return out


@dataclass
class BifurcationSweep:
    points: list
    d: float
    kappa: float
    detected_critical: Optional[float]
    bracket: Optional[tuple]

    @property
    def predicted_critical(self) -> float:
        return critical_attention(self.d, self.kappa)

    def rows(self):
        for p in self.points:
            for e in p.equilibria:
                yield p.u, e.z1, e.z2, e.stable

    def to_csv(self) -> str:
        lines = ["u,z1,z2,stable"]
        lines += [f"{u:.9g},{z1:.9g},{z2:.9g},{int(s)}" for u, z1, z2, s in self.rows()]
        return "\n".join(lines) + "\n"


def bifurcation_sweep(u_range=(0.0, 1.0), steps=100, d=1.0, kappa=1.0, **kw) -> BifurcationSweep:
    """Equilibria over ``steps + 1`` evenly spaced attentions.

    The detected critical attention is the first ``u`` with more than one
    equilibrium; ``bracket`` is that ``u`` and its predecessor.
    """
    lo, hi = u_range
    if not (0.0 <= lo < hi <= 5.0):
        raise ValueError("u_range must lie within [0, 5] with lo < hi")
    if steps < 2:
        raise ValueError("steps must be >= 2")
    us = np.linspace(lo, hi, steps + 1)
    points = [BifurcationPoint(float(u), tuple(find_equilibria(float(u), d, kappa, **kw))) for u in us]
    crit = bracket = None
    for k, p in enumerate(points):
        if p.n > 1:
            crit = p.u
            bracket = (points[k - 1].u if k else p.u, p.u)
            break
    return BifurcationSweep(points, d, kappa, crit, bracket)


def simulate_reduced(z0, u, d=1.0, kappa=1.0, dt=0.01, t_max=200.0, tol=1e-6, **kw):
    """Euler-integrate the reduced field until ``|z'| < tol``; returns (z, converged)."""
    fargs = (u, d, kappa, kw.get("gamma"), tuple(kw.get("bias", (0.0, 0.0))))
    z = np.array(z0, dtype=float)
    for _ in range(int(round(t_max / dt))):
        f = opinion_field(z, *fargs)
        if np.linalg.norm(f) < tol:
            return z, True
        z = z + dt * f
    return z, False


# -- scenarios ---------------------------------------------------------------

GENERATOR_OFFSET = (0.35, math.pi / 6)
GENERATOR_MIN_ASYMMETRY = 0.05
GENERATOR_RANGE = (30.0, 40.0)
START_GAP = 10.0


def generate_encounter(seed: int, *, noise_std=0.1, opinion_enabled=True, **overrides) -> Scenario:
    """Random crossing encounter that the bare filter tends to block.

    Airplane 1 starts at the origin and airplane 2 at ``(10, 0)``. Each goal
    lies off the line joining the starts by an angle drawn from
    ``GENERATOR_OFFSET`` on the same side, so both desired tracks point into
    the other's unsafe cone. The two offsets are kept at least
    ``GENERATOR_MIN_ASYMMETRY`` apart; exact mirror images stall forever
    without noise.
    """
    rng = np.random.default_rng(int(seed))
    side = 1.0 if rng.random() < 0.5 else -1.0
    while True:
        a, b = rng.uniform(*GENERATOR_OFFSET, size=2)
        if abs(a - b) >= GENERATOR_MIN_ASYMMETRY:
            break
    l1, l2 = rng.uniform(*GENERATOR_RANGE, size=2)
    g1 = (l1 * math.cos(side * a), l1 * math.sin(side * a))
    g2 = (START_GAP + l2 * math.cos(math.pi - side * b), l2 * math.sin(math.pi - side * b))
    planes = (AirplaneSpec(1, (0.0, 0.0), g1), AirplaneSpec(2, (START_GAP, 0.0), g2))
    kw = dict(
        airplanes=planes,
        noise_std=noise_std,
        seed=int(seed),
        opinion_enabled=opinion_enabled,
        name=f"encounter_{seed}",
    )
    kw.update(overrides)
    return Scenario(**kw)


def head_on_scenario(seed=0, *, gap=10.0, noise_std=0.1, opinion_enabled=True, **kw) -> Scenario:
    planes = (AirplaneSpec(1, (0.0, 0.0), (gap, 0.0)), AirplaneSpec(2, (gap, 0.0), (0.0, 0.0)))
    return Scenario(planes, seed=seed, noise_std=noise_std, opinion_enabled=opinion_enabled, name="head_on", **kw)


CASE_STUDY_GOALS = ((36.0, 18.0), (-25.0, 20.0))


def case_study_scenario(seed=0, *, bias1=0.0, noise_std=0.1, opinion_enabled=True, **kw) -> Scenario:
    """Crossing geometry where airplane 2 reaches the track intersection
    first and the bare filter settles into a long parallel stand-off."""
    planes = (
        AirplaneSpec(1, (0.0, 0.0), CASE_STUDY_GOALS[0], bias=bias1),
        AirplaneSpec(2, (START_GAP, 0.0), CASE_STUDY_GOALS[1]),
    )
    return Scenario(planes, seed=seed, noise_std=noise_std, opinion_enabled=opinion_enabled, name="case_study", **kw)


def ring_scenario(n=8, radius=12.0, spacing=8.0, seed=0, *, noise_std=0.1, opinion_enabled=True, **kw) -> Scenario:
    """``n`` airplanes swapping with their antipodes through a common centre.

    Antipodal pairs share a radius and the radii grow by ``spacing`` per
    pair, so the pairs meet head-on at the centre one after another instead
    of all at once. Every head-on is exactly symmetric; without noise each
    one stalls.
    """
    if n % 2:
        raise ValueError("n must be even")
    half = n // 2
    planes = []
    for k in range(n):
        ang = math.pi * k / half
        rad = radius + spacing * (k % half)
        c, s = math.cos(ang), math.sin(ang)
        planes.append(AirplaneSpec(k + 1, (rad * c, rad * s), (-rad * c, -rad * s)))
    return Scenario(tuple(planes), seed=seed, noise_std=noise_std, opinion_enabled=opinion_enabled, name="ring", **kw)


def swap_rotation(log: TrajectoryLog, a: int = 1, b: int = 2) -> float:
    """Net unwrapped rotation of the line of sight from ``a`` to ``b``.

    Positive is counter-clockwise. A completed head-on swap is close to +-pi.
    """
    xa, ya = log.column("x", a), log.column("y", a)
    xb, yb = log.column("x", b), log.column("y", b)
    n = min(len(xa), len(xb))
    ang = np.unwrap(np.arctan2(yb[:n] - ya[:n], xb[:n] - xa[:n]))
    return float(ang[-1] - ang[0]) if n else 0.0


def swap_direction(log: TrajectoryLog, a: int = 1, b: int = 2) -> str:
    rot = swap_rotation(log, a, b)
    return "ccw" if rot > 0 else "cw"


# -- Monte Carlo ---------------------------------------------------------------

BLOCKING_EVENT_DWELL = 2.0


@dataclass
class RunRecord:
    seed: int
    baseline: Optional[dict]
    opinion: Optional[dict]
    time_saving: Optional[float]
    error: Optional[str] = None


@dataclass
class MonteCarloReport:
    n_runs: int
    base_seed: int
    violations: int
    blocking_events: int
    mean_time_saving: Optional[float]
    min_separation: float
    runs: list = field(default_factory=list)
    aborted: int = 0
    saving_runs: int = 0
    baseline_blocking_events: int = 0
    baseline_filter_active: int = 0

    def to_dict(self) -> dict:
        return {
            "n_runs": self.n_runs,
            "base_seed": self.base_seed,
            "violations": self.violations,
            "blocking_events": self.blocking_events,
            "mean_time_saving": self.mean_time_saving,
            "min_separation": self.min_separation,
            "aborted": self.aborted,
            "saving_runs": self.saving_runs,
            "baseline_blocking_events": self.baseline_blocking_events,
            "baseline_filter_active": self.baseline_filter_active,
            "runs": [vars(r) for r in self.runs],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        def fmt(x):
            return "nan" if x is None else f"{x:.6g}"

        head = [
            f"n_runs: {self.n_runs}",
            f"base_seed: {self.base_seed}",
            f"violations: {self.violations}",
            f"blocking_events: {self.blocking_events}",
            f"mean_time_saving: {fmt(self.mean_time_saving)}",
            f"saving_runs: {self.saving_runs}",
            f"min_separation: {fmt(self.min_separation)}",
            f"aborted: {self.aborted}",
            f"baseline_blocking_events: {self.baseline_blocking_events}",
            f"baseline_filter_active: {self.baseline_filter_active}",
            "",
            "seed  saving  min_sep  max_dwell  base_dwell  error",
        ]
        rows = []
        for r in self.runs:
            op, bl = r.opinion or {}, r.baseline or {}
            dwell = max((a["blocking_dwell"] for a in op.get("airplanes", [])), default=None)
            bdwell = max((a["blocking_dwell"] for a in bl.get("airplanes", [])), default=None)
            rows.append(
                f"{r.seed}  {fmt(r.time_saving)}  {fmt(op.get('min_separation'))}  "
                f"{fmt(dwell)}  {fmt(bdwell)}  {r.error or '-'}"
            )
        return "\n".join(head + rows) + "\n"


def time_saving(baseline: RunMetrics, opinion: RunMetrics) -> Optional[float]:
    """Mean over airplanes of the relative flight-time reduction, or None if
    either run left an airplane short of its goal."""
    if not (baseline.all_reached and opinion.all_reached):
        return None
    fr = []
    for b in baseline.airplanes:
        o = opinion.by_id(b.id)
        fr.append((b.flight_time - o.flight_time) / b.flight_time)
    return float(np.mean(fr))


def _one_run(args):
    seed, factory, kw = args
    try:
        _, base = run_scenario(factory(seed, opinion_enabled=False, **kw), record=False)
        _, op = run_scenario(factory(seed, opinion_enabled=True, **kw), record=False)
    except SimulationError as exc:
        return RunRecord(seed, None, None, None, error=str(exc))
    return RunRecord(seed, base.to_dict(), op.to_dict(), time_saving(base, op))


def monte_carlo(n: int, base_seed: int = 0, workers: int = 1, factory=generate_encounter, **scenario_kw) -> MonteCarloReport:
    """Run ``n`` generated encounters, each with and without opinions.

    ``factory(seed, opinion_enabled=..., **scenario_kw)`` builds each
    scenario; it must be picklable when ``workers > 1``. Seeds are
    ``base_seed .. base_seed + n - 1``. Violations and blocking
    events are counted on the opinion runs; a blocking event is a run in
    which some airplane holds the blocking label longer than
    ``BLOCKING_EVENT_DWELL``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    jobs = [(base_seed + k, factory, scenario_kw) for k in range(n)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            records = list(ex.map(_one_run, jobs, chunksize=max(1, n // (4 * workers))))
    else:
        records = [_one_run(j) for j in jobs]
    records.sort(key=lambda r: r.seed)

    violations = blocking = aborted = base_blocking = base_active = 0
    savings = []
    min_sep = math.inf
    for r in records:
        if r.error is not None:
            aborted += 1
            continue
        op, bl = r.opinion, r.baseline
        violations += op["violation_count"] > 0
        blocking += any(a["blocking_dwell"] > BLOCKING_EVENT_DWELL for a in op["airplanes"])
        base_blocking += any(a["blocking_dwell"] > BLOCKING_EVENT_DWELL for a in bl["airplanes"])
        base_active += any(a["filter_active_time"] > 0 for a in bl["airplanes"])
        min_sep = min(min_sep, op["min_separation"])
        if r.time_saving is not None:
            savings.append(r.time_saving)
    mean = float(np.mean(savings)) if savings else None
    return MonteCarloReport(
        n_runs=len(records),
        base_seed=base_seed,
        violations=violations,
        blocking_events=blocking,
        mean_time_saving=mean,
        min_separation=min_sep,
        runs=records,
        aborted=aborted,
        saving_runs=len(savings),
        baseline_blocking_events=base_blocking,
        baseline_filter_active=base_active,
    )
