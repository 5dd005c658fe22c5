import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockfree.analysis import case_study_scenario, head_on_scenario
from blockfree.encounter import (
    CSV_HEADER,
    AirplaneSpec,
    Mode,
    Scenario,
    SimulationError,
    World,
    _Flight,
    _scan,
    blocking_pair_predicate,
    classify_mode,
    desired_heading,
    run_scenario,
    select_threat,
    step_world,
)
from blockfree.geometry import AirplaneState, Vec2, bearing, bearing_rate, normalize_angle, velocity
from blockfree.opinion import OpinionParams, estimate_intention
from blockfree.safety import SafetyParams, half_width_delta, margin_g

PI = math.pi
coord = st.floats(-20, 20, allow_nan=False)


def _plane(pid, p, heading=0.0, arrived=None):
    return AirplaneState(id=pid, position=Vec2(*p), heading=heading, goal=Vec2(100.0, 100.0), arrived_at=arrived)


def _two(start1, goal1, start2, goal2, **kw):
    kw.setdefault("noise_std", 0.0)
    return Scenario((AirplaneSpec(1, start1, goal1), AirplaneSpec(2, start2, goal2)), **kw)


# -- scenario validation ------------------------------------------------------

@pytest.mark.parametrize(
    "kw",
    [{"t_max": 0.0}, {"goal_radius": 0.0}, {"dt": -0.01}, {"noise_std": -0.1}, {"seed": -1}, {"seed": 2**64}, {"heading_mode": "warp"}],
)
def test_scenario_validates(kw):
    with pytest.raises(ValueError):
        _two((0, 0), (5, 0), (0, 5), (5, 5), **kw)


def test_scenario_needs_two_distinct_airplanes():
    with pytest.raises(ValueError):
        Scenario((AirplaneSpec(1, (0, 0), (1, 0)),))
    with pytest.raises(ValueError):
        _two((0, 0), (5, 0), (0, 0), (5, 5))
    with pytest.raises(ValueError):
        Scenario((AirplaneSpec(1, (0, 0), (1, 0)), AirplaneSpec(1, (3, 0), (1, 0))))


# -- desired_heading / classify_mode ------------------------------------------

def test_desired_heading_examples():
    assert desired_heading((0, 0), (5, 0)) == 0.0
    assert desired_heading((0, 0), (0, -3)) == pytest.approx(-PI / 2)
    assert desired_heading((1, 1), (2, 2)) == pytest.approx(PI / 4)
    assert desired_heading((2, 2), (2, 2), fallback=0.7) == 0.7


def test_classify_examples():
    assert classify_mode(False, 0.0) is Mode.CRUISING
    assert classify_mode(False, 5.0) is Mode.CRUISING
    assert classify_mode(True, 0.0) is Mode.BLOCKING
    assert classify_mode(True, 0.5, 1e-3) is Mode.AVOIDING
    with pytest.raises(ValueError):
        classify_mode(True, 0.0, 0.0)


# -- blocking_pair_predicate --------------------------------------------------

def test_predicate_examples():
    d = 0.8
    assert blocking_pair_predicate(0.0, PI, 0.0, -PI, d)
    assert not blocking_pair_predicate(d, -PI + d, 0.0, -PI, d)
    assert not blocking_pair_predicate(1.0, -PI - 1.0, 0.0, -PI, d)
    assert blocking_pair_predicate(d / 2, -PI - d / 2, 0.0, -PI, d)
    # same-signed offsets: each steers towards the other's free side
    assert not blocking_pair_predicate(d / 2, -PI + d / 2, 0.0, -PI, d)


# -- select_threat ------------------------------------------------------------

def test_select_threat_all_far():
    me = _plane(1, (0, 0))
    assert select_threat(me, [_plane(2, (50, 0)), _plane(3, (0, 60))], SafetyParams()) is None


def test_select_threat_single():
    me = _plane(1, (0, 0))
    assert select_threat(me, [_plane(2, (50, 0)), _plane(3, (2, 0))], SafetyParams()) == 3


def test_select_threat_tie_by_distance():
    # a wide margin makes delta saturate at pi/2 for both neighbours
    params = SafetyParams(r=5.0)
    me = _plane(1, (0, 0))
    others = [_plane(2, (5, 0)), _plane(3, (0, 3)), _plane(4, (-3, 0))]
    assert half_width_delta((0, 0), (5, 0), params) == half_width_delta((0, 0), (0, 3), params) == PI / 2
    assert select_threat(me, others, params) == 3


def test_select_threat_ignores_arrived_and_self():
    me = _plane(1, (0, 0))
    assert select_threat(me, [me, _plane(2, (2, 0), arrived=1.0)], SafetyParams()) is None


@st.composite
def crowd(draw):
    n = draw(st.integers(2, 6))
    pts = draw(st.lists(st.tuples(coord, coord), min_size=n, max_size=n, unique=True))
    return [_plane(k + 1, p, draw(st.floats(-PI, PI, exclude_max=True))) for k, p in enumerate(pts)]


@pytest.mark.invariant
@given(crowd(), st.floats(0.3, 3.0))
def test_scan_agrees_with_select_threat(planes, r):
    params = SafetyParams(r=r)
    me = planes[0]
    flights = [_Flight(a, OpinionParams()) for a in planes]
    threat, nearest = _scan(flights[0], flights, params)
    assert (None if threat is None else threat.id) == select_threat(me, planes[1:], params)
    dists = [math.dist(me.position, o.position) for o in planes[1:]]
    assert math.dist(me.position, (nearest.x, nearest.y)) == min(dists)


# -- step_world ---------------------------------------------------------------

def test_far_apart_cruise_and_opinion_decays():
    sc = _two((0, 0), (30, 0), (0, 40), (30, 40))
    w = World.initial(sc)
    w = replace(w, airplanes=tuple(replace(a, opinion=0.5) for a in w.airplanes))
    rng = np.random.default_rng(0)
    prev = 0.5
    for _ in range(50):
        w = step_world(w, rng)
        assert all(i.mode is Mode.CRUISING for i in w.info)
        z = w.airplanes[0].opinion
        assert 0.0 < z < prev
        prev = z


def test_step_world_synchronous_update():
    sc = head_on_scenario(noise_std=0.0, gap=4.0, opinion_enabled=False)
    w0 = World.initial(sc)
    w1 = step_world(w0, np.random.default_rng(0))
    # airplane 2 must have seen airplane 1's pre-step position
    i1, i2 = w1.info
    assert i2.beta == pytest.approx(bearing(sc.airplanes[1].start, sc.airplanes[0].start))
    assert w1.t == pytest.approx(sc.dt) and w1.step == 1


def test_step_world_matches_run_scenario():
    sc = case_study_scenario(seed=3, t_max=5.0)
    log, _ = run_scenario(sc)
    w = World.initial(sc)
    rng = np.random.default_rng(sc.seed)
    rows = []
    while w.step < 500:
        w = step_world(w, rng)
        rows.extend((w.t, a.id, a.position.x, a.position.y, a.opinion) for a in w.airplanes)
    got = [(r[0], r[1], r[2], r[3], r[8]) for r in log.rows]
    assert got == rows


def test_head_on_baseline_blocks():
    sc = head_on_scenario(noise_std=0.0, opinion_enabled=False, t_max=20.0)
    w = World.initial(sc)
    rng = np.random.default_rng(0)
    both = False
    while w.step < 2000 and not both:
        w = step_world(w, rng)
        both = all(i.mode is Mode.BLOCKING for i in w.info)
    assert both


def test_head_on_with_opinions_commits_and_swaps():
    log, m = run_scenario(head_on_scenario(seed=1, noise_std=0.1))
    assert m.all_reached and m.violation_count == 0
    z1, z2 = log.column("z", 1), log.column("z", 2)
    k = int(np.argmax(np.abs(z1)))
    assert abs(z1[k]) > 0.1 and np.sign(z1[k]) == np.sign(z2[k])


def test_non_finite_state_aborts():
    sc = head_on_scenario(noise_std=0.0)
    w = World.initial(sc)
    bad = replace(w.airplanes[0], opinion=math.nan)
    w = replace(w, airplanes=(bad, w.airplanes[1]))
    with pytest.raises(SimulationError):
        step_world(w, np.random.default_rng(0))


# -- run_scenario -------------------------------------------------------------

def test_single_airplane_flight_time():
    # a second airplane far away and parked keeps the scenario valid
    sc = Scenario(
        (AirplaneSpec(1, (0, 0), (10, 0)), AirplaneSpec(2, (500, 500), (500, 500.05))),
        noise_std=0.0,
        goal_radius=0.01,
    )
    _, m = run_scenario(sc)
    assert m.by_id(1).flight_time == pytest.approx(10.0, abs=sc.dt)
    assert m.by_id(1).path_length == pytest.approx(m.by_id(1).flight_time)


def test_case_study_baseline_parallel_standoff():
    log, m = run_scenario(case_study_scenario(noise_std=0.0, opinion_enabled=False))
    assert m.max_blocking_dwell > 0.0
    blk = log.column("mode", 1) == "blocking"
    assert blk.any()
    # during the stand-off both airplanes fly the same heading
    th1, th2 = log.column("theta", 1), log.column("theta", 2)
    n = min(len(th1), len(th2))
    k = np.flatnonzero(blk[:n])
    diff = np.abs((th1[k] - th2[k] + PI) % (2 * PI) - PI)
    assert np.median(diff) < 0.05


def test_case_study_opinion_resolves():
    _, m = run_scenario(case_study_scenario(seed=0))
    assert m.max_blocking_dwell <= 2.0 and m.all_reached


def test_metrics_flight_time_within_t_max():
    _, m = run_scenario(case_study_scenario(seed=0, t_max=30.0))
    for a in m.airplanes:
        assert a.reached_goal == (a.flight_time is not None)
        if a.reached_goal:
            assert a.flight_time <= 30.0
    assert m.min_separation > 0.0


def test_log_shape_and_csv():
    log, _ = run_scenario(case_study_scenario(seed=0, t_max=1.0))
    text = log.to_csv()
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 1 + 2 * 100
    fields = lines[1].split(",")
    assert fields[1] == "1" and fields[14] in {"cruising", "avoiding", "blocking"}
    t = log.column("t", 1)
    assert np.all(np.diff(t) > 0)


# -- invariants over random encounters ----------------------------------------

@st.composite
def encounter(draw, noise=False):
    """Two airplanes whose straight tracks cross near the origin."""
    a1 = draw(st.floats(-PI, PI))
    a2 = draw(st.floats(-PI, PI))
    l1, l2 = draw(st.floats(2.0, 8.0)), draw(st.floats(2.0, 8.0))
    s1 = (-l1 * math.cos(a1), -l1 * math.sin(a1))
    s2 = (-l2 * math.cos(a2) + draw(st.floats(-1, 1)), -l2 * math.sin(a2) + draw(st.floats(-1, 1)))
    if math.dist(s1, s2) <= 1.05:
        s2 = (s2[0] + 3.0, s2[1])
    g1 = (l1 * math.cos(a1), l1 * math.sin(a1))
    g2 = (l2 * math.cos(a2), l2 * math.sin(a2))
    return _two(
        s1, g1, s2, g2,
        t_max=draw(st.floats(3.0, 12.0)),
        opinion_enabled=draw(st.booleans()),
        noise_std=draw(st.sampled_from([0.0, 0.1])) if noise else 0.0,
        seed=draw(st.integers(0, 2**32)),
    )


@pytest.mark.invariant
@given(encounter())
def test_forward_invariance(sc):
    _, m = run_scenario(sc, record=False)
    assert m.min_separation >= sc.safety.r - 1e-6
    assert m.violation_count == 0


@pytest.mark.invariant
@given(encounter(noise=True))
def test_determinism(sc):
    sc = sc.with_(t_max=min(sc.t_max, 4.0))
    a, _ = run_scenario(sc)
    b, _ = run_scenario(sc)
    assert a.to_csv() == b.to_csv()


@pytest.mark.invariant
@given(encounter(noise=True))
def test_mode_partition(sc):
    log, _ = run_scenario(sc.with_(t_max=min(sc.t_max, 6.0)))
    modes = log.column("mode")
    branches = log.column("branch")
    assert set(modes) <= {m.value for m in Mode}
    assert np.array_equal(modes == "cruising", branches == "otherwise")


@pytest.mark.invariant
@given(encounter())
def test_lemma_consistency(sc):
    sc = sc.with_(opinion_enabled=False, t_max=min(sc.t_max, 8.0))
    w = World.initial(sc)
    rng = np.random.default_rng(0)
    while w.step < int(round(sc.t_max / sc.dt)) and not w.done:
        prev = w
        w = step_world(w, rng)
        i1, i2 = w.info
        if i1 is None or i2 is None:
            break
        if i1.mode is Mode.BLOCKING and i2.mode is Mode.BLOCKING:
            a1, a2 = prev.airplanes
            th1 = desired_heading(a1.position, a1.goal, a1.heading)
            th2 = desired_heading(a2.position, a2.goal, a2.heading)
            assert blocking_pair_predicate(th1, th2, i1.beta, i2.beta, i1.delta)


@pytest.mark.invariant
@given(st.floats(-PI, PI), st.floats(5.0, 30.0), st.floats(3.0, 10.0), st.integers(0, 2**32))
def test_opinion_neutrality(heading, length, lane_gap, seed):
    # parallel tracks far enough apart that no cone ever opens
    c, s = math.cos(heading), math.sin(heading)
    nx, ny = -s * lane_gap, c * lane_gap
    sc = _two((0, 0), (length * c, length * s), (nx, ny), (nx + length * c, ny + length * s), seed=seed, t_max=length + 1)
    on, _ = run_scenario(sc)
    off, _ = run_scenario(sc.with_(opinion_enabled=False))
    assert set(on.column("mode")) == {"cruising"}
    assert on.to_csv() == off.to_csv()


@pytest.mark.invariant
@given(encounter(noise=True), st.integers(1, 300))
def test_logged_quantities_match_public_ops(sc, n_steps):
    w = World.initial(sc)
    rng = np.random.default_rng(sc.seed)
    for _ in range(n_steps):
        if w.done:
            return
        prev = w
        w = step_world(w, rng)
    v = sc.safety.v
    byid = {a.id: a for a in prev.airplanes}
    for a, info in zip(prev.airplanes, w.info):
        if info is None or info.reference is None:
            continue
        o = byid[info.reference]
        theta_star = desired_heading(a.position, a.goal, a.heading)
        assert info.beta == pytest.approx(bearing(a.position, o.position), abs=1e-12)
        assert info.delta == pytest.approx(half_width_delta(a.position, o.position, sc.safety), abs=1e-9)
        assert info.g == pytest.approx(margin_g(a.position, o.position, theta_star, sc.safety), abs=1e-9)
        rate = bearing_rate(a.position, o.position, velocity(a.heading, v), velocity(o.heading, v))
        assert info.beta_dot == pytest.approx(rate, abs=1e-9)
        new = next(x for x in w.airplanes if x.id == a.id)
        assert new.opinion_estimate == pytest.approx(estimate_intention(o.heading, o.position, a.position), abs=1e-12)
