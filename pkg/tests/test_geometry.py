import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from blockfree.geometry import (
    AirplaneState,
    DegenerateGeometryError,
    Vec2,
    angle_diff,
    bearing,
    bearing_rate,
    integrate_position,
    normalize_angle,
)

PI = math.pi
coord = st.floats(-1e3, 1e3, allow_nan=False)
point = st.tuples(coord, coord)
vel = st.tuples(st.floats(-10, 10), st.floats(-10, 10))
angle = st.floats(-1e3, 1e3, allow_nan=False)


def _state(p=(0.0, 0.0), heading=0.0):
    return AirplaneState(id=1, position=Vec2(*p), heading=heading, goal=Vec2(100.0, 0.0))


# -- normalize_angle ---------------------------------------------------------

@pytest.mark.parametrize(
    "a, expected",
    [(0.0, 0.0), (1.5 * PI, -0.5 * PI), (PI, -PI)],
)
def test_normalize_examples(a, expected):
    assert normalize_angle(a) == pytest.approx(expected, abs=1e-15)


def test_normalize_negative_input_uses_mathematical_modulo():
    assert normalize_angle(-1.5 * PI) == pytest.approx(0.5 * PI)
    assert normalize_angle(-PI) == -PI


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_normalize_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        normalize_angle(bad)


def test_normalize_tiny_negative_stays_in_range():
    # (a + pi) % 2pi rounds to 2pi here; must not come back as +pi
    a = -PI - 1e-17
    assert -PI <= normalize_angle(a) < PI


@pytest.mark.invariant
@given(angle, st.integers(-1000, 1000))
def test_normalize_periodic(a, k):
    lhs = normalize_angle(a + 2 * PI * k)
    rhs = normalize_angle(a)
    # the shifted input carries round-off proportional to |2 pi k|
    err = abs(angle_diff(lhs, rhs))
    assert err <= 1e-9
    assert -PI <= lhs < PI


@pytest.mark.invariant
@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_normalize_range_and_congruence(a):
    w = normalize_angle(a)
    assert -PI <= w < PI
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-9)


# -- bearing -----------------------------------------------------------------

@pytest.mark.parametrize(
    "pi_, pj, expected",
    [((0, 0), (1, 0), 0.0), ((0, 0), (0, 2), 0.5 * PI), ((1, 1), (0, 1), -PI)],
)
def test_bearing_examples(pi_, pj, expected):
    assert bearing(pi_, pj) == pytest.approx(expected)


def test_bearing_coincident_raises():
    with pytest.raises(DegenerateGeometryError):
        bearing((1.0, 2.0), (1.0, 2.0))


@pytest.mark.invariant
@given(point, point)
def test_bearing_antisymmetry(p, q):
    if p == q:
        return
    assert abs(angle_diff(bearing(p, q), normalize_angle(bearing(q, p) + PI))) <= 1e-12


@pytest.mark.invariant
@given(point, point)
def test_bearing_points_along_offset(p, q):
    dx, dy = q[0] - p[0], q[1] - p[1]
    n = math.hypot(dx, dy)
    if n < 1e-6:
        return
    b = bearing(p, q)
    assert math.cos(b) == pytest.approx(dx / n, abs=1e-12)
    assert math.sin(b) == pytest.approx(dy / n, abs=1e-12)


# -- bearing_rate ------------------------------------------------------------

def test_bearing_rate_parallel_motion_is_zero():
    assert bearing_rate((0, 0), (3, 4), (0, 0), (0.6, 0.8)) == pytest.approx(0.0, abs=1e-15)


def test_bearing_rate_unit_cross():
    assert bearing_rate((0, 0), (1, 0), (0, 0), (0, 1)) == 1.0


def test_bearing_rate_swap_example():
    a = bearing_rate((0.3, -1), (2, 5), (1, 0.2), (-0.5, 0.7))
    b = bearing_rate((2, 5), (0.3, -1), (-0.5, 0.7), (1, 0.2))
    assert a == b


def test_bearing_rate_coincident_raises():
    with pytest.raises(DegenerateGeometryError):
        bearing_rate((0, 0), (0, 0), (1, 0), (0, 1))


def test_bearing_rate_matches_finite_difference():
    p, q, vp, vq = (0.0, 0.0), (4.0, 1.0), (1.0, 0.0), (-0.6, 0.8)
    eps = 1e-6
    b0 = bearing(p, q)
    b1 = bearing((p[0] + eps * vp[0], p[1] + eps * vp[1]), (q[0] + eps * vq[0], q[1] + eps * vq[1]))
    assert bearing_rate(p, q, vp, vq) == pytest.approx(angle_diff(b1, b0) / eps, rel=1e-5)


@pytest.mark.invariant
@given(point, point, vel, vel)
def test_bearing_rate_symmetric(p, q, vp, vq):
    dx, dy = q[0] - p[0], q[1] - p[1]
    if dx * dx + dy * dy == 0.0:
        return  # coincident, or so close the squared distance underflows
    assert bearing_rate(p, q, vp, vq) == bearing_rate(q, p, vq, vp)


# -- integrate_position ------------------------------------------------------

def test_integrate_axis_step():
    s = integrate_position(_state(), 0.0, 0.01, 1.0)
    assert s.position == pytest.approx((0.01, 0.0))
    assert s.heading == 0.0


def test_integrate_quarter_turn():
    s = integrate_position(_state(), 0.5 * PI, 1.0, 1.0)
    assert s.position == pytest.approx((0.0, 1.0), abs=1e-15)


def test_integrate_tracked_heading():
    s = integrate_position(_state(), 0.1, 0.01, 1.0, mode="tracked", gain=50.0)
    assert s.heading == pytest.approx(0.05, abs=1e-15)
    # the position step uses the updated heading
    assert s.position == pytest.approx((0.01 * math.cos(0.05), 0.01 * math.sin(0.05)))


def test_integrate_tracked_wraps_the_short_way():
    s = integrate_position(_state(heading=PI - 0.05), -PI + 0.05, 0.01, 1.0, mode="tracked", gain=50.0)
    # error is -0.1 across the seam, so the heading moves up by 0.05 and wraps
    assert s.heading == pytest.approx(-PI, abs=1e-12)


@pytest.mark.parametrize("dt", [0.0, -0.01])
def test_integrate_rejects_non_positive_dt(dt):
    with pytest.raises(ValueError):
        integrate_position(_state(), 0.0, dt, 1.0)


def test_integrate_rejects_unknown_mode():
    with pytest.raises(ValueError):
        integrate_position(_state(), 0.0, 0.01, 1.0, mode="warp")


def test_state_rejects_negative_attention():
    with pytest.raises(ValueError):
        AirplaneState(id=1, position=Vec2(0, 0), heading=0.0, goal=Vec2(1, 0), attention=-1.0)


def test_integrate_returns_new_state():
    s0 = _state()
    s1 = integrate_position(s0, 0.3, 0.01, 1.0)
    assert s0.position == (0.0, 0.0)
    assert s1 is not s0
    with pytest.raises(AttributeError):
        s1.heading = 1.0


@pytest.mark.invariant
@given(point, angle, angle, st.floats(1e-4, 1.0), st.floats(0.1, 10.0))
def test_constant_speed(p, heading, command, dt, v):
    s = integrate_position(_state(p, normalize_angle(heading)), command, dt, v)
    step = math.hypot(s.position[0] - p[0], s.position[1] - p[1])
    # the position carries absolute round-off of order |p| * eps
    tol = 1e-12 * v * dt + 4e-16 * max(1.0, abs(p[0]), abs(p[1]))
    assert abs(step - v * dt) <= tol


def test_vec2_arithmetic():
    a, b = Vec2(1.0, 2.0), Vec2(3.0, -1.0)
    assert a + b == (4.0, 1.0)
    assert b - a == (2.0, -3.0)
    assert 2 * a == (2.0, 4.0)
    assert -a == (-1.0, -2.0)
    assert a.dot(b) == 1.0
    assert a.cross(b) == -7.0
    assert Vec2(3.0, 4.0).norm() == 5.0
    assert Vec2.polar(2.0, 0.5 * PI) == pytest.approx((0.0, 2.0))


def test_vec2_norm_large_components():
    assert Vec2(1e6, 1e6).norm() == pytest.approx(math.sqrt(2) * 1e6)
