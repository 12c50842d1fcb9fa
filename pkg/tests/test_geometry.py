import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mergeguard.geometry import Pose2, rotation_about, wrap_angle, wrap_angles

finite_pose = st.builds(
    Pose2,
    st.floats(-100, 100),
    st.floats(-100, 100),
    st.floats(-20, 20),
)


def test_wrap_angle_range_and_boundary():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(3 * math.pi) == pytest.approx(math.pi)
    assert wrap_angle(0.0) == 0.0
    for theta in np.linspace(-12, 12, 1001):
        w = wrap_angle(theta)
        assert -math.pi < w <= math.pi


def test_wrap_angles_matches_scalar(rng):
    arr = rng.uniform(-20, 20, 500)
    vec = wrap_angles(arr)
    for a, w in zip(arr, vec):
        assert w == wrap_angle(a)


def test_compose_identity():
    assert Pose2(0, 0, 0).compose(Pose2(1, 2, 0.3)) == Pose2(1, 2, 0.3)


def test_compose_quarter_turn():
    c = Pose2(1, 0, math.pi / 2).compose(Pose2(1, 0, 0))
    assert c.x == pytest.approx(1.0)
    assert c.y == pytest.approx(1.0)
    assert c.theta == pytest.approx(math.pi / 2)


def test_inverse_quarter_turn():
    inv = Pose2(1, 0, math.pi / 2).inverse()
    assert inv.x == pytest.approx(0.0, abs=1e-12)
    assert inv.y == pytest.approx(1.0)
    assert inv.theta == pytest.approx(-math.pi / 2)


def _close(a: Pose2, b: Pose2, tol=1e-12):
    assert a.x == pytest.approx(b.x, abs=tol)
    assert a.y == pytest.approx(b.y, abs=tol)
    assert abs(wrap_angle(a.theta - b.theta)) < tol


@given(finite_pose)
@settings(max_examples=200)
def test_inverse_is_inverse(p):
    _close(p.compose(p.inverse()), Pose2.identity(), tol=1e-9)
    _close(p.inverse().compose(p), Pose2.identity(), tol=1e-9)


@given(finite_pose, finite_pose, finite_pose)
@settings(max_examples=200)
def test_compose_associative(a, b, c):
    _close(a.compose(b).compose(c), a.compose(b.compose(c)), tol=1e-9)


def test_transform_round_trip(rng):
    p = Pose2(1.5, -2.0, 0.7)
    pts = rng.normal(0, 3, (50, 2))
    back = p.transform_inverse(p.transform(pts))
    assert np.allclose(back, pts, atol=1e-12)


def test_relative_to():
    a = Pose2(1, 1, math.pi / 2)
    b = Pose2(1, 3, math.pi)
    rel = a.relative_to(b)
    _close(a.compose(rel), b, tol=1e-12)


def test_rotation_about_fixes_center():
    w = rotation_about(2.0, -1.0, 0.8)
    pt = w.transform(np.array([[2.0, -1.0]]))
    assert np.allclose(pt, [[2.0, -1.0]], atol=1e-12)
    moved = w.transform(np.array([[3.0, -1.0]]))
    assert moved[0, 0] == pytest.approx(2.0 + math.cos(0.8))
    assert moved[0, 1] == pytest.approx(-1.0 + math.sin(0.8))
