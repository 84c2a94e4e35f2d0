import math

import numpy as np
import pytest

from modules.errors import ValidationError
from modules.kernels import KnotSet3, KnotSet4
from modules.motions import (
    RigidMotion,
    act_knot,
    act_point,
    compose,
    geodesic_distance,
    invert,
    transform_knots,
)


def test_quarter_turn_about_z():
    M = RigidMotion.from_axis_angle([0, 0, 1], 90.0, [1.0, 0.0, 0.0])
    np.testing.assert_allclose(act_point(M, [1.0, 0.0, 0.0]), [1.0, 1.0, 0.0], atol=1e-12)


def test_parse_literal():
    M = RigidMotion.parse("axis 0 0 1 180 0.5 0 -0.25")
    np.testing.assert_allclose(M.t, [0.5, 0.0, -0.25])
    np.testing.assert_allclose(act_point(M, [1.0, 0.0, 0.0]), [-0.5, 0.0, -0.25], atol=1e-12)


@pytest.mark.parametrize("literal", ["axis 0 0 1 90", "rot 0 0 1 90 0 0 0", "axis 0 0 x 90 0 0 0"])
def test_parse_rejects_malformed(literal):
    with pytest.raises(ValidationError):
        RigidMotion.parse(literal)


def test_rejects_reflection():
    with pytest.raises(ValidationError):
        RigidMotion(np.diag([1.0, 1.0, -1.0]))


def test_compose_with_inverse_is_identity():
    M = RigidMotion.from_axis_angle([1, 2, 3], 37.0, [0.1, -0.2, 0.3])
    I = compose(M, invert(M))
    np.testing.assert_allclose(I.R, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(I.t, 0.0, atol=1e-12)


def test_compose_acts_right_to_left():
    A = RigidMotion.from_axis_angle([0, 0, 1], 90.0)
    B = RigidMotion.translation([1.0, 0.0, 0.0])
    x = np.array([0.0, 1.0, 0.0])
    np.testing.assert_allclose(act_point(compose(A, B), x), act_point(A, act_point(B, x)), atol=1e-12)


def test_act_knot_keeps_radius():
    M = RigidMotion.from_axis_angle([0, 1, 0], 45.0, [0.0, 0.0, 1.0])
    moved = act_knot(M, [0.0, 0.0, 0.0, 0.3])
    np.testing.assert_allclose(moved, [0.0, 0.0, 1.0, 0.3])


def test_transform_knots_preserves_type():
    M = RigidMotion.translation([0.1, 0.0, 0.0])
    k3 = transform_knots(M, KnotSet3(np.zeros((2, 3)), 0.2, [1.0, 2.0]))
    assert isinstance(k3, KnotSet3)
    np.testing.assert_allclose(k3.points[:, 0], 0.1)
    np.testing.assert_allclose(k3.weights, [1.0, 2.0])
    k4 = transform_knots(M, KnotSet4(np.zeros((1, 3)), [0.2], None, 0.5, mirrored=True))
    assert k4.mirrored and k4.L == 0.5


def test_geodesic_distance():
    A = RigidMotion.identity()
    B = RigidMotion.from_axis_angle([0, 0, 1], 60.0, [0.0, 3.0, 4.0])
    expected = math.sqrt(2.0 * (math.pi / 3.0) ** 2 + 25.0)
    assert geodesic_distance(A, B) == pytest.approx(expected)
    assert geodesic_distance(B, B) == pytest.approx(0.0, abs=1e-7)


def test_literal_reproduces_motion():
    M = RigidMotion.from_axis_angle([1, 1, 0], 30.0, [0.2, 0.0, -0.1])
    N = RigidMotion.parse(M.to_literal())
    np.testing.assert_allclose(N.R, M.R, atol=1e-8)
    np.testing.assert_allclose(N.t, M.t, atol=1e-8)


def test_geodesic_distance_is_a_metric():
    rng = np.random.default_rng(4)
    motions = [RigidMotion.from_axis_angle(rng.normal(size=3), rng.uniform(0.0, 180.0),
                                           rng.uniform(-1.0, 1.0, size=3)) for _ in range(6)]
    for A in motions:
        assert geodesic_distance(A, A) == pytest.approx(0.0, abs=1e-7)
        for B in motions:
            assert geodesic_distance(A, B) == pytest.approx(geodesic_distance(B, A), abs=1e-9)
            for C in motions:
                assert geodesic_distance(A, C) <= geodesic_distance(A, B) + geodesic_distance(B, C) + 1e-9


def test_quarter_turns_compose_to_half_turn():
    quarter = RigidMotion.from_axis_angle([0, 0, 1], 90.0)
    half = compose(quarter, quarter)
    np.testing.assert_allclose(half.R, np.diag([-1.0, -1.0, 1.0]), atol=1e-12)
    assert geodesic_distance(RigidMotion.identity(), half) == pytest.approx(math.sqrt(2.0) * math.pi)
