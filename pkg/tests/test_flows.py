"""Tests for compactly supported flows.

The headline contracts: payload-ball points are translated *exactly* (their
trajectories never leave the damping plateau, where RK4 integrates a
constant field without error), the map is bitwise-identity outside the
tube, doubling the step count moves no output beyond 1e-9, and the
mirrored flow undoes the forward one to the same accuracy.
"""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import max_jacobian_gap
from diffeoglue.errors import ContainmentError, GeometryError, ParameterError
from diffeoglue.flows import (
    DampedTranslationMap,
    FlowMap,
    TubeField,
    damped_translation,
    default_step_count,
    integrate_flow,
    move_balls,
    smooth_clamp,
    smooth_clamp_derivative,
    transport_along_polyline,
)
from diffeoglue.profiles import DampingWindow
from diffeoglue.regions import Ball, Capsule, sample_region, stream


def ball_points(center, radius, count, seed=0):
    rng = np.random.default_rng(seed)
    n = len(center)
    d = rng.normal(size=(count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return np.asarray(center) + radius * rng.uniform(0, 1, size=(count, 1)) ** (1.0 / n) * d


class TestSmoothClamp:
    def test_identity_inside(self):
        t = np.linspace(0.0, 1.0, 50)
        np.testing.assert_array_equal(smooth_clamp(t, 0.5), t)

    def test_plateaus(self):
        assert smooth_clamp(np.array([-0.6]), 0.5)[0] == 0.0
        assert smooth_clamp(np.array([1.7]), 0.5)[0] == 1.0

    def test_overshoot_bounded(self):
        # the joining ramps are allowed to dip below 0 / above 1, but never
        # beyond CLAMP_OVERHANG * T -- that bound sizes the tube extension
        T = 0.5
        t = np.linspace(-1.0, 2.0, 5000)
        s = smooth_clamp(t, T)
        assert s.min() >= -0.3 * T
        assert s.max() <= 1.0 + 0.3 * T

    def test_derivative_matches_finite_differences(self):
        t = np.linspace(-0.45, 1.45, 77)
        h = 1e-7
        fd = (smooth_clamp(t + h, 0.5) - smooth_clamp(t - h, 0.5)) / (2 * h)
        np.testing.assert_allclose(smooth_clamp_derivative(t, 0.5), fd, atol=1e-6)


class TestTubeField:
    def field(self):
        return TubeField(np.zeros(2), np.array([3.0, 0.0]), DampingWindow(0.5, 1.0))

    def test_constant_on_payload_plateau(self):
        f = self.field()
        pts = ball_points([0.0, 0.0], 0.5, 50)
        v = f.value(pts)
        np.testing.assert_array_equal(v, np.broadcast_to([3.0, 0.0], (50, 2)))
        assert np.abs(f.jacobian(pts)).max() == 0.0

    def test_zero_outside_tube(self):
        f = self.field()
        pts = np.array([[1.5, 1.1], [-2.0, 0.0], [5.5, 0.0]])
        assert np.abs(f.value(pts)).max() == 0.0
        assert np.abs(f.jacobian(pts)).max() == 0.0

    def test_support_capsule_covers_field(self, rng):
        f = self.field()
        assert isinstance(f.support, Capsule)
        pts = rng.uniform(-3, 6, size=(4000, 2))
        live = np.linalg.norm(f.value(pts), axis=1) > 0
        assert f.support.contains(pts)[live].all()

    def test_jacobian_matches_finite_differences(self):
        f = self.field()
        pts = np.array([[1.0, 0.7], [2.5, -0.8], [0.2, 0.9], [3.3, 0.6]])
        h = 1e-6
        for x in pts:
            J = f.jacobian(x[None, :])[0]
            F = np.empty((2, 2))
            for j in range(2):
                e = np.zeros(2)
                e[j] = h
                F[:, j] = (f.value((x + e)[None, :])[0] - f.value((x - e)[None, :])[0]) / (2 * h)
            np.testing.assert_allclose(J, F, atol=1e-7)

    def test_degenerate_segment_rejected(self):
        with pytest.raises(ParameterError):
            TubeField(np.zeros(2), np.zeros(2), DampingWindow(0.5, 1.0))


class TestDampedTranslation:
    def test_payload_moved_exactly(self):
        start, end = np.array([0.0, 0.0]), np.array([2.5, 1.0])
        f = damped_translation(start, end, 0.5)
        pts = ball_points(start, 0.5, 200, seed=1)
        moved = f(pts)
        shift = end - start
        scale = max(1.0, np.abs(pts).max())
        assert np.abs(moved - (pts + shift)).max() <= 1e-13 * scale

    def test_identity_outside_tube_bitwise(self, rng):
        f = damped_translation(np.zeros(2), np.array([2.0, 0.0]), 0.4)
        pts = rng.uniform(-5, 7, size=(2000, 2))
        outside = ~f.support.contains(pts)
        assert outside.sum() > 500
        assert (f(pts[outside]) == pts[outside]).all()

    def test_step_doubling_is_converged(self):
        f = damped_translation(np.zeros(2), np.array([2.0, 0.5]), 0.5)
        fine = f.refined(2)
        pts = sample_region(Capsule(f.start, f.end, f.tube_radius), 300, stream(5))
        assert np.abs(fine(pts) - f(pts)).max() <= 1e-9

    def test_reverse_roundtrip(self):
        f = damped_translation(np.zeros(3), np.array([1.5, 0.5, -1.0]), 0.4)
        g = f.inverse()
        pts = sample_region(Capsule(f.start, f.end, f.tube_radius), 300, stream(6))
        assert np.abs(g(f(pts)) - pts).max() <= 1e-9
        # payload points come back bitwise: both legs translate them exactly
        payload = ball_points([0.0, 0.0, 0.0], 0.4, 100, seed=2)
        assert np.abs(g(f(payload)) - payload).max() <= 1e-13

    def test_jacobian_matches_finite_differences(self):
        f = damped_translation(np.zeros(2), np.array([1.5, 0.0]), 0.5)
        pts = np.array([[0.7, 0.6], [1.2, -0.7], [0.3, 0.0]])
        assert max_jacobian_gap(f, pts, h=1e-5) <= 1e-6

    def test_orientation_preserved_on_tube(self):
        f = damped_translation(np.zeros(2), np.array([2.0, 0.0]), 0.5)
        pts = sample_region(Capsule(f.start, f.end, f.tube_radius), 500, stream(7))
        dets = np.linalg.det(f.jacobian(pts))
        assert dets.min() > 0

    def test_parameter_validation(self):
        with pytest.raises(ParameterError):
            damped_translation(np.zeros(2), np.ones(2), 0.0)
        with pytest.raises(ParameterError):
            damped_translation(np.zeros(2), np.ones(2), 1.0, 0.5)

    def test_serialization_roundtrip(self):
        f = damped_translation(np.zeros(2), np.array([1.0, 1.0]), 0.3, 0.8)
        tree = f.to_tree()
        assert tree["type"] == "damped_translate"
        assert tree["params"]["payload_radius"] == 0.3


class TestIntegrateFlow:
    def test_rejects_zero_steps(self):
        field = TubeField(np.zeros(2), np.array([1.0, 0.0]), DampingWindow(0.3, 0.6))
        with pytest.raises(ParameterError):
            integrate_flow(field, np.zeros(2), steps=0)

    def test_variational_jacobian_differentiates_the_map(self):
        # FD on the integrated map must match the carried tangent map.
        field = TubeField(np.zeros(2), np.array([1.5, 0.0]), DampingWindow(0.4, 0.9))
        f = FlowMap(field, steps=128)
        pts = np.array([[0.6, 0.55], [1.0, -0.6]])
        assert max_jacobian_gap(f, pts, h=1e-5) <= 1e-6

    def test_default_step_count_scales_with_stiffness(self):
        assert default_step_count(1.0, 1.0) == 144
        assert default_step_count(10.0, 1.0) == 1440
        assert default_step_count(0.1, 1.0) == 96


class TestPolylineTransport:
    def test_payload_carried_along_corner(self):
        route = np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 2.0]])
        f = transport_along_polyline(route, 0.4)
        pts = ball_points([0.0, 0.0], 0.4, 150, seed=3)
        out = f(pts)
        target = pts + (route[-1] - route[0])
        assert np.abs(out - target).max() <= 1e-12

    def test_identity_far_from_route(self, rng):
        route = np.array([[0.0, 0.0], [2.0, 0.0]])
        f = transport_along_polyline(route, 0.4)
        pts = rng.uniform(4.0, 9.0, size=(100, 2))
        assert (f(pts) == pts).all()

    def test_degenerate_route_rejected(self):
        with pytest.raises(ParameterError):
            transport_along_polyline(np.array([[0.0, 0.0], [0.0, 0.0]]), 0.3)
        with pytest.raises(ParameterError):
            transport_along_polyline(np.array([[0.0, 0.0]]), 0.3)


class TestMoveBalls:
    def test_disjoint_routes_move_independently(self):
        routes = [
            np.array([[-3.0, 0.0], [3.0, 0.0]]),
            np.array([[-3.0, 5.0], [3.0, 5.0]]),
        ]
        f = move_balls(routes, 0.5)
        a = ball_points([-3.0, 0.0], 0.5, 60, seed=4)
        b = ball_points([-3.0, 5.0], 0.5, 60, seed=5)
        assert np.abs(f(a) - (a + [6.0, 0.0])).max() <= 1e-12
        assert np.abs(f(b) - (b + [6.0, 0.0])).max() <= 1e-12

    def test_colliding_tubes_rejected_with_route_pair(self):
        routes = [
            np.array([[-3.0, 0.0], [3.0, 0.0]]),
            np.array([[0.0, -3.0], [0.0, 3.0]]),
        ]
        with pytest.raises(GeometryError) as err:
            move_balls(routes, 0.5)
        assert "routes 0 overlap" not in str(err.value)  # message names both indices
        assert "0" in str(err.value) and "1" in str(err.value)

    def test_domain_containment_enforced(self):
        routes = [np.array([[-3.0, 0.0], [3.0, 0.0]])]
        with pytest.raises(ContainmentError):
            move_balls(routes, 0.5, domain=Ball(np.zeros(2), 2.0))
        move_balls(routes, 0.5, domain=Ball(np.zeros(2), 6.0))

    def test_empty_routes_rejected(self):
        with pytest.raises(ParameterError):
            move_balls([], 0.5)


@given(seed=st.integers(min_value=0, max_value=2**31 - 1))
@settings(max_examples=15, deadline=None)
def test_translation_exactness_property(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 4))
    start = rng.uniform(-2, 2, size=n)
    shift = rng.uniform(-2, 2, size=n)
    if np.linalg.norm(shift) < 0.1:
        shift = shift + 0.5
    radius = float(rng.uniform(0.2, 0.6))
    f = damped_translation(start, start + shift, radius)
    pts = ball_points(start, radius, 32, seed=seed)
    scale = max(1.0, np.abs(pts).max())
    assert np.abs(f(pts) - (pts + shift)).max() <= 1e-13 * scale
