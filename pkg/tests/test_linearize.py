"""Tests for local linearization: making a map the identity near its fixed
point without touching it near the boundary.

Contracts pinned here: bitwise identity on the core ball, bitwise agreement
with the input outside the deformation zone, a positive Jacobian
everywhere, and a faithful analytic Jacobian through the damped-flow
stages.
"""
import numpy as np
import pytest

from conftest import FAMILIES, make_family, max_jacobian_gap
from diffeoglue.errors import LinearizationError, OrientationError, ParameterError
from diffeoglue.linearize import damped_linear_deform, local_linearize
from diffeoglue.maps import AffineMap, CompositeMap, shear_map
from diffeoglue.regions import Annulus, Ball, sample_region, stream


class TestDampedLinearDeform:
    def test_acts_linearly_on_core(self):
        A = np.array([[1.4, 0.3], [-0.2, 0.9]])
        f = damped_linear_deform(A, 0.3, 1.0)
        rng = np.random.default_rng(1)
        x = rng.uniform(-0.2, 0.2, size=(100, 2))
        np.testing.assert_allclose(f(x), x @ A.T, atol=1e-11)

    def test_identity_outside_bitwise(self):
        A = np.array([[1.4, 0.3], [-0.2, 0.9]])
        f = damped_linear_deform(A, 0.3, 1.0)
        rng = np.random.default_rng(2)
        d = rng.normal(size=(100, 2))
        x = d / np.linalg.norm(d, axis=1, keepdims=True) * rng.uniform(3.0, 6.0, size=(100, 1))
        assert (f(x) == x).all()

    def test_inverse_roundtrip(self):
        A = np.array([[1.3, 0.0, 0.2], [0.1, 0.8, 0.0], [0.0, -0.1, 1.1]])
        f = damped_linear_deform(A, 0.25, 0.9)
        g = f.inverse()
        pts = sample_region(Ball(np.zeros(3), 1.5), 200, stream(3))
        assert np.abs(g(f(pts)) - pts).max() <= 1e-9

    def test_rejects_orientation_reversal(self):
        with pytest.raises(OrientationError):
            damped_linear_deform(np.diag([1.0, -1.0]), 0.3, 1.0)


class TestLocalLinearize:
    @pytest.mark.parametrize("family", FAMILIES)
    @pytest.mark.parametrize("n", [2, 3])
    def test_identity_on_core_ball(self, family, n):
        H = make_family(family, n)
        res = local_linearize(H, 1.0)
        pts = sample_region(res.identity_ball(), 300, stream(10))
        assert (res.map(pts) == pts).all()

    @pytest.mark.parametrize("family", FAMILIES)
    @pytest.mark.parametrize("n", [2, 3])
    def test_matches_input_near_boundary(self, family, n):
        H = make_family(family, n)
        res = local_linearize(H, 1.0)
        zone = Annulus(np.zeros(n), 0.5, 1.0)
        pts = sample_region(zone, 300, stream(11))
        assert np.abs(res.map(pts) - H(pts)).max() <= 1e-12

    def test_untouched_radius_is_bitwise(self):
        H = make_family("twist", 2)
        res = local_linearize(H, 1.0)
        zone = Annulus(np.zeros(2), res.untouched_radius(), 1.0)
        pts = sample_region(zone, 300, stream(12))
        np.testing.assert_array_equal(res.map(pts), H(pts))

    def test_radii_are_nested(self):
        res = local_linearize(make_family("shear", 2), 1.0)
        assert 0 < res.delta0 < res.delta1 < res.delta2 <= 0.25
        assert res.untouched_radius() < 0.5

    def test_jacobian_positive_throughout(self):
        res = local_linearize(make_family("rotation", 2), 1.0)
        pts = sample_region(Ball(np.zeros(2), 0.98), 2000, stream(13))
        dets = np.linalg.det(res.map.jacobian(pts))
        assert dets.min() > 0

    def test_jacobian_matches_finite_differences(self):
        res = local_linearize(make_family("poly_perturb", 2), 1.0)
        pts = sample_region(Ball(np.zeros(2), 0.9), 25, stream(14))
        assert max_jacobian_gap(res.map, pts, h=1e-5) <= 1e-5

    def test_roundtrip(self):
        res = local_linearize(make_family("twist", 2), 1.0)
        inv = res.map.inverse()
        pts = sample_region(Ball(np.zeros(2), 0.95), 500, stream(15))
        assert np.abs(inv(res.map(pts)) - pts).max() <= 1e-8

    def test_matrix_is_derivative_at_origin(self):
        H = make_family("shear", 2)
        res = local_linearize(H, 1.0)
        np.testing.assert_allclose(res.matrix, H.jacobian(np.zeros(2)), atol=1e-14)

    def test_moving_origin_rejected(self):
        H = AffineMap(np.eye(2), np.array([0.5, 0.0]))
        with pytest.raises(LinearizationError):
            local_linearize(H, 1.0)

    def test_reversing_derivative_rejected(self):
        # det < 0 at the fixed point cannot be linearized away
        H = AffineMap(np.array([[0.0, 1.0], [1.0, 0.0]]))
        with pytest.raises(OrientationError):
            local_linearize(H, 1.0)

    def test_delta2_out_of_range_rejected(self):
        with pytest.raises(ParameterError):
            local_linearize(make_family("rotation", 2), 1.0, delta2=0.3)

    def test_strong_contraction(self):
        # expansion/contraction well away from unitary still linearizes
        H = AffineMap(np.diag([0.4, 2.2]))
        res = local_linearize(H, 1.0)
        pts = sample_region(res.identity_ball(), 100, stream(16))
        assert (res.map(pts) == pts).all()
        outer = sample_region(Annulus(np.zeros(2), 0.6, 1.0), 100, stream(17))
        assert np.abs(res.map(outer) - H(outer)).max() <= 1e-12

    def test_composite_input(self):
        H = CompositeMap([make_family("rotation", 2), shear_map(2, 0.3)])
        res = local_linearize(H, 1.0)
        pts = sample_region(res.identity_ball(), 100, stream(18))
        assert (res.map(pts) == pts).all()

    def test_refined_map_changes_little(self):
        res = local_linearize(make_family("twist", 2), 1.0)
        fine = res.map.refined(2)
        if fine is None:
            pytest.skip("nothing to refine")
        pts = sample_region(Ball(np.zeros(2), 0.9), 200, stream(19))
        assert np.abs(fine(pts) - res.map(pts)).max() <= 1e-9
