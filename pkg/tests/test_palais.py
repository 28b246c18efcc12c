"""Tests for the compactly supported extension of ball diffeomorphisms.

One extension per (family, dimension) pair is built once per module and
probed from many angles: bitwise agreement on the ball, bitwise identity
beyond the reported radius, the collar budget, the two internal
consistency identities of the outer map, and global invertibility.
"""
import numpy as np
import pytest

from conftest import FAMILIES, make_family, max_jacobian_gap
from diffeoglue.errors import AutomorphismError, MarginError, ParameterError
from diffeoglue.flows import DampedTranslationMap
from diffeoglue.maps import BallDiffeo, CompositeMap, shear_map
from diffeoglue.palais import extend_ball_automorphism, palais_extend
from diffeoglue.regions import All, Annulus, Ball, grid_in_region, sample_region, stream


@pytest.fixture(scope="module", params=[(f, n) for f in FAMILIES for n in (2, 3)], ids=lambda p: f"{p[0]}-{p[1]}d")
def extension(request):
    family, n = request.param
    ball = BallDiffeo(make_family(family, n), np.zeros(n), 1.0, 0.35)
    return palais_extend(ball, 0.5, seed=100)


class TestExtensionContract:
    def test_agrees_on_ball_bitwise(self, extension):
        n = extension.source.dimension
        pts = sample_region(Ball(np.zeros(n), 1.0), 300, stream(40, n))
        np.testing.assert_array_equal(extension.map(pts), extension.source.map(pts))

    def test_identity_beyond_reported_radius_bitwise(self, extension):
        n = extension.source.dimension
        R = extension.identity_radius
        pts = sample_region(Annulus(np.zeros(n), R * 1.0000001, R + 3.0), 300, stream(41, n))
        assert (extension.map(pts) == pts).all()

    def test_collar_fits_epsilon_budget(self, extension):
        assert extension.tau > 0
        assert 3.0 * extension.tau * max(1.0, 1.1 * extension.lipschitz) <= extension.epsilon

    def test_roundtrip(self, extension):
        n = extension.source.dimension
        inv = extension.map.inverse()
        pts = sample_region(Ball(np.zeros(n), extension.identity_radius), 500, stream(42, n))
        assert np.abs(inv(extension.map(pts)) - pts).max() <= 1e-8

    def test_orientation_preserved(self, extension):
        n = extension.source.dimension
        grid = grid_in_region(Ball(np.zeros(n), extension.identity_radius), 2000)
        dets = np.linalg.det(extension.map.jacobian(grid))
        assert dets.min() > 0

    def test_overlap_pieces_agree(self, extension):
        worst, _, evidence = extension.glued.audit_seams(samples=200, seed=7)
        assert worst <= 1e-10
        assert evidence

    def test_conjugator_fixes_safe_shell(self, extension):
        # through the inner chart: W(h1(y)) = h1(y) on the outer collar ring
        n = extension.source.dimension
        rho, tau = 1.0, extension.tau
        ring = sample_region(Annulus(np.zeros(n), rho + 2.0 * tau, rho + 3.0 * tau), 150, stream(43, n))
        h1 = extension.linearization.map
        img = h1(ring)
        assert np.abs(extension.conjugator(img) - img).max() <= 1e-10

    def test_outer_map_matches_linearization_inside(self, extension):
        # the squeeze drops the collar into the identity core, so the outer
        # map degenerates to the linearization on B(0, rho + tau)
        n = extension.source.dimension
        pts = sample_region(Ball(np.zeros(n), 1.0 + extension.tau), 150, stream(44, n))
        h1 = extension.linearization.map
        assert np.abs(extension.outer_map(pts) - h1(pts)).max() <= 1e-10


class TestRadiusPreservingFamilies:
    """Twist and rotation carry the ball onto itself, so A = B-bar and the
    epsilon-identity region has a clean closed form to test against."""

    @pytest.mark.parametrize("family", ["rotation", "twist"])
    def test_identity_within_epsilon_of_ball(self, family):
        n = 2
        eps = 0.5
        ball = BallDiffeo(make_family(family, n), np.zeros(n), 1.0, 0.35)
        ext = palais_extend(ball, eps, seed=101)
        # H(B) = B here, so dist(x, A) >= eps simply means |x| >= 1 + eps
        pts = sample_region(Annulus(np.zeros(n), 1.0 + eps, ext.identity_radius + 1.0), 400, stream(45))
        gap = np.linalg.norm(ext.map(pts) - pts, axis=1)
        assert gap.max() <= 1e-13


class TestOffCenterExtension:
    def test_conjugated_extension(self):
        c = np.array([1.5, -0.75])
        H = make_family("rotation", 2)
        from diffeoglue.maps import rotation_map

        ball = BallDiffeo(rotation_map(2, 1.1, center=c), c, 1.0, 0.35)
        ext = palais_extend(ball, 0.35, seed=102)
        pts = sample_region(Ball(c, 1.0), 300, stream(46))
        assert np.abs(ext.map(pts) - ball.map(pts)).max() <= 1e-12
        far = sample_region(Annulus(c, ext.identity_radius + 1e-9, ext.identity_radius + 2.0), 300, stream(47))
        assert (ext.map(far) == far).all()

    def test_center_region_accessors(self):
        c = np.array([0.5, 0.25, -0.5])
        from diffeoglue.maps import TwistMap

        ball = BallDiffeo(TwistMap(c, -0.8, inner=0.35, outer=1.3), c, 1.0, 0.35)
        ext = palais_extend(ball, 0.2, seed=103)
        np.testing.assert_array_equal(ext.center, c)
        assert ext.core_region().radius == 1.0
        assert ext.overlap_annulus().r_outer == pytest.approx(1.0 + 0.9 * ext.tau)
        assert ext.far_region().contains_point(c + ext.identity_radius + 1.0)


class TestExtensionErrors:
    def test_nonpositive_epsilon(self):
        ball = BallDiffeo(make_family("rotation", 2), np.zeros(2), 1.0, 0.35)
        with pytest.raises(ParameterError):
            palais_extend(ball, 0.0)

    def test_center_moving_map_rejected(self):
        from diffeoglue.maps import AffineMap

        H = AffineMap(np.eye(2), np.array([0.3, 0.0]))
        ball = BallDiffeo(H, np.zeros(2), 1.0, 0.35)
        with pytest.raises(ParameterError):
            palais_extend(ball, 0.5)

    def test_impossible_epsilon_budget(self):
        ball = BallDiffeo(make_family("rotation", 2), np.zeros(2), 1.0, 0.35)
        with pytest.raises(MarginError):
            palais_extend(ball, 1e-12)


class TestBallAutomorphism:
    def test_twist_is_an_automorphism(self):
        n = 2
        tw = make_family("twist", n)  # identity from radius 1.3 on
        ball = BallDiffeo(tw, np.zeros(n), 1.5, 0.3)
        ext = extend_ball_automorphism(ball, 0.4, seed=104)
        assert ext.recentering is None
        pts = sample_region(Ball(np.zeros(n), 1.5), 200, stream(48))
        assert np.abs(ext.map(pts) - tw(pts)).max() <= 1e-12

    def test_center_moving_automorphism_recenters(self):
        # a damped translation inside the ball moves the center but fixes
        # a neighbourhood of the boundary sphere
        a = np.zeros(2)
        inner_move = DampedTranslationMap(a, np.array([0.3, 0.0]), 0.2, 0.6)
        ball = BallDiffeo(inner_move, a, 1.0, 0.3)
        ext = extend_ball_automorphism(ball, 0.4, seed=105)
        assert ext.recentering is not None
        pts = sample_region(Ball(a, 1.0), 200, stream(49))
        assert np.abs(ext.map(pts) - inner_move(pts)).max() <= 1e-8
        far = sample_region(Annulus(a, 5.0, 8.0), 100, stream(50))
        assert np.abs(ext.map(far) - far).max() <= 1e-9

    def test_non_automorphism_rejected(self):
        ball = BallDiffeo(shear_map(2, 0.45), np.zeros(2), 1.0, 0.3)
        with pytest.raises(AutomorphismError):
            extend_ball_automorphism(ball, 0.4)
