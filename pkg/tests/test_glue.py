"""Tests for multi-region gluing and map insertion.

Small, fast geometries: two unit balls three units apart, short transport
routes.  The heavyweight scenarios live in the shipped fixtures; here the
point is the contract per feature -- per-region agreement, bitwise far
identity, transport routing, and the precondition errors.
"""
import numpy as np
import pytest

from diffeoglue.errors import GeometryError, ParameterError
from diffeoglue.glue import glue_ball_maps, insert_inner_map
from diffeoglue.maps import (
    AffineMap,
    BallDiffeo,
    CompositeMap,
    IdentityMap,
    rotation_map,
)
from diffeoglue.regions import Annulus, Ball, sample_region, stream


def identity_chart(center, radius=1.0, margin=0.4):
    center = np.asarray(center, dtype=float)
    return BallDiffeo(IdentityMap(center.shape[0]), center, radius, margin)


# Certification clouds of 160 points keep this module fast; the shipped
# fixtures exercise the default density.
CLOUD = 160


@pytest.fixture(scope="module")
def rotor_pair():
    """Two disjoint balls, each rotated in place about its own center."""
    left, right = identity_chart([-3.0, 0.0]), identity_chart([3.0, 0.0])
    maps = [
        rotation_map(2, 0.6, center=[-3.0, 0.0]),
        rotation_map(2, -0.8, center=[3.0, 0.0]),
    ]
    result = glue_ball_maps(
        [left, right], [left, right], maps, epsilon=0.5, seed=200, cloud=CLOUD
    )
    return result, maps


class TestInPlaceRotors:
    def test_realizes_each_map_on_its_ball(self, rotor_pair):
        result, maps = rotor_pair
        for i, (chart, mp) in enumerate(zip(result.sources.balls, maps)):
            pts = sample_region(chart.core_ball(), 400, stream(60, i))
            gap = np.linalg.norm(result.map(pts) - mp(pts), axis=1)
            assert gap.max() <= 1e-9

    def test_identity_far_away_bitwise(self, rotor_pair):
        result, _ = rotor_pair
        far = result.far_region()
        pts = sample_region(far, 400, stream(61), window=Annulus(np.zeros(2), 0.0, 12.0))
        assert (result.map(pts) == pts).all()

    def test_roundtrip(self, rotor_pair):
        result, _ = rotor_pair
        inv = result.map.inverse()
        pts = sample_region(Ball(np.zeros(2), 6.0), 400, stream(62))
        assert np.abs(inv(result.map(pts)) - pts).max() <= 1e-7

    def test_orientation(self, rotor_pair):
        result, _ = rotor_pair
        pts = sample_region(Ball(np.zeros(2), 6.0), 400, stream(63))
        assert np.linalg.det(result.map.jacobian(pts)).min() > 0

    def test_no_transport_needed_in_place(self, rotor_pair):
        result, _ = rotor_pair
        # anchors coincide, so the transport stage degenerates
        pts = np.array([[0.0, 3.0], [0.0, -4.0]])
        np.testing.assert_array_equal(result.transport(pts), pts)


class TestTranslationGlue:
    def test_ball_carried_to_target(self):
        src = identity_chart([-1.5, 0.0], radius=0.8)
        dst = identity_chart([1.5, 0.5], radius=0.8)
        shift = AffineMap(np.eye(2), np.array([3.0, 0.5]))
        result = glue_ball_maps(
            [src], [dst], [shift], epsilon=0.4, seed=201, cloud=CLOUD
        )
        pts = sample_region(src.core_ball(), 300, stream(64))
        gap = np.linalg.norm(result.map(pts) - shift(pts), axis=1)
        assert gap.max() <= 1e-9

    def test_polyline_route_honoured(self):
        src = identity_chart([-1.5, 0.0], radius=0.6)
        dst = identity_chart([1.5, 0.0], radius=0.6)
        shift = AffineMap(np.eye(2), np.array([3.0, 0.0]))
        route = [[1.5, 0.0], [0.0, 2.0], [-1.5, 0.0]]  # detour over the top
        result = glue_ball_maps(
            [src], [dst], [shift],
            routes=[route], epsilon=0.4, seed=202, cloud=CLOUD,
        )
        pts = sample_region(src.core_ball(), 200, stream(65))
        gap = np.linalg.norm(result.map(pts) - shift(pts), axis=1)
        assert gap.max() <= 1e-9
        # a point under the straight line stays put: transport went around
        below = np.array([-0.2, -2.5])
        np.testing.assert_array_equal(result.map(below), below)


class TestGlueErrors:
    def test_mismatched_lengths(self):
        a = identity_chart([0.0, 0.0])
        with pytest.raises(ParameterError):
            glue_ball_maps([a], [a, a], [IdentityMap(2)])

    def test_crossing_routes_name_the_pair(self):
        charts_src = [identity_chart([-3.0, 0.0]), identity_chart([3.0, 0.0])]
        charts_dst = [identity_chart([3.0, 0.0]), identity_chart([-3.0, 0.0])]
        maps = [
            AffineMap(np.eye(2), np.array([6.0, 0.0])),
            AffineMap(np.eye(2), np.array([-6.0, 0.0])),
        ]
        with pytest.raises(GeometryError) as err:
            glue_ball_maps(charts_src, charts_dst, maps, epsilon=0.5, seed=203, cloud=CLOUD)
        msg = str(err.value)
        assert "0" in msg and "1" in msg

    def test_overlapping_region_balls_rejected(self):
        a = identity_chart([0.0, 0.0])
        b = identity_chart([1.5, 0.0])  # overlaps a
        with pytest.raises(GeometryError):
            glue_ball_maps([a, b], [a, b], [IdentityMap(2)] * 2, epsilon=0.5)


@pytest.fixture(scope="module")
def inserted():
    region = identity_chart([0.0, 0.0], radius=1.0, margin=0.5)
    inner = rotation_map(2, np.pi / 6.0)
    result = insert_inner_map(
        IdentityMap(2), region, inner,
        epsilon=0.4, domain=Ball(np.zeros(2), 2.5), seed=204, cloud=CLOUD,
    )
    return result, inner


class TestInsertion:
    def test_inner_map_realized_on_region(self, inserted):
        result, inner = inserted
        pts = sample_region(Ball(np.zeros(2), 1.0), 300, stream(66))
        gap = np.linalg.norm(result.map(pts) - inner(pts), axis=1)
        assert gap.max() <= 1e-9

    def test_base_restored_far_away(self, inserted):
        result, _ = inserted
        pts = sample_region(Annulus(np.zeros(2), 2.5, 4.0), 300, stream(67))
        assert (result.map(pts) == pts).all()

    def test_roundtrip(self, inserted):
        result, _ = inserted
        inv = result.map.inverse()
        # each point drives a Newton solve through the whole composite, so
        # keep the probe small
        pts = sample_region(Ball(np.zeros(2), 2.4), 80, stream(68))
        assert np.abs(inv(result.map(pts)) - pts).max() <= 1e-7

    def test_region_ball_accessor(self, inserted):
        result, _ = inserted
        assert result.region_ball().radius == 1.0
