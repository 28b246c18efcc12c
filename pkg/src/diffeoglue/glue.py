"""Gluing prescribed diffeomorphisms on disjoint regions into one global map.

The multi-ball gluing problem: given source regions D_i = chart_i(ball_i),
target regions E_i, and per-region diffeomorphisms F_i : D_i -> E_i, build
one diffeomorphism F of R^n with F = F_i on every D_i, equal to the
identity far away.  Strategy:

    F  =  A2 o H^-1 o G o A1^-1

* A1 standardizes the sources: it carries each round ball B(p_i, eps) onto
  D_i (anchor p_i inside D_i) and is the identity elsewhere,
* H transports the target anchor balls B(q_i, eps) onto the source anchor
  balls by exactly-translating damped flows along disjoint tubes,
* G corrects: g_i = H o A2^-1 o F_i o A1 restricted to B(p_i, eps) is an
  automorphism of that ball (it chains the round ball through D_i, E_i and
  back), and G glues the compactly supported extensions of these
  automorphisms.

Restricted to D_i the formula telescopes to F_i; away from all regions and
tubes every factor is the identity, bitwise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContainmentError, GeometryError, ParameterError
from .flows import CLAMP_OVERHANG, move_balls
from .maps import BallDiffeo, CompositeMap, IdentityMap, SmoothMap
from .palais import (
    CLOUD_COUNT,
    NormalizedFamily,
    _family_geometry,
    extend_ball_automorphism,
    normalize_balls,
)
from .regions import (
    Ball,
    Box,
    Complement,
    Region,
    Union,
    point_segment_distance,
)

#: Margin handed to every corrector extension.  The collar search never
#: evaluates a corrector beyond radius (1 + CORRECTOR_MARGIN) * epsilon of
#: its anchor, which lets the transport plateau be sized to cover all of it.
CORRECTOR_MARGIN = 0.15

#: Transport plateau radius as a multiple of epsilon.  Strictly larger than
#: 1 + CORRECTOR_MARGIN, so the correctors only ever sample the transport
#: where it is a bitwise-exact translation; their certification then never
#: pays for flow-integration error, only for the Newton inversions.
PAYLOAD_FACTOR = 1.2


@dataclass
class GlueResult:
    """A global diffeomorphism realizing prescribed maps on disjoint regions."""

    map: SmoothMap
    sources: NormalizedFamily
    targets: NormalizedFamily
    inner_maps: list
    transport: SmoothMap
    correctors: list
    epsilon: float
    routes: list
    domain: Region | None

    @property
    def dimension(self) -> int:
        return self.sources.dimension

    def source_region_ball(self, i: int) -> BallDiffeo:
        return self.sources.balls[i]

    def far_region(self) -> Region:
        """Conservative region on which the glued map is the identity."""
        if self.domain is not None:
            return Complement(self.domain)
        pads = []
        for fam in (self.sources, self.targets):
            for p, cl in zip(fam.anchors, fam.clouds):
                r = float(np.linalg.norm(cl - p, axis=1).max()) + 2.2 * self.epsilon
                pads.append(Ball(p, r))
        for route in self.routes:
            v = np.asarray(route, dtype=float)
            mid = 0.5 * (v.min(axis=0) + v.max(axis=0))
            r = 0.5 * float(np.linalg.norm(v.max(axis=0) - v.min(axis=0))) + 2.5 * self.epsilon
            pads.append(Ball(mid, r))
        return Complement(Union(tuple(pads)))


def _domain_clearance(domain: Region, clouds, spacings, need: float):
    """Certify every cloud keeps `need` distance to the domain boundary."""
    for i, (cl, s) in enumerate(zip(clouds, spacings)):
        if isinstance(domain, Ball):
            margin = domain.radius - float(np.linalg.norm(cl - domain.center, axis=1).max())
        elif isinstance(domain, Box):
            margin = float(
                min((cl - domain.lo).min(), (domain.hi - cl).min())
            )
        else:
            raise ParameterError(
                f"containment certification supports Ball and Box domains, got {type(domain).__name__}"
            )
        if margin - s < need:
            raise ContainmentError(
                f"region {i} is only {margin:.6g} from the domain boundary; "
                f"needs more than {need + s:.6g} for the working collars"
            )


def _common_epsilon(source_geom, target_geom, n_regions: int) -> float:
    candidates = []
    for anchors, clouds, inradii, gaps in (source_geom, target_geom):
        candidates.append(float(inradii.min()))
        if n_regions > 1:
            candidates.append(float(gaps.min()) / 4.0)
    eps = 0.8 * min(candidates)
    if not eps > 0.0:
        raise GeometryError("regions leave no room for a positive epsilon")
    return eps


def glue_ball_maps(
    sources,
    targets,
    inner_maps,
    *,
    routes=None,
    epsilon: float | None = None,
    domain: Region | None = None,
    glue_tol: float = 1e-10,
    cloud: int = CLOUD_COUNT,
    seed: int = 0,
) -> GlueResult:
    """Glue diffeomorphisms prescribed on disjoint parametrized regions.

    sources, targets: equal-length lists of BallDiffeo charts; region i is
    sources[i].map(ball) and must be carried onto the target region by
    inner_maps[i].  `routes` optionally gives a polyline q_i -> p_i per
    region (target anchor to source anchor); by default straight segments
    are used and regions whose anchors coincide need no transport at all.
    With `domain` given, everything the construction moves is certified to
    stay inside it and the result is the identity outside.
    """
    sources = list(sources)
    targets = list(targets)
    inner_maps = list(inner_maps)
    if not (len(sources) == len(targets) == len(inner_maps)):
        raise ParameterError(
            f"got {len(sources)} sources, {len(targets)} targets, {len(inner_maps)} maps"
        )
    if not sources:
        raise ParameterError("gluing needs at least one region")
    n = sources[0].dimension

    source_geom = _family_geometry(sources, cloud)
    target_geom = _family_geometry(targets, cloud)
    if epsilon is None:
        epsilon = _common_epsilon(source_geom, target_geom, len(sources))

    if domain is not None:
        _domain_clearance(domain, source_geom[1], _spacings(source_geom), 2.1 * epsilon)
        _domain_clearance(domain, target_geom[1], _spacings(target_geom), 2.1 * epsilon)

    src_fam = normalize_balls(sources, epsilon, glue_tol=glue_tol, cloud=cloud, seed=seed)
    tgt_fam = normalize_balls(targets, epsilon, glue_tol=glue_tol, cloud=cloud, seed=seed + 1)
    p, q = src_fam.anchors, tgt_fam.anchors

    # transport: move each target anchor ball onto its source anchor ball
    scale = max(1.0, float(np.abs(np.concatenate([p, q])).max()))
    if routes is None:
        routes = [None] * len(sources)
    active_routes = []
    active_idx = []
    for i, route in enumerate(routes):
        if route is None:
            if np.linalg.norm(q[i] - p[i]) <= 1e-12 * scale:
                continue
            route = np.stack([q[i], p[i]])
        else:
            route = np.asarray(route, dtype=float)
            if np.linalg.norm(route[0] - q[i]) > 1e-9 * scale or np.linalg.norm(route[-1] - p[i]) > 1e-9 * scale:
                raise ParameterError(
                    f"route {i} must run from the target anchor {np.round(q[i], 6).tolist()} "
                    f"to the source anchor {np.round(p[i], 6).tolist()}"
                )
        active_routes.append(route)
        active_idx.append(i)

    tube = 2.0 * epsilon
    if active_routes:
        transport = move_balls(active_routes, PAYLOAD_FACTOR * epsilon, tube, domain=domain)
        _check_parked_anchors(active_routes, active_idx, p, epsilon, tube, scale)
    else:
        transport = IdentityMap(n)

    # correctors: ball automorphisms of the source anchor balls
    correctors = []
    for i in range(len(sources)):
        g_i = CompositeMap(
            [transport, tgt_fam.map.inverse(), inner_maps[i], src_fam.map]
        )
        ext = extend_ball_automorphism(
            BallDiffeo(g_i, p[i], epsilon, CORRECTOR_MARGIN),
            0.8 * epsilon,
            glue_tol=glue_tol,
            cloud=cloud,
            seed=seed + 31 * (i + 1),
        )
        correctors.append(ext)

    g = correctors[0].map if len(correctors) == 1 else CompositeMap([c.map for c in correctors])
    final = CompositeMap([tgt_fam.map, transport.inverse(), g, src_fam.map.inverse()])
    return GlueResult(
        map=final,
        sources=src_fam,
        targets=tgt_fam,
        inner_maps=inner_maps,
        transport=transport,
        correctors=correctors,
        epsilon=float(epsilon),
        routes=active_routes,
        domain=domain,
    )


def _spacings(geom):
    from .regions import cloud_spacing

    _, clouds, _, _ = geom
    return [cloud_spacing(cl) for cl in clouds]


def _check_parked_anchors(active_routes, active_idx, anchors, epsilon, tube, scale):
    """Tubes must stay clear of the anchors that are not being moved.

    Clearance covers the full corrector working ball of a parked region, so
    its certification samples only ever see the transport as the identity.
    """
    overhang = CLAMP_OVERHANG * tube  # worst smoothing extension of any segment
    need = tube + overhang + (1.0 + CORRECTOR_MARGIN) * epsilon
    for j in range(anchors.shape[0]):
        if j in active_idx:
            continue
        for i, route in zip(active_idx, active_routes):
            v = np.asarray(route, dtype=float)
            for k in range(v.shape[0] - 1):
                d = float(point_segment_distance(anchors[j], v[k], v[k + 1])[0])
                if d <= need:
                    raise GeometryError(
                        f"transport tube of region {i} passes within {d:.6g} of the "
                        f"parked anchor of region {j}; needs more than {need:.6g}"
                    )


@dataclass
class InsertionResult:
    """A deformation of a global map that realizes a prescribed inner map."""

    map: SmoothMap
    base: SmoothMap
    inner: SmoothMap
    glue: GlueResult

    def region_ball(self) -> BallDiffeo:
        return self.glue.sources.balls[0]


def insert_inner_map(
    base: SmoothMap,
    region: BallDiffeo,
    inner: SmoothMap,
    *,
    epsilon: float | None = None,
    domain: Region | None = None,
    glue_tol: float = 1e-10,
    cloud: int = CLOUD_COUNT,
    seed: int = 0,
) -> InsertionResult:
    """Replace what `base` does on a region with a prescribed inner map.

    Returns H with H = `inner` on the region D = region.map(ball) and
    H = `base` (bitwise, outside a collar) away from D and base^-1(inner(D)).
    Built as H = base o Phi where Phi glues the single pair
    (D, base^-1 o inner): Phi is the identity far away, so H literally
    evaluates `base` there.
    """
    base_inv = base.inverse()
    pair_map = CompositeMap([base_inv, inner])
    target = BallDiffeo(
        CompositeMap([base_inv, inner, region.map]),
        region.center,
        region.radius,
        region.margin,
    )
    glue = glue_ball_maps(
        [region],
        [target],
        [pair_map],
        epsilon=epsilon,
        domain=domain,
        glue_tol=glue_tol,
        cloud=cloud,
        seed=seed,
    )
    return InsertionResult(map=CompositeMap([base, glue.map]), base=base, inner=inner, glue=glue)
