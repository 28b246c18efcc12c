"""Global extension of ball diffeomorphisms with compact support.

Given a diffeomorphism H of a closed ball that fixes the center, produce a
diffeomorphism of all of R^n that agrees with H on the ball and is the
identity outside an epsilon-neighborhood of the ball and its image.  The
construction (everything in ball-centered coordinates):

1. pick a working collar width tau so that 3 * tau * max(1, Lip(H)) <= eps,
2. H1 = local linearization of H on radius rho + 3 tau: identity near 0,
   equal to H outside a much smaller ball,
3. Phi = radial squeeze collapsing B(rho + tau) into the identity zone of
   H1, trivial outside B(rho + 2 tau),
4. W = H1 o Phi^-1 o H1^-1 on the H1-image of B(rho + 3 tau), extended by
   the identity (legitimate: on the image of the outer shell the
   composition already is the identity),
5. H2 = W o Phi -- near the ball this retracts to H1 and beyond the shells
   it is the identity,
6. glue [H on B(rho + 0.9 tau), H2 elsewhere] on the overlap annulus
   (rho, rho + 0.9 tau), where H2 routes through the plateau of Phi and
   reproduces H to machine precision.

Maps that move the center are handled by `extend_ball_automorphism`, which
first recenters with an exactly-translating damped flow.  Families of
disjoint parametrized regions are standardized by `normalize_balls`, the
gadget the multi-ball gluing constructions build on.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AutomorphismError,
    GeometryError,
    MarginError,
    ParameterError,
    SamplingError,
)
from .flows import DampedTranslationMap
from .linearize import LinearizationResult, local_linearize
from .maps import (
    BallDiffeo,
    CompositeMap,
    PiecewiseMap,
    SmoothMap,
    TranslatedMap,
    extend_by_identity,
    glue_piecewise,
    radial_squeeze,
)
from .profiles import transition_profile
from .regions import (
    All,
    Annulus,
    Ball,
    Complement,
    ImageOf,
    Region,
    cloud_spacing,
    invert_with_flags,
    sample_region,
    sphere_points,
    stream,
)

#: Cap on collar halvings before giving up on the epsilon budget.
TAU_HALVINGS = 20

#: Default boundary-cloud resolution for conservative distance bounds.
CLOUD_COUNT = 512

#: Safety factor applied to sampled Lipschitz estimates.
LIP_MARGIN = 1.1


def _lipschitz_estimate(H: SmoothMap, region: Region, samples: int, rng) -> float:
    pts = sample_region(region, samples, rng)
    return float(np.linalg.norm(H.jacobian(pts), 2, axis=(1, 2)).max())


@dataclass
class PalaisExtension:
    """A compactly supported global extension of a ball diffeomorphism.

    `map` is the extension itself.  The pipeline pieces (`linearization`,
    `squeeze`, `conjugator`, `outer_map`, `glued`) live in ball-centered
    coordinates; `center` records the shift.  `identity_radius` is a
    conservative bound: outside Ball(center, identity_radius) the extension
    returns its input bitwise.
    """

    map: SmoothMap
    source: BallDiffeo
    epsilon: float
    tau: float
    lipschitz: float
    linearization: LinearizationResult
    squeeze: SmoothMap
    conjugator: SmoothMap
    outer_map: SmoothMap
    glued: PiecewiseMap
    identity_radius: float

    @property
    def center(self) -> np.ndarray:
        return self.source.center

    def core_region(self) -> Ball:
        """Where the extension is guaranteed to reproduce the input map."""
        return Ball(self.center, self.source.radius)

    def overlap_annulus(self) -> Annulus:
        return Annulus(self.center, self.source.radius, self.source.radius + 0.9 * self.tau)

    def inner_equality_radius(self) -> float:
        """Centered radius inside which outer_map coincides with the linearization."""
        return self.source.radius + self.tau

    def far_region(self) -> Complement:
        return Complement(Ball(self.center, self.identity_radius))


def palais_extend(
    ball: BallDiffeo,
    epsilon: float,
    *,
    glue_tol: float = 1e-10,
    cloud: int = CLOUD_COUNT,
    lip_samples: int = 512,
    fix_tol: float = 1e-9,
    seed: int = 0,
) -> PalaisExtension:
    """Extend a center-fixing ball diffeomorphism to all of R^n.

    The result agrees with `ball.map` on the closed ball, is the identity
    outside an epsilon-neighborhood of the ball and its image (conservative
    radius reported in the result), preserves orientation, and is invertible
    everywhere.  Raises MarginError when no collar width satisfies the
    epsilon budget, ParameterError when the map moves the center (recenter
    via extend_ball_automorphism instead).
    """
    if not epsilon > 0.0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}")
    c = ball.center
    rho = ball.radius
    n = ball.dimension
    origin = np.zeros(n)

    drift = ball.center_drift()
    if drift > fix_tol:
        raise ParameterError(
            f"ball map moves its center by {drift:.3e}; "
            "recenter first (extend_ball_automorphism does this automatically)"
        )

    centered = ball.map if not c.any() else TranslatedMap(ball.map, -c)

    # collar search: shrink tau until the displaced collar fits inside epsilon
    tau = rho * min(ball.margin, 0.9) / 3.0
    lip = 0.0
    for _ in range(TAU_HALVINGS + 1):
        collar = Annulus(origin, rho, rho + 3.0 * tau)
        try:
            lip = _lipschitz_estimate(centered, collar, lip_samples, stream(seed, 0x7A0))
        except SamplingError as exc:
            # the collar got too thin for the box sampler to hit: the budget
            # is unreachable long before that point
            raise MarginError(
                f"no collar width fits the epsilon budget: epsilon = {epsilon:.3e} "
                f"left a collar of width {3.0 * tau:.3e} that cannot be certified"
            ) from exc
        if 3.0 * tau * max(1.0, LIP_MARGIN * lip) <= epsilon:
            break
        tau *= 0.5
    else:
        raise MarginError(
            f"no collar width fits the epsilon budget: epsilon = {epsilon:.3e}, "
            f"Lipschitz estimate {lip:.3e} on the last collar"
        )

    lin = local_linearize(centered, rho + 3.0 * tau, glue_tol=glue_tol, seed=seed + 1)
    h1 = lin.map

    profile = transition_profile(
        rho + tau, rho + 2.0 * tau, lin.delta0 / (rho + tau), 1.0
    )
    phi = radial_squeeze(profile, origin)

    core = CompositeMap([h1, phi.inverse(), h1.inverse()])
    inner_region = ImageOf(h1, Ball(origin, rho + 3.0 * tau))
    safe_shell = ImageOf(h1, Annulus(origin, rho + 2.0 * tau, rho + 3.0 * tau))
    w = extend_by_identity(core, inner_region, safe_shell, tol=glue_tol, seed=seed + 2)
    h2 = CompositeMap([w, phi])

    # conservative radius of everything the pipeline can move
    sphere = sphere_points(origin, rho + 3.0 * tau, cloud)
    image_norms = np.linalg.norm(centered(sphere), axis=1)
    pad = 2.0 * LIP_MARGIN * max(lip, 1.0) * cloud_spacing(sphere)
    identity_radius = max(rho + 2.0 * tau, float(image_norms.max()) + pad, rho + epsilon)

    glued = glue_piecewise(
        [
            (Ball(origin, rho + 0.9 * tau), centered),
            (All(n), h2),
        ],
        overlaps=[(0, 1, Annulus(origin, rho, rho + 0.9 * tau))],
        tol=glue_tol,
        seed=seed + 3,
        support=Ball(origin, identity_radius),
    )

    final = glued if not c.any() else TranslatedMap(glued, c, support=Ball(c, identity_radius))
    return PalaisExtension(
        map=final,
        source=ball,
        epsilon=epsilon,
        tau=tau,
        lipschitz=lip,
        linearization=lin,
        squeeze=phi,
        conjugator=w,
        outer_map=h2,
        glued=glued,
        identity_radius=identity_radius,
    )


# ---------------------------------------------------------------------------
# automorphisms that move the center


@dataclass
class BallAutomorphismExtension:
    """Extension of a ball automorphism, with the recentering step exposed."""

    map: SmoothMap
    source: BallDiffeo
    epsilon: float
    recentering: DampedTranslationMap | None
    extension: PalaisExtension

    def core_region(self) -> Ball:
        return Ball(self.source.center, self.source.radius)

    def far_region(self) -> Complement:
        return self.extension.far_region()


def extend_ball_automorphism(
    ball: BallDiffeo,
    epsilon: float,
    *,
    sphere_tol: float = 1e-10,
    cloud: int = CLOUD_COUNT,
    glue_tol: float = 1e-10,
    seed: int = 0,
) -> BallAutomorphismExtension:
    """Extend an automorphism of a closed ball to all of R^n.

    Certifies on boundary clouds that the map carries the ball onto itself
    (sphere images and sphere preimages inside, tolerance `sphere_tol`),
    then conjugates away any center motion with a damped translation whose
    tube fits strictly inside the ball, and extends the recentered map.
    """
    G = ball.map
    a = ball.center
    r = ball.radius

    sphere = sphere_points(a, r, cloud)
    out_dev = float((np.linalg.norm(G(sphere) - a, axis=1) - r).max())
    if out_dev > sphere_tol:
        raise AutomorphismError(
            f"boundary sphere leaves the ball by {out_dev:.3e} under the map "
            f"(tolerance {sphere_tol:.1e}); not an automorphism of the ball"
        )
    pre, ok = invert_with_flags(G, G.inverse(), sphere)
    if not ok.all():
        raise AutomorphismError(
            f"could not invert the map on {int((~ok).sum())} boundary sample(s); "
            "cannot certify the ball maps onto itself"
        )
    in_dev = float((np.linalg.norm(pre - a, axis=1) - r).max())
    if in_dev > sphere_tol:
        raise AutomorphismError(
            f"boundary sphere has preimages outside the ball by {in_dev:.3e} "
            f"(tolerance {sphere_tol:.1e}); the map does not cover the ball"
        )

    drift_vec = G(a) - a
    drift = float(np.linalg.norm(drift_vec))
    if drift >= r:
        raise AutomorphismError(
            f"center image is {drift:.3e} away, at or beyond the ball radius {r:.3e}"
        )

    recenter = None
    recentered = G
    if drift > 1e-10 * max(1.0, r):
        tube = 0.5 * (r - drift)
        recenter = DampedTranslationMap(G(a), a, 0.5 * tube, tube)
        recentered = CompositeMap([recenter, G])

    inner = palais_extend(
        BallDiffeo(recentered, a, r, ball.margin), epsilon, glue_tol=glue_tol, cloud=cloud, seed=seed
    )
    extended = inner.map if recenter is None else CompositeMap([recenter.inverse(), inner.map])
    return BallAutomorphismExtension(
        map=extended, source=ball, epsilon=epsilon, recentering=recenter, extension=inner
    )


# ---------------------------------------------------------------------------
# families of parametrized regions


@dataclass
class NormalizedFamily:
    """Standardization of a family of disjoint parametrized regions.

    `map` is one global diffeomorphism carrying each round ball
    B(anchor_i, epsilon) onto region_i by the rescaled chart, and equal to
    the identity away from the regions.  dist(region_i, region_j) > 4 eps
    and B(anchor_i, eps) inside region_i are certified on boundary clouds.
    """

    map: SmoothMap
    balls: list
    epsilon: float
    anchors: np.ndarray
    charts: list
    extensions: list
    clouds: list

    @property
    def dimension(self) -> int:
        return self.anchors.shape[1]

    def anchor_ball(self, i: int) -> Ball:
        return Ball(self.anchors[i], self.epsilon)


def _family_geometry(balls, cloud: int):
    """Boundary clouds, anchors, conservative inradii and pairwise gaps."""
    anchors = []
    clouds = []
    spacings = []
    for b in balls:
        anchors.append(b.map(b.center))
        pts = b.map(sphere_points(b.center, b.radius, cloud))
        clouds.append(pts)
        spacings.append(cloud_spacing(pts))
    anchors = np.asarray(anchors)
    inradii = np.array(
        [
            np.linalg.norm(cl - p, axis=1).min() - s
            for cl, p, s in zip(clouds, anchors, spacings)
        ]
    )
    k = len(balls)
    gaps = np.full((k, k), np.inf)
    for i in range(k):
        for j in range(i + 1, k):
            d = np.linalg.norm(clouds[i][:, None, :] - clouds[j][None, :, :], axis=2).min()
            gaps[i, j] = gaps[j, i] = d - spacings[i] - spacings[j]
    return anchors, clouds, inradii, gaps


def normalize_balls(
    balls,
    epsilon: float | None = None,
    *,
    extension_factor: float = 0.8,
    cloud: int = CLOUD_COUNT,
    glue_tol: float = 1e-10,
    seed: int = 0,
) -> NormalizedFamily:
    """One diffeomorphism standardizing every region of a disjoint family.

    Each region D_i = chart_i(ball_i) gets an anchor p_i = chart_i(center_i)
    and a rescaled chart mapping B(p_i, eps) onto D_i while fixing p_i; that
    chart is a center-fixing ball diffeomorphism (its working set is D_i
    itself, because the eps-ball sits inside D_i), so it extends with
    support in an eps-collar of D_i.  The extensions have disjoint supports
    -- certified via dist(D_i, D_j) > 4 eps -- and compose into `map`.

    Without an explicit epsilon the largest certifiable value (times 0.8)
    is chosen.  GeometryError reports which requirement failed.
    """
    balls = list(balls)
    if not balls:
        raise ParameterError("normalize_balls needs at least one region")
    dims = {b.dimension for b in balls}
    if len(dims) != 1:
        raise ParameterError(f"regions mix dimensions {sorted(dims)}")

    anchors, clouds, inradii, gaps = _family_geometry(balls, cloud)
    min_gap = float(gaps.min()) if len(balls) > 1 else np.inf
    if np.any(inradii <= 0.0):
        i = int(np.argmin(inradii))
        raise GeometryError(
            f"region {i} is too thin at its anchor: certified inradius "
            f"{inradii[i]:.3e} (raise the cloud resolution or recheck the chart)"
        )

    if epsilon is None:
        epsilon = 0.8 * min(float(inradii.min()), min_gap / 4.0)
        if not epsilon > 0.0:
            raise GeometryError("regions leave no room for a positive epsilon")
    else:
        if not epsilon > 0.0:
            raise ParameterError(f"epsilon must be positive, got {epsilon}")
        bad = np.where(inradii <= epsilon)[0]
        if bad.size:
            raise GeometryError(
                f"epsilon = {epsilon:.3e} does not fit inside region(s) {bad.tolist()} "
                f"(certified inradii {np.round(inradii[bad], 6).tolist()})"
            )
        if min_gap <= 4.0 * epsilon:
            raise GeometryError(
                f"family separation {min_gap:.3e} must exceed 4 * epsilon = {4 * epsilon:.3e}"
            )

    charts = []
    extensions = []
    for i, b in enumerate(balls):
        p = anchors[i]
        scale = b.radius / epsilon
        pre = _anchored_rescale(p, b.center, scale)
        chart = CompositeMap([b.map, pre])
        chart_ball = BallDiffeo(chart, p, epsilon, b.margin)
        ext = palais_extend(
            chart_ball, extension_factor * epsilon, glue_tol=glue_tol, cloud=cloud, seed=seed + 17 * i
        )
        charts.append(chart_ball)
        extensions.append(ext)

    glued = extensions[0].map if len(extensions) == 1 else CompositeMap([e.map for e in extensions])
    return NormalizedFamily(
        map=glued,
        balls=balls,
        epsilon=float(epsilon),
        anchors=anchors,
        charts=charts,
        extensions=extensions,
        clouds=clouds,
    )


def _anchored_rescale(p, c, scale: float):
    """Affine x -> c + scale * (x - p): carries B(p, r) onto B(c, scale * r)."""
    from .maps import AffineMap

    p = np.asarray(p, dtype=float)
    c = np.asarray(c, dtype=float)
    n = p.shape[0]
    return AffineMap(scale * np.eye(n), c - scale * p)
