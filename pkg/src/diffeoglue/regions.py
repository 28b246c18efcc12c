"""Regions of R^n with deterministic membership, bounds and samplers.

Membership is vectorized: ``contains`` takes an (m, n) array and returns an
(m,) boolean mask.  ``bounds`` returns an axis-aligned bounding box or None
for unbounded regions; samplers then need an explicit window.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, SamplingError

#: Rejection sampling gives up below this acceptance rate.
MIN_ACCEPTANCE = 1e-4


def as_points(X, dim: int | None = None):
    """Coerce to an (m, n) float array; returns (points, was_single_point)."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim != 2:
        raise ParameterError(f"expected point array of shape (m, n) or (n,), got {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise ParameterError(f"points have dimension {arr.shape[1]}, expected {dim}")
    return arr, False


class Region:
    """Deterministic point-set of R^n."""

    dimension: int

    def contains(self, X) -> np.ndarray:
        raise NotImplementedError

    def bounds(self):
        """(lo, hi) arrays of the bounding box, or None if unbounded."""
        return None

    def contains_point(self, x) -> bool:
        pts, _ = as_points(x, self.dimension)
        return bool(self.contains(pts)[0])


@dataclass(frozen=True)
class Ball(Region):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.center.ndim != 1:
            raise ParameterError("ball center must be a vector")
        if not self.radius > 0:
            raise ParameterError(f"ball radius must be positive, got {self.radius}")

    @property
    def dimension(self) -> int:
        return self.center.shape[0]

    def contains(self, X):
        pts, _ = as_points(X, self.dimension)
        return np.linalg.norm(pts - self.center, axis=1) <= self.radius

    def bounds(self):
        return self.center - self.radius, self.center + self.radius


@dataclass(frozen=True)
class Annulus(Region):
    center: np.ndarray
    r_inner: float
    r_outer: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not (0.0 <= self.r_inner < self.r_outer):
            raise ParameterError(
                f"annulus needs 0 <= r_inner < r_outer, got {self.r_inner}, {self.r_outer}"
            )

    @property
    def dimension(self) -> int:
        return self.center.shape[0]

    def contains(self, X):
        pts, _ = as_points(X, self.dimension)
        r = np.linalg.norm(pts - self.center, axis=1)
        return (r >= self.r_inner) & (r <= self.r_outer)

    def bounds(self):
        return self.center - self.r_outer, self.center + self.r_outer


def point_segment_distance(X, a, b) -> np.ndarray:
    """Distances from points (m, n) to the closed segment [a, b]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    pts, _ = as_points(X, a.shape[0])
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(pts - a, axis=1)
    t = np.clip((pts - a) @ ab / denom, 0.0, 1.0)
    return np.linalg.norm(pts - (a + t[:, None] * ab), axis=1)


def segment_segment_distance(p1, q1, p2, q2) -> float:
    """Distance between closed segments [p1, q1] and [p2, q2]."""
    p1, q1 = np.asarray(p1, dtype=float), np.asarray(q1, dtype=float)
    p2, q2 = np.asarray(p2, dtype=float), np.asarray(q2, dtype=float)
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    a, e, f = float(d1 @ d1), float(d2 @ d2), float(d2 @ r)
    if a == 0.0 and e == 0.0:
        return float(np.linalg.norm(r))
    if a == 0.0:
        t = np.clip(f / e, 0.0, 1.0)
        return float(np.linalg.norm(p1 - (p2 + t * d2)))
    c = float(d1 @ r)
    if e == 0.0:
        s = np.clip(-c / a, 0.0, 1.0)
        return float(np.linalg.norm(p1 + s * d1 - p2))
    b = float(d1 @ d2)
    denom = a * e - b * b
    s = np.clip((b * f - c * e) / denom, 0.0, 1.0) if denom > 0.0 else 0.0
    t = (b * s + f) / e
    if t < 0.0:
        t, s = 0.0, np.clip(-c / a, 0.0, 1.0)
    elif t > 1.0:
        t, s = 1.0, np.clip((b - c) / a, 0.0, 1.0)
    return float(np.linalg.norm(p1 + s * d1 - (p2 + t * d2)))


@dataclass(frozen=True)
class Capsule(Region):
    """All points within `radius` of the segment [a, b]."""

    a: np.ndarray
    b: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        if self.a.shape != self.b.shape or self.a.ndim != 1:
            raise ParameterError("capsule endpoints must be equal-length vectors")
        if not self.radius > 0:
            raise ParameterError(f"capsule radius must be positive, got {self.radius}")

    @property
    def dimension(self) -> int:
        return self.a.shape[0]

    def contains(self, X):
        return point_segment_distance(X, self.a, self.b) <= self.radius

    def bounds(self):
        lo = np.minimum(self.a, self.b) - self.radius
        hi = np.maximum(self.a, self.b) + self.radius
        return lo, hi


@dataclass(frozen=True)
class Box(Region):
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float))
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise ParameterError("box corners must be equal-length vectors")
        if np.any(self.lo >= self.hi):
            raise ParameterError("box needs lo < hi in every axis")

    @property
    def dimension(self) -> int:
        return self.lo.shape[0]

    def contains(self, X):
        pts, _ = as_points(X, self.dimension)
        return np.all((pts >= self.lo) & (pts <= self.hi), axis=1)

    def bounds(self):
        return self.lo.copy(), self.hi.copy()


@dataclass(frozen=True)
class Complement(Region):
    region: Region

    @property
    def dimension(self) -> int:
        return self.region.dimension

    def contains(self, X):
        return ~self.region.contains(X)


@dataclass(frozen=True)
class Union(Region):
    regions: tuple

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        if not self.regions:
            raise ParameterError("union needs at least one region")
        dims = {r.dimension for r in self.regions}
        if len(dims) != 1:
            raise ParameterError(f"union mixes dimensions {sorted(dims)}")

    @property
    def dimension(self) -> int:
        return self.regions[0].dimension

    def contains(self, X):
        mask = self.regions[0].contains(X)
        for r in self.regions[1:]:
            mask = mask | r.contains(X)
        return mask

    def bounds(self):
        boxes = [r.bounds() for r in self.regions]
        if any(b is None for b in boxes):
            return None
        lo = np.min([b[0] for b in boxes], axis=0)
        hi = np.max([b[1] for b in boxes], axis=0)
        return lo, hi


class CloudNeighborhood(Region):
    """All points within `radius` of a finite point cloud.

    Together with a covering-radius pad this gives certified outer bounds on
    the distance to a surface known only through sample points: a point
    outside CloudNeighborhood(cloud, d + covering) has distance > d to the
    sampled surface.
    """

    def __init__(self, cloud, radius: float):
        pts = np.asarray(cloud, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ParameterError("cloud neighborhood needs an (m, n) point array")
        if radius <= 0:
            raise ParameterError(f"cloud neighborhood radius must be positive, got {radius}")
        self.cloud = pts
        self.radius = float(radius)

    @property
    def dimension(self) -> int:
        return self.cloud.shape[1]

    def contains(self, X):
        pts, _ = as_points(X, self.dimension)
        d2 = np.min(
            np.sum((pts[:, None, :] - self.cloud[None, :, :]) ** 2, axis=2), axis=1
        )
        return d2 <= self.radius * self.radius

    def bounds(self):
        return self.cloud.min(axis=0) - self.radius, self.cloud.max(axis=0) + self.radius


@dataclass(frozen=True)
class All(Region):
    dim: int

    @property
    def dimension(self) -> int:
        return self.dim

    def contains(self, X):
        pts, _ = as_points(X, self.dimension)
        return np.ones(pts.shape[0], dtype=bool)


class ImageOf(Region):
    """Image of a region under a map; membership via certified preimage.

    A query point is inside iff the map's inverse converges on it and the
    preimage lies in the source region.  Non-convergence counts as outside,
    which is harmless in every construction that uses this region (they are
    all identity near the image boundary).
    """

    def __init__(self, mapping, region: Region, *, bounds_samples: int = 512, pad: float = 0.1):
        self.mapping = mapping
        self.region = region
        self._inverse = mapping.inverse()
        self._pad = float(pad)
        self._bounds = self._estimate_bounds(bounds_samples)

    @property
    def dimension(self) -> int:
        return self.region.dimension

    def _estimate_bounds(self, count: int):
        box = self.region.bounds()
        if box is None:
            return None
        lo, hi = box
        rng = stream(7, count, 11)
        samples = lo + (hi - lo) * rng.random((count, lo.shape[0]))
        samples = samples[self.region.contains(samples)]
        corners = _box_corners(lo, hi)
        probes = [samples, corners[self.region.contains(corners)]]
        # Image extremes of a diffeomorphism sit on the boundary image, so
        # boundary clouds pin the box down where interior samples cannot.
        outer = getattr(self.region, "radius", None) or getattr(self.region, "r_outer", None)
        center = getattr(self.region, "center", None)
        if outer is not None and center is not None:
            probes.append(sphere_points(center, float(outer), max(count, 256)))
        probe = np.vstack([p for p in probes if p.size])
        if probe.shape[0] == 0:
            return None
        image = self.mapping(probe)
        ilo, ihi = image.min(axis=0), image.max(axis=0)
        pad = self._pad * np.maximum(ihi - ilo, 1e-12)
        return ilo - pad, ihi + pad

    def contains(self, X):
        pts, _ = as_points(X, self.dimension)
        mask = np.ones(pts.shape[0], dtype=bool)
        if self._bounds is not None:
            lo, hi = self._bounds
            mask = np.all((pts >= lo) & (pts <= hi), axis=1)
        out = np.zeros(pts.shape[0], dtype=bool)
        if np.any(mask):
            pre, ok = invert_with_flags(self.mapping, self._inverse, pts[mask])
            inside = ok & self.region.contains(pre)
            out[mask] = inside
        return out

    def bounds(self):
        return None if self._bounds is None else (self._bounds[0].copy(), self._bounds[1].copy())


def invert_with_flags(mapping, inverse, Y):
    """Evaluate an inverse with per-point convergence flags.

    Newton-backed inverses report their own flags; structural inverses are
    validated by the forward residual.
    """
    solve = getattr(inverse, "solve_with_flags", None)
    if solve is not None:
        return solve(Y)
    X = inverse(Y)
    residual = np.linalg.norm(mapping(X) - Y, axis=1)
    scale = np.maximum(1.0, np.linalg.norm(Y, axis=1))
    return X, residual <= 1e-8 * scale


def _box_corners(lo, hi):
    n = lo.shape[0]
    if n > 12:
        return np.vstack([lo, hi])
    bits = np.array(np.meshgrid(*[[0, 1]] * n, indexing="ij")).reshape(n, -1).T
    return lo + bits * (hi - lo)


# ---------------------------------------------------------------------------
# deterministic sampling


def stream(seed: int, *subkeys: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, subkeys...): replayable anywhere.

    The 128-bit Philox key is built by mixing each subkey in with an odd
    multiplicative constant, so distinct (seed, subkeys) tuples get distinct,
    decorrelated streams regardless of how many subkeys are given.
    """
    lo = int(seed) & 0xFFFFFFFFFFFFFFFF
    hi = 0x9E3779B97F4A7C15
    for k in subkeys:
        lo = (lo * 6364136223846793005 + (int(k) & 0xFFFFFFFFFFFFFFFF) + 1) & 0xFFFFFFFFFFFFFFFF
        hi = (hi ^ lo) * 2685821657736338717 & 0xFFFFFFFFFFFFFFFF
    return np.random.Generator(np.random.Philox(key=np.array([lo, hi], dtype=np.uint64)))


def sample_region(region: Region, count: int, rng: np.random.Generator, window: Region | None = None):
    """Rejection-sample `count` points of `region` from its bounding box.

    Unbounded regions need `window` (a bounded region) to intersect with.
    Raises SamplingError when the acceptance rate starves below 1e-4.
    """
    box = region.bounds()
    clip = None
    if box is None:
        if window is None or window.bounds() is None:
            raise ParameterError("sampling an unbounded region requires a bounded window")
        box = window.bounds()
        clip = window
    lo, hi = box
    n = lo.shape[0]
    out = np.empty((count, n))
    got = 0
    drawn = 0
    batch = max(4 * count, 256)
    while got < count:
        cand = lo + (hi - lo) * rng.random((batch, n))
        drawn += batch
        mask = region.contains(cand)
        if clip is not None:
            mask &= clip.contains(cand)
        take = cand[mask]
        k = min(take.shape[0], count - got)
        out[got : got + k] = take[:k]
        got += k
        if drawn >= 4 * count / MIN_ACCEPTANCE:
            raise SamplingError(
                f"rejection sampling starved: {got}/{count} accepted after {drawn} draws"
            )
    return out


def grid_in_region(region: Region, target: int, window: Region | None = None):
    """Points of a regular lattice that fall inside the region (~`target` many)."""
    box = region.bounds()
    if box is None:
        if window is None or window.bounds() is None:
            raise ParameterError("gridding an unbounded region requires a bounded window")
        box = window.bounds()
    lo, hi = box
    n = lo.shape[0]
    per_axis = max(2, int(round(target ** (1.0 / n))))
    axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return pts[region.contains(pts)]


def sphere_points(center, radius: float, count: int, *, key: int = 0) -> np.ndarray:
    """Deterministic, reasonably even cloud on a sphere.

    n = 2 uses equal angles, n = 3 a Fibonacci lattice, higher dimensions a
    fixed Philox stream of normalized Gaussians.
    """
    center = np.asarray(center, dtype=float)
    n = center.shape[0]
    if n == 1:
        dirs = np.array([[1.0], [-1.0]])[: max(count, 2)]
    elif n == 2:
        ang = 2.0 * np.pi * np.arange(count) / count
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    elif n == 3:
        i = np.arange(count) + 0.5
        phi = np.arccos(1.0 - 2.0 * i / count)
        golden = np.pi * (1.0 + np.sqrt(5.0))
        theta = golden * i
        dirs = np.stack(
            [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)], axis=1
        )
    else:
        rng = stream(0x5F3759DF, n, count, key)
        g = rng.normal(size=(count, n))
        dirs = g / np.linalg.norm(g, axis=1, keepdims=True)
    return center + radius * dirs


def cloud_spacing(cloud: np.ndarray) -> float:
    """Max nearest-neighbour distance: how coarse a surface cloud is."""
    m = cloud.shape[0]
    if m < 2:
        return float("inf")
    if m > 4096:
        cloud = cloud[:: m // 4096 + 1]
        m = cloud.shape[0]
    d2 = np.sum((cloud[:, None, :] - cloud[None, :, :]) ** 2, axis=2)
    np.fill_diagonal(d2, np.inf)
    return float(np.sqrt(d2.min(axis=1).max()))
