"""Smooth maps of R^n as composable, invertible, differentiable objects.

Every map evaluates batched: ``map(X)`` with X of shape (m, n) returns
(m, n); a single (n,) point comes back as (n,).  ``jacobian`` returns
(m, n, n) analytic derivatives of the *implemented* evaluation, so finite
differences of the evaluation must reproduce them.

Maps may declare a ``support`` region: outside it they are the identity,
bitwise, and evaluation short-circuits.  That exactness is what the
identity-outside guarantees of the extension pipelines rest on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CompositionError,
    GluingError,
    NotADiffeomorphismError,
    NumericError,
    ParameterError,
)
from .profiles import DampingWindow, TransitionProfile, invert_radial_profile
from .regions import (
    All,
    Annulus,
    Ball,
    Box,
    Region,
    Union,
    as_points,
    grid_in_region,
    invert_with_flags,
    sample_region,
    sphere_points,
    stream,
)

ORIENTATION_PRESERVING = "preserving"
ORIENTATION_REVERSING = "reversing"
ORIENTATION_UNKNOWN = "unknown"

#: Default relative residual for Newton-backed inversion.
NEWTON_RTOL = 1e-12

#: Residual at which a piecewise-inverse candidate counts as a true preimage.
#: Must sit above the seam tolerance (pieces may disagree by that much on
#: overlaps) and well below every roundtrip contract.
INVERSE_ACCEPT_RTOL = 1e-9


def _combine_orientation(*tags: str) -> str:
    if any(t == ORIENTATION_UNKNOWN for t in tags):
        return ORIENTATION_UNKNOWN
    flips = sum(1 for t in tags if t == ORIENTATION_REVERSING)
    return ORIENTATION_REVERSING if flips % 2 else ORIENTATION_PRESERVING


class SmoothMap:
    """Base class: a C^k map of R^n with analytic Jacobian.

    Subclasses implement ``_evaluate`` and ``_jacobian`` on (m, n) arrays;
    the base class handles shape coercion and the support short-circuit.
    """

    def __init__(
        self,
        dimension: int,
        *,
        domain: Region | None = None,
        regularity: float = math.inf,
        orientation: str = ORIENTATION_PRESERVING,
        support: Region | None = None,
    ):
        self.dimension = int(dimension)
        self.domain = domain if domain is not None else All(self.dimension)
        self.regularity = regularity
        self.orientation = orientation
        self.support = support

    # -- evaluation ---------------------------------------------------------

    def _evaluate(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _jacobian(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, X):
        pts, single = as_points(X, self.dimension)
        if self.support is not None:
            inside = self.support.contains(pts)
            out = pts.copy()
            if inside.any():
                out[inside] = self._evaluate(pts[inside])
        else:
            out = self._evaluate(pts)
        return out[0] if single else out

    def jacobian(self, X):
        pts, single = as_points(X, self.dimension)
        if self.support is not None:
            inside = self.support.contains(pts)
            out = np.broadcast_to(np.eye(self.dimension), (pts.shape[0],) + (self.dimension,) * 2).copy()
            if inside.any():
                out[inside] = self._jacobian(pts[inside])
        else:
            out = self._jacobian(pts)
        return out[0] if single else out

    # -- structure ----------------------------------------------------------

    def inverse(self) -> "SmoothMap":
        """Structural inverse; Newton-backed by default."""
        return NewtonInverseMap(self)

    def refined(self, factor: int) -> "SmoothMap | None":
        """Copy with `factor`-times finer integration, or None if nothing to refine."""
        return None

    def to_tree(self) -> dict:
        raise NotImplementedError(f"{type(self).__name__} does not serialize")

    def __repr__(self):
        return f"<{type(self).__name__} n={self.dimension}>"


def _eye_like(pts: np.ndarray) -> np.ndarray:
    n = pts.shape[1]
    return np.broadcast_to(np.eye(n), (pts.shape[0], n, n)).copy()


def _vec(x) -> list:
    return np.asarray(x, dtype=float).tolist()


# ---------------------------------------------------------------------------
# elementary families


class IdentityMap(SmoothMap):
    def __init__(self, dimension: int):
        super().__init__(dimension)

    def _evaluate(self, X):
        return X.copy()

    def _jacobian(self, X):
        return _eye_like(X)

    def inverse(self):
        return self

    def to_tree(self):
        return {"type": "identity", "params": {"dimension": self.dimension}}


class AffineMap(SmoothMap):
    """x -> A x + b with a precomputed exact-solve inverse."""

    def __init__(self, matrix, offset=None, *, domain: Region | None = None):
        A = np.asarray(matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ParameterError(f"affine matrix must be square, got {A.shape}")
        n = A.shape[0]
        b = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
        if b.shape != (n,):
            raise ParameterError(f"affine offset shape {b.shape} does not match matrix {A.shape}")
        det = float(np.linalg.det(A))
        if det == 0.0 or not np.isfinite(det):
            raise NotADiffeomorphismError(f"affine matrix is singular (det = {det})")
        orientation = ORIENTATION_PRESERVING if det > 0 else ORIENTATION_REVERSING
        super().__init__(n, domain=domain, orientation=orientation)
        self.matrix = A
        self.offset = b
        self._inv_matrix = np.linalg.inv(A)

    def _evaluate(self, X):
        return X @ self.matrix.T + self.offset

    def _jacobian(self, X):
        return np.broadcast_to(self.matrix, (X.shape[0],) + self.matrix.shape).copy()

    def inverse(self):
        return AffineMap(self._inv_matrix, -self._inv_matrix @ self.offset)

    def to_tree(self):
        return {
            "type": "affine",
            "params": {"matrix": self.matrix.tolist(), "offset": _vec(self.offset)},
        }


def rotation_matrix(dimension: int, angle: float, plane=(0, 1)) -> np.ndarray:
    i, j = plane
    if not (0 <= i < dimension and 0 <= j < dimension and i != j):
        raise ParameterError(f"rotation plane {plane} invalid in dimension {dimension}")
    R = np.eye(dimension)
    c, s = math.cos(angle), math.sin(angle)
    R[i, i] = c
    R[i, j] = -s
    R[j, i] = s
    R[j, j] = c
    return R


def rotation_map(dimension: int, angle: float, center=None, plane=(0, 1)) -> AffineMap:
    """Rotation by `angle` in a coordinate plane about `center`."""
    R = rotation_matrix(dimension, angle, plane)
    c = np.zeros(dimension) if center is None else np.asarray(center, dtype=float)
    return AffineMap(R, c - R @ c)


def shear_map(dimension: int, amount: float, row: int = 0, col: int = 1, center=None) -> AffineMap:
    if row == col:
        raise ParameterError("shear needs distinct row and column axes")
    A = np.eye(dimension)
    A[row, col] = amount
    c = np.zeros(dimension) if center is None else np.asarray(center, dtype=float)
    return AffineMap(A, c - A @ c)


class TwistMap(SmoothMap):
    """Rotation whose angle decays radially to zero: compactly supported.

    The rotation acts in one coordinate plane, the angle profile depends on
    the full distance to the center, which that rotation preserves -- so the
    inverse is the same twist with the opposite angle, exactly.
    """

    def __init__(self, center, angle: float, inner: float, outer: float, plane=(0, 1)):
        c = np.asarray(center, dtype=float)
        n = c.shape[0]
        i, j = plane
        if not (0 <= i < n and 0 <= j < n and i != j):
            raise ParameterError(f"twist plane {plane} invalid in dimension {n}")
        super().__init__(n, support=Ball(c, outer))
        self.center = c
        self.angle = float(angle)
        self.plane = (int(i), int(j))
        self.window = DampingWindow(inner, outer)

    def _angles(self, r):
        return self.angle * self.window(r)

    def _evaluate(self, X):
        c = self.center
        i, j = self.plane
        U = X - c
        r = np.linalg.norm(U, axis=1)
        th = self._angles(r)
        out = X.copy()
        active = th != 0.0
        if active.any():
            co, si = np.cos(th[active]), np.sin(th[active])
            ui, uj = U[active, i], U[active, j]
            out[active, i] = c[i] + co * ui - si * uj
            out[active, j] = c[j] + si * ui + co * uj
        return out

    def _jacobian(self, X):
        c = self.center
        i, j = self.plane
        U = X - c
        r = np.linalg.norm(U, axis=1)
        th = self._angles(r)
        dth = self.angle * self.window.derivative(r)
        m = X.shape[0]
        J = _eye_like(X)
        co, si = np.cos(th), np.sin(th)
        J[:, i, i] = co
        J[:, i, j] = -si
        J[:, j, i] = si
        J[:, j, j] = co
        # d(theta)/dx = theta'(r) * u / r contributes a rank-one update along
        # the angle derivative of the rotation applied to u.
        safe = r > 0
        if safe.any():
            ui, uj = U[safe, i], U[safe, j]
            dri = (-si[safe] * ui - co[safe] * uj) * dth[safe] / r[safe]
            drj = (co[safe] * ui - si[safe] * uj) * dth[safe] / r[safe]
            idx = np.where(safe)[0]
            J[idx, i, :] += dri[:, None] * U[safe]
            J[idx, j, :] += drj[:, None] * U[safe]
        return J

    def inverse(self):
        return TwistMap(self.center, -self.angle, self.window.inner, self.window.outer, self.plane)

    def to_tree(self):
        return {
            "type": "twist",
            "params": {
                "center": _vec(self.center),
                "angle": self.angle,
                "inner": self.window.inner,
                "outer": self.window.outer,
                "plane": list(self.plane),
            },
        }


class PolyPerturbMap(SmoothMap):
    """x -> x + coeff * (x_src - c_src)^2 e_dst, a quadratic bump on one axis.

    With src != dst the update is triangular (det J = 1 identically); the
    same-axis variant can fail to be injective, so it is certified on a grid
    at construction.  The inverse is Newton-backed either way.
    """

    def __init__(self, center, coeff: float, src_axis: int = 0, dst_axis: int = 1, check_radius: float | None = None):
        c = np.asarray(center, dtype=float)
        n = c.shape[0]
        if not (0 <= src_axis < n and 0 <= dst_axis < n):
            raise ParameterError(f"axes ({src_axis}, {dst_axis}) invalid in dimension {n}")
        super().__init__(n)
        self.center = c
        self.coeff = float(coeff)
        self.src = int(src_axis)
        self.dst = int(dst_axis)
        self.check_radius = check_radius
        if self.src == self.dst and check_radius is not None:
            # det J = 1 + 2 coeff (x_src - c_src); certify positivity on the ball.
            lo = 1.0 + 2.0 * self.coeff * (-check_radius)
            hi = 1.0 + 2.0 * self.coeff * (+check_radius)
            if min(lo, hi) <= 0.0:
                worst = c.copy()
                worst[self.src] += -check_radius if lo < hi else check_radius
                raise NotADiffeomorphismError(
                    f"quadratic perturbation folds over inside radius {check_radius}"
                    f" (min det J = {min(lo, hi):.3e})",
                    worst_point=worst,
                    worst_value=min(lo, hi),
                )

    def _evaluate(self, X):
        out = X.copy()
        out[:, self.dst] += self.coeff * (X[:, self.src] - self.center[self.src]) ** 2
        return out

    def _jacobian(self, X):
        J = _eye_like(X)
        J[:, self.dst, self.src] += 2.0 * self.coeff * (X[:, self.src] - self.center[self.src])
        return J

    def to_tree(self):
        return {
            "type": "poly_perturb",
            "params": {
                "center": _vec(self.center),
                "coeff": self.coeff,
                "src_axis": self.src,
                "dst_axis": self.dst,
                "check_radius": self.check_radius,
            },
        }


class RadialSqueezeMap(SmoothMap):
    """x -> center + phi(|x - center|) (x - center) for a transition profile phi.

    Monotone radial action g(r) = phi(r) r makes this globally invertible;
    the inverse solves g exactly on the plateaus and by safeguarded Newton in
    the transition band.  With c1 = 1 the map is the identity (bitwise) from
    radius b outward.
    """

    def __init__(self, profile: TransitionProfile, center):
        c = np.asarray(center, dtype=float)
        support = Ball(c, profile.b) if profile.c1 == 1.0 else None
        super().__init__(c.shape[0], support=support)
        self.profile = profile
        self.center = c

    def _evaluate(self, X):
        U = X - self.center
        r = np.linalg.norm(U, axis=1)
        out = X.copy()
        if self.profile.c1 == 1.0:
            act = r < self.profile.b
        else:
            act = np.ones(X.shape[0], dtype=bool)
        if act.any():
            out[act] = self.center + self.profile(r[act])[:, None] * U[act]
        return out

    def _jacobian(self, X):
        U = X - self.center
        r = np.linalg.norm(U, axis=1)
        phi = self.profile(r)
        dphi = self.profile.derivative(r)
        J = phi[:, None, None] * _eye_like(X)
        safe = (r > 0) & (dphi != 0.0)
        if safe.any():
            w = (dphi[safe] / r[safe])[:, None, None]
            J[safe] += w * (U[safe][:, :, None] * U[safe][:, None, :])
        return J

    def inverse(self):
        return _RadialSqueezeInverse(self)

    def to_tree(self):
        p = self.profile
        return {
            "type": "radial_squeeze",
            "params": {
                "center": _vec(self.center),
                "a": p.a,
                "b": p.b,
                "c0": p.c0,
                "c1": p.c1,
            },
        }


class _RadialSqueezeInverse(SmoothMap):
    def __init__(self, forward: RadialSqueezeMap):
        super().__init__(forward.dimension, support=forward.support)
        self.forward = forward

    def _evaluate(self, Y):
        p = self.forward.profile
        V = Y - self.forward.center
        s = np.linalg.norm(V, axis=1)
        out = Y.copy()
        act = s < p.c1 * p.b if p.c1 == 1.0 else np.ones(Y.shape[0], dtype=bool)
        if act.any():
            r = invert_radial_profile(p, s[act])
            ratio = np.ones_like(r)
            pos = s[act] > 0
            ratio[pos] = r[pos] / s[act][pos]
            ratio[~pos] = 1.0 / p.c0
            out[act] = self.forward.center + ratio[:, None] * V[act]
        return out

    def _jacobian(self, Y):
        p = self.forward.profile
        V = Y - self.forward.center
        s = np.linalg.norm(V, axis=1)
        r = invert_radial_profile(p, s)
        gprime = p.radial_derivative(r)
        J = _eye_like(Y)
        pos = s > 0
        ratio = np.where(pos, r / np.where(pos, s, 1.0), 1.0 / p.c0)
        J *= ratio[:, None, None]
        if pos.any():
            Vh = V[pos] / s[pos, None]
            corr = (1.0 / gprime[pos] - ratio[pos])[:, None, None]
            J[pos] += corr * (Vh[:, :, None] * Vh[:, None, :])
        return J

    def inverse(self):
        return self.forward

    def to_tree(self):
        return {"type": "radial_squeeze_inverse", "params": {}, "children": [self.forward.to_tree()]}


def radial_squeeze(profile: TransitionProfile, center) -> RadialSqueezeMap:
    """Validated radial squeeze for global use: requires phi == 1 outward (c1 = 1)."""
    if profile.c1 != 1.0:
        raise ParameterError(f"global radial squeeze needs c1 = 1, got c1 = {profile.c1}")
    return RadialSqueezeMap(profile, center)


# ---------------------------------------------------------------------------
# composition


class CompositeMap(SmoothMap):
    """Right-to-left composition: CompositeMap([f, g])(x) = f(g(x))."""

    def __init__(self, maps, *, domain: Region | None = None, support: Region | None = None):
        maps = list(maps)
        if not maps:
            raise ParameterError("composition needs at least one map")
        dims = {m.dimension for m in maps}
        if len(dims) != 1:
            raise ParameterError(f"composition mixes dimensions {sorted(dims)}")
        if support is None:
            sups = [m.support for m in maps]
            if all(s is not None for s in sups):
                support = sups[0] if len(sups) == 1 else Union(tuple(sups))
        super().__init__(
            maps[0].dimension,
            domain=domain if domain is not None else maps[-1].domain,
            regularity=min(m.regularity for m in maps),
            orientation=_combine_orientation(*[m.orientation for m in maps]),
            support=support,
        )
        self.maps = maps

    def _evaluate(self, X):
        out = X
        for m in reversed(self.maps):
            out = m(out)
        return out

    def _jacobian(self, X):
        J = _eye_like(X)
        cur = X
        for m in reversed(self.maps):
            J = m.jacobian(cur) @ J
            cur = m(cur)
        return J

    def solve_with_flags(self, Y):
        """Evaluate without raising: per-point success flags instead.

        Iterative stages report their own flags; plain stages cannot fail.
        Rows that lost convergence keep flowing (their values are garbage)
        and stay flagged, which is what membership queries need.
        """
        pts, _ = as_points(Y, self.dimension)
        ok = np.ones(pts.shape[0], dtype=bool)
        if self.support is not None:
            active = self.support.contains(pts)
            if not active.any():
                return pts.copy(), ok
        else:
            active = np.ones(pts.shape[0], dtype=bool)
        out = pts.copy()
        cur = pts[active]
        good = np.ones(cur.shape[0], dtype=bool)
        with np.errstate(all="ignore"):
            for m in reversed(self.maps):
                solver = getattr(m, "solve_with_flags", None)
                if solver is not None:
                    cur, flag = solver(cur)
                    good &= flag
                else:
                    cur = m(cur)
        good &= np.isfinite(cur).all(axis=1)
        out[active] = np.where(good[:, None], cur, pts[active])
        idx = np.where(active)[0]
        ok[idx[~good]] = False
        return out, ok

    def inverse(self):
        return CompositeMap(
            [m.inverse() for m in reversed(self.maps)], support=self.support
        )

    def refined(self, factor: int):
        kids = [m.refined(factor) for m in self.maps]
        if all(k is None for k in kids):
            return None
        return CompositeMap(
            [k if k is not None else m for k, m in zip(kids, self.maps)],
            domain=self.domain,
            support=self.support,
        )

    def to_tree(self):
        return {"type": "composite", "params": {}, "children": [m.to_tree() for m in self.maps]}


def compose(maps, *, check_samples: int = 32, seed: int = 0) -> SmoothMap:
    """Compose maps (first list entry applied last), checking domain fit on samples.

    The sampled check pushes points of each stage's bounded domain through and
    verifies they land in the next stage's domain; violations raise
    CompositionError.
    """
    maps = list(maps)
    if len(maps) == 1:
        return maps[0]
    comp = CompositeMap(maps)
    rng = stream(seed, 0xC0, len(maps))
    chain = list(reversed(maps))  # application order
    for k in range(len(chain) - 1):
        src, dst = chain[k], chain[k + 1]
        if src.domain.bounds() is None or isinstance(dst.domain, All):
            continue
        pts = sample_region(src.domain, check_samples, rng)
        img = src(pts)
        ok = dst.domain.contains(img)
        if not ok.all():
            bad = img[~ok][0]
            raise CompositionError(
                f"stage {k} image escapes stage {k + 1} domain near {np.round(bad, 6).tolist()}"
            )
    return comp


class TranslatedMap(SmoothMap):
    """Conjugation by a translation: x -> shift + inner(x - shift)."""

    def __init__(self, inner: SmoothMap, shift, *, support: Region | None = None, domain: Region | None = None):
        s = np.asarray(shift, dtype=float)
        super().__init__(
            inner.dimension,
            domain=domain,
            regularity=inner.regularity,
            orientation=inner.orientation,
            support=support,
        )
        self.inner = inner
        self.shift = s

    def _evaluate(self, X):
        return self.inner(X - self.shift) + self.shift

    def _jacobian(self, X):
        return self.inner.jacobian(X - self.shift)

    def inverse(self):
        return TranslatedMap(self.inner.inverse(), self.shift, support=self.support, domain=self.domain)

    def refined(self, factor: int):
        kid = self.inner.refined(factor)
        if kid is None:
            return None
        return TranslatedMap(kid, self.shift, support=self.support, domain=self.domain)

    def to_tree(self):
        return {
            "type": "translated",
            "params": {"shift": _vec(self.shift)},
            "children": [self.inner.to_tree()],
        }


# ---------------------------------------------------------------------------
# Newton inversion


def _multigrid_seeds(box, levels: int = 2) -> np.ndarray:
    """Cell centers of nested dyadic grids over a box, coarse level first."""
    lo, hi = box
    n = lo.shape[0]
    seeds = []
    for lev in range(levels + 1):
        k = 2**lev
        if k**n > 128:
            break
        centers_1d = [lo[i] + (hi[i] - lo[i]) * (np.arange(k) + 0.5) / k for i in range(n)]
        mesh = np.meshgrid(*centers_1d, indexing="ij")
        seeds.append(np.stack([m.ravel() for m in mesh], axis=1))
    return np.vstack(seeds)


def _newton_batch(forward: SmoothMap, Y: np.ndarray, X0: np.ndarray, rtol: float, max_iter: int):
    X = X0.copy()
    scale = np.maximum(1.0, np.linalg.norm(Y, axis=1))
    tols = rtol * scale
    R = forward(X) - Y
    rn = np.linalg.norm(R, axis=1)
    rn = np.where(np.isfinite(rn), rn, np.inf)
    for _ in range(max_iter):
        active = rn > tols
        if not active.any():
            break
        idx = np.where(active)[0]
        J = forward.jacobian(X[idx])
        try:
            step = np.linalg.solve(J, R[idx][..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.einsum("mij,mj->mi", np.linalg.pinv(J), R[idx])
        step = np.where(np.isfinite(step), step, 0.0)
        lam = np.ones(idx.shape[0])
        Xc = X[idx] - step
        Rc = forward(Xc) - Y[idx]
        rc = np.linalg.norm(Rc, axis=1)
        rc = np.where(np.isfinite(rc), rc, np.inf)
        for _ in range(8):
            worse = rc >= rn[idx]
            if not worse.any():
                break
            lam[worse] *= 0.5
            Xc[worse] = X[idx][worse] - lam[worse, None] * step[worse]
            Rc[worse] = forward(Xc[worse]) - Y[idx][worse]
            rcw = np.linalg.norm(Rc[worse], axis=1)
            rc[worse] = np.where(np.isfinite(rcw), rcw, np.inf)
        moved = rc < rn[idx]
        upd = idx[moved]
        X[upd] = Xc[moved]
        R[upd] = Rc[moved]
        rn[upd] = rc[moved]
        if not moved.any():
            break  # stalled everywhere; give the next seed a chance
    return X, rn <= tols


class NewtonInverseMap(SmoothMap):
    """Damped-Newton inverse of a forward map, with convergence flags.

    Seeds: the query point itself first (ideal for the near-identity maps the
    pipelines build), then multigrid cell centers of the forward domain's
    bounding box.
    """

    def __init__(self, forward: SmoothMap, *, rtol: float = NEWTON_RTOL, max_iter: int = 50):
        super().__init__(forward.dimension, orientation=forward.orientation, support=forward.support)
        self.forward = forward
        self.rtol = float(rtol)
        self.max_iter = int(max_iter)
        box = forward.domain.bounds()
        self._grid_seeds = _multigrid_seeds(box) if box is not None else np.empty((0, forward.dimension))

    def solve_with_flags(self, Y):
        pts, _ = as_points(Y, self.dimension)
        X, ok = _newton_batch(self.forward, pts, pts, self.rtol, self.max_iter)
        for seed in self._grid_seeds:
            if ok.all():
                break
            idx = np.where(~ok)[0]
            X0 = np.broadcast_to(seed, (idx.shape[0], self.dimension)).copy()
            Xs, oks = _newton_batch(self.forward, pts[idx], X0, self.rtol, self.max_iter)
            X[idx[oks]] = Xs[oks]
            ok[idx[oks]] = True
        return X, ok

    def _evaluate(self, Y):
        X, ok = self.solve_with_flags(Y)
        if not ok.all():
            bad = Y[~ok][0]
            raise NumericError(
                f"Newton inversion failed for {int((~ok).sum())} point(s), "
                f"first at {np.round(bad, 6).tolist()}"
            )
        return X

    def _jacobian(self, Y):
        X = self._evaluate(Y)
        return np.linalg.inv(self.forward.jacobian(X))

    def inverse(self):
        return self.forward

    def to_tree(self):
        return {
            "type": "newton_inverse",
            "params": {"rtol": self.rtol, "max_iter": self.max_iter},
            "children": [self.forward.to_tree()],
        }


def newton_invert(mapping: SmoothMap, y, *, seeds=None, rtol: float = NEWTON_RTOL, max_iter: int = 50):
    """Solve mapping(x) = y; returns (x, converged_flag).

    `seeds` optionally overrides the starting points tried in order; by
    default the query itself, then multigrid cell centers of the domain box.
    """
    pts, single = as_points(y, mapping.dimension)
    if seeds is None:
        inv = NewtonInverseMap(mapping, rtol=rtol, max_iter=max_iter)
        X, ok = inv.solve_with_flags(pts)
    else:
        X = pts.copy()
        ok = np.zeros(pts.shape[0], dtype=bool)
        for seed in seeds:
            if ok.all():
                break
            idx = np.where(~ok)[0]
            X0 = np.broadcast_to(np.asarray(seed, dtype=float), (idx.shape[0], mapping.dimension)).copy()
            Xs, oks = _newton_batch(mapping, pts[idx], X0, rtol, max_iter)
            X[idx[oks]] = Xs[oks]
            ok[idx[oks]] = True
    if single:
        return X[0], bool(ok[0])
    return X, ok


# ---------------------------------------------------------------------------
# piecewise gluing


@dataclass
class SeamEvidence:
    """Record of one sampled overlap between two pieces."""

    first: int
    second: int
    samples: int
    worst_value: float
    worst_point: np.ndarray | None


class PiecewiseMap(SmoothMap):
    """First-match routing over (region, map) pieces.

    A point is evaluated by the first piece whose region contains it; the
    construction-time seam audit guarantees pieces agree on sampled overlaps,
    so routing order only matters at the tolerance level.
    """

    def __init__(
        self,
        pieces,
        *,
        domain: Region | None = None,
        seams=None,
        support: Region | None = None,
        overlap_zones=None,
    ):
        pieces = [(r, m) for r, m in pieces]
        if not pieces:
            raise ParameterError("piecewise map needs at least one piece")
        dims = {m.dimension for _, m in pieces} | {r.dimension for r, _ in pieces}
        if len(dims) != 1:
            raise ParameterError(f"piecewise pieces mix dimensions {sorted(dims)}")
        super().__init__(
            pieces[0][1].dimension,
            domain=domain if domain is not None else Union(tuple(r for r, _ in pieces)),
            regularity=min(m.regularity for _, m in pieces),
            orientation=_combine_orientation(*[m.orientation for _, m in pieces]),
            support=support,
        )
        self.pieces = pieces
        self.seams = list(seams) if seams else []
        self.overlap_zones = list(overlap_zones) if overlap_zones is not None else None

    def route(self, X) -> np.ndarray:
        pts, _ = as_points(X, self.dimension)
        idx = np.full(pts.shape[0], -1, dtype=int)
        undecided = np.ones(pts.shape[0], dtype=bool)
        for k, (region, _) in enumerate(self.pieces):
            if not undecided.any():
                break
            sel = np.where(undecided)[0]
            hit = region.contains(pts[sel])
            idx[sel[hit]] = k
            undecided[sel[hit]] = False
        return idx

    def _apply(self, X, fn, tail: tuple):
        idx = self.route(X)
        if (idx < 0).any():
            bad = X[idx < 0][0]
            raise GluingError(
                f"point outside every piece at {np.round(bad, 6).tolist()}", worst_point=bad
            )
        out = np.empty((X.shape[0],) + tail)
        for k, (_, mp) in enumerate(self.pieces):
            mask = idx == k
            if mask.any():
                out[mask] = fn(mp, X[mask])
        return out

    def _evaluate(self, X):
        return self._apply(X, lambda m, pts: m(pts), (self.dimension,))

    def _jacobian(self, X):
        return self._apply(X, lambda m, pts: m.jacobian(pts), (self.dimension, self.dimension))

    def inverse(self):
        return _PiecewiseInverse(self)

    def refined(self, factor: int):
        kids = [m.refined(factor) for _, m in self.pieces]
        if all(k is None for k in kids):
            return None
        pieces = [(r, k if k is not None else m) for (r, m), k in zip(self.pieces, kids)]
        return PiecewiseMap(
            pieces,
            domain=self.domain,
            seams=self.seams,
            support=self.support,
            overlap_zones=self.overlap_zones,
        )

    def audit_seams(self, *, samples: int = 256, seed: int = 0):
        """Re-sample overlap agreement; returns (worst_value, worst_point, evidence)."""
        return _sample_seams(self.pieces, self.overlap_zones, samples, seed)

    def to_tree(self):
        return {
            "type": "piecewise",
            "params": {"regions": [region_to_tree(r) for r, _ in self.pieces]},
            "children": [m.to_tree() for _, m in self.pieces],
        }


class _PiecewiseInverse(SmoothMap):
    def __init__(self, forward: PiecewiseMap):
        super().__init__(
            forward.dimension, orientation=forward.orientation, support=forward.support
        )
        self.forward = forward
        self._inverses = [m.inverse() for _, m in forward.pieces]

    def solve_with_flags(self, Y):
        pts, _ = as_points(Y, self.dimension)
        out = pts.copy()
        done = np.zeros(pts.shape[0], dtype=bool)
        for (region, mp), inv in zip(self.forward.pieces, self._inverses):
            if done.all():
                break
            sel = np.where(~done)[0]
            cand, ok = invert_with_flags(mp, inv, pts[sel])
            # a candidate is a true preimage iff the *routed* forward map
            # reproduces the query; seams make per-piece routing unreliable,
            # the full residual does not
            with np.errstate(all="ignore"):
                cand = np.where(np.isfinite(cand).all(axis=1)[:, None], cand, pts[sel])
                residual = np.linalg.norm(self.forward(cand) - pts[sel], axis=1)
            scale = np.maximum(1.0, np.linalg.norm(pts[sel], axis=1))
            accept = ok & (residual <= INVERSE_ACCEPT_RTOL * scale)
            out[sel[accept]] = cand[accept]
            done[sel[accept]] = True
        return out, done

    def _evaluate(self, Y):
        out, done = self.solve_with_flags(Y)
        if not done.all():
            bad = Y[~done][0]
            raise NumericError(
                f"piecewise inverse unresolved for {int((~done).sum())} point(s), "
                f"first at {np.round(bad, 6).tolist()}"
            )
        return out

    def _jacobian(self, Y):
        X = self._evaluate(Y)
        return np.linalg.inv(self.forward.jacobian(X))

    def inverse(self):
        return self.forward

    def refined(self, factor: int):
        kid = self.forward.refined(factor)
        return None if kid is None else kid.inverse()

    def to_tree(self):
        return {"type": "piecewise_inverse", "params": {}, "children": [self.forward.to_tree()]}


def _overlap_box(ra: Region, rb: Region):
    ba, bb = ra.bounds(), rb.bounds()
    if ba is None and bb is None:
        return None
    if ba is None:
        return bb
    if bb is None:
        return ba
    lo = np.maximum(ba[0], bb[0])
    hi = np.minimum(bb[1], ba[1])
    if np.any(lo >= hi):
        return None
    return lo, hi


def _sample_zone(ra, rb, zone, samples, rng):
    """Sample points of ra & rb, drawing either from `zone` or the box overlap."""
    if zone is not None:
        box = zone.bounds()
        extra = zone.contains
    else:
        box = _overlap_box(ra, rb)
        extra = None
    if box is None:
        return None
    lo, hi = box
    got: list = []
    drawn = 0
    budget = 400 * samples
    while len(got) < samples and drawn < budget:
        cand = lo + (hi - lo) * rng.random((4 * samples, lo.shape[0]))
        drawn += cand.shape[0]
        mask = ra.contains(cand) & rb.contains(cand)
        if extra is not None:
            mask &= extra(cand)
        got.extend(cand[mask][: samples - len(got)])
    if not got:
        return None
    return np.asarray(got)


def _sample_seams(pieces, overlaps, samples: int, seed: int):
    """Sampled piece-agreement on overlap zones.

    `overlaps` is an optional list of (i, j, zone) triples naming where
    adjacent pieces must agree; by default every pairwise region
    intersection is tested.  Construction sites with a catch-all piece
    must pass explicit zones: their raw intersections contain points where
    the pieces legitimately differ because first-match routing never
    reaches the later piece there.
    """
    if overlaps is None:
        overlaps = [(a, b, None) for a in range(len(pieces)) for b in range(a + 1, len(pieces))]
    worst = 0.0
    worst_point = None
    evidence = []
    for a, b, zone in overlaps:
        ra, ma = pieces[a]
        rb, mb = pieces[b]
        rng = stream(seed, 0x5EA8, a, b)
        pts = _sample_zone(ra, rb, zone, samples, rng)
        if pts is None:
            if zone is not None:
                raise GluingError(
                    f"declared overlap zone for pieces {a} and {b} contains no points of both regions"
                )
            continue  # regions do not visibly overlap
        gap = np.linalg.norm(ma(pts) - mb(pts), axis=1)
        k = int(np.argmax(gap))
        evidence.append(
            SeamEvidence(first=a, second=b, samples=pts.shape[0], worst_value=float(gap[k]), worst_point=pts[k])
        )
        if gap[k] > worst:
            worst = float(gap[k])
            worst_point = pts[k]
    return worst, worst_point, evidence


def glue_piecewise(
    pieces,
    *,
    overlaps=None,
    overlap_samples: int = 256,
    tol: float = 1e-10,
    domain: Region | None = None,
    seed: int = 0,
    support: Region | None = None,
) -> PiecewiseMap:
    """Glue (region, map) pieces into one map with first-match routing.

    Construction fails with GluingError if sampled points of the intended
    domain escape every piece (coverage) or if two pieces disagree beyond
    `tol` on a sampled overlap (worst point reported).  `overlaps` names the
    agreement zones as (first_index, second_index, region) triples; without
    it every pairwise intersection is tested, which is only appropriate when
    pieces agree on their full intersections.
    """
    pieces = [(r, m) for r, m in pieces]
    glued = PiecewiseMap(pieces, domain=domain, support=support, overlap_zones=overlaps)

    cover_region = domain
    if cover_region is None or cover_region.bounds() is None:
        boxes = [r.bounds() for r, _ in pieces]
        boxes = [b for b in boxes if b is not None]
        if boxes:
            lo = np.min([b[0] for b in boxes], axis=0)
            hi = np.max([b[1] for b in boxes], axis=0)
            cover_region = Box(lo, hi)
    if cover_region is not None and cover_region.bounds() is not None:
        rng = stream(seed, 0xC07E)
        pts = sample_region(cover_region, overlap_samples, rng)
        idx = glued.route(pts)
        if (idx < 0).any():
            bad = pts[idx < 0][0]
            raise GluingError(
                f"pieces leave a coverage gap near {np.round(bad, 6).tolist()}",
                worst_point=bad,
            )

    worst, worst_point, evidence = _sample_seams(pieces, overlaps, overlap_samples, seed)
    if worst > tol:
        raise GluingError(
            f"piece disagreement {worst:.3e} exceeds tol {tol:.1e}",
            worst_point=worst_point,
            worst_value=worst,
        )
    glued.seams = evidence
    return glued


# ---------------------------------------------------------------------------
# extension by the identity


class ExtendByIdentityMap(SmoothMap):
    """Inner map where membership certifies it, identity everywhere else.

    Membership non-convergence routes to the identity branch; the
    construction sites guarantee the inner map is the identity on a shell
    inside the membership boundary, so misrouting there is harmless.
    """

    def __init__(self, inner: SmoothMap, inner_region: Region, *, support: Region | None = None):
        super().__init__(inner.dimension, orientation=inner.orientation, support=support)
        self.inner = inner
        self.inner_region = inner_region

    def _evaluate(self, X):
        inside = self.inner_region.contains(X)
        out = X.copy()
        if inside.any():
            out[inside] = self.inner(X[inside])
        return out

    def _jacobian(self, X):
        inside = self.inner_region.contains(X)
        J = _eye_like(X)
        if inside.any():
            J[inside] = self.inner.jacobian(X[inside])
        return J

    def inverse(self):
        # The inner map carries inner_region onto itself, so the same
        # membership test routes the inverse.
        return ExtendByIdentityMap(self.inner.inverse(), self.inner_region, support=self.support)

    def refined(self, factor: int):
        kid = self.inner.refined(factor)
        if kid is None:
            return None
        return ExtendByIdentityMap(kid, self.inner_region, support=self.support)

    def to_tree(self):
        return {
            "type": "extend_by_identity",
            "params": {"region": region_to_tree(self.inner_region)},
            "children": [self.inner.to_tree()],
        }


def extend_by_identity(
    inner: SmoothMap,
    inner_region: Region,
    safe_shell: Region,
    *,
    tol: float = 1e-10,
    samples: int = 128,
    seed: int = 0,
    support: Region | None = None,
) -> ExtendByIdentityMap:
    """Extend a map defined on `inner_region` by the identity outside.

    Precondition (sampled): the inner map is the identity on `safe_shell`, a
    collar just inside the membership boundary, so that membership errors
    cannot tear the map.
    """
    from .errors import ContainmentError

    rng = stream(seed, 0xE87E)
    pts = region_samples(safe_shell, samples, rng)
    gap = np.linalg.norm(inner(pts) - pts, axis=1)
    k = int(np.argmax(gap))
    if gap[k] > tol:
        raise ContainmentError(
            f"inner map deviates from identity by {gap[k]:.3e} on the safe shell "
            f"(tol {tol:.1e}) near {np.round(pts[k], 6).tolist()}"
        )
    return ExtendByIdentityMap(inner, inner_region, support=support)


def region_samples(region: Region, count: int, rng, window: Region | None = None):
    """Sample a region; image regions sample their source and push forward."""
    from .regions import ImageOf

    if isinstance(region, ImageOf):
        src = sample_region(region.region, count, rng)
        return region.mapping(src)
    return sample_region(region, count, rng, window=window)


# ---------------------------------------------------------------------------
# parametrized balls


@dataclass
class BallDiffeo:
    """A diffeomorphism of a closed ball, defined with working margin.

    `map` must be evaluable (and a diffeomorphism onto its image) on the
    closed ball of radius radius*(1+margin) about center; the contracts all
    concern the core ball of `radius`.
    """

    map: SmoothMap
    center: np.ndarray
    radius: float
    margin: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        if self.center.ndim != 1:
            raise ParameterError("ball center must be a vector")
        if self.map.dimension != self.center.shape[0]:
            raise ParameterError(
                f"map dimension {self.map.dimension} does not match center {self.center.shape}"
            )
        if not self.radius > 0:
            raise ParameterError(f"ball radius must be positive, got {self.radius}")
        if not self.margin > 0:
            raise ParameterError(f"margin must be positive, got {self.margin}")

    @property
    def dimension(self) -> int:
        return self.center.shape[0]

    def core_ball(self) -> Ball:
        return Ball(self.center, self.radius)

    def domain_ball(self) -> Ball:
        return Ball(self.center, self.radius * (1.0 + self.margin))

    def boundary_cloud(self, count: int, *, radius: float | None = None) -> np.ndarray:
        r = self.radius if radius is None else radius
        return sphere_points(self.center, r, count)

    def center_drift(self) -> float:
        return float(np.linalg.norm(self.map(self.center) - self.center))


# ---------------------------------------------------------------------------
# built-in registry


def _params_err(family: str, msg: str):
    raise ParameterError(f"builtin '{family}': {msg}")


def construct_builtin(family: str, params: dict, dimension: int) -> SmoothMap:
    """Construct a named built-in family; see `builtin_families`.

    Families: identity, affine, rotation, shear, twist, radial, poly_perturb,
    damped_translate.  Orientation is certified at construction; maps that
    could fold (poly_perturb with src == dst) are grid-checked.
    """
    from .flows import damped_translation  # local import to avoid a cycle

    n = int(dimension)
    p = dict(params or {})
    try:
        if family == "identity":
            return IdentityMap(n)
        if family == "affine":
            return AffineMap(p["matrix"], p.get("offset"))
        if family == "rotation":
            return rotation_map(n, p["angle"], p.get("center"), tuple(p.get("plane", (0, 1))))
        if family == "shear":
            return shear_map(n, p["amount"], p.get("row", 0), p.get("col", 1), p.get("center"))
        if family == "twist":
            return TwistMap(
                p.get("center", np.zeros(n)),
                p["angle"],
                p["inner"],
                p["outer"],
                tuple(p.get("plane", (0, 1))),
            )
        if family == "radial":
            prof = TransitionProfile(p["a"], p["b"], p["inner_scale"], p.get("outer_scale", 1.0))
            return RadialSqueezeMap(prof, p.get("center", np.zeros(n)))
        if family == "poly_perturb":
            return PolyPerturbMap(
                p.get("center", np.zeros(n)),
                p["coeff"],
                p.get("src_axis", 0),
                p.get("dst_axis", 1 if n > 1 else 0),
                p.get("check_radius"),
            )
        if family == "damped_translate":
            return damped_translation(
                p["start"],
                p["end"],
                p["payload_radius"],
                p.get("tube_radius"),
                steps=p.get("steps"),
            )
    except KeyError as exc:
        _params_err(family, f"missing parameter {exc}")
    except (TypeError, ValueError) as exc:
        _params_err(family, f"bad parameter value: {exc}")
    raise ParameterError(f"unknown builtin family '{family}'")


def builtin_families() -> tuple[str, ...]:
    return (
        "identity",
        "affine",
        "rotation",
        "shear",
        "twist",
        "radial",
        "poly_perturb",
        "damped_translate",
    )


# ---------------------------------------------------------------------------
# region serialization (kept here so Region stays dependency-light)


def region_to_tree(region: Region) -> dict:
    from . import regions as R

    if isinstance(region, R.Ball):
        return {"kind": "ball", "center": _vec(region.center), "radius": region.radius}
    if isinstance(region, R.Annulus):
        return {
            "kind": "annulus",
            "center": _vec(region.center),
            "r_inner": region.r_inner,
            "r_outer": region.r_outer,
        }
    if isinstance(region, R.Box):
        return {"kind": "box", "lo": _vec(region.lo), "hi": _vec(region.hi)}
    if isinstance(region, R.Complement):
        return {"kind": "complement", "region": region_to_tree(region.region)}
    if isinstance(region, R.Union):
        return {"kind": "union", "regions": [region_to_tree(r) for r in region.regions]}
    if isinstance(region, R.All):
        return {"kind": "all", "dimension": region.dimension}
    if isinstance(region, R.ImageOf):
        return {
            "kind": "image_of",
            "map": region.mapping.to_tree(),
            "region": region_to_tree(region.region),
        }
    raise ParameterError(f"cannot serialize region {type(region).__name__}")


def region_from_tree(tree: dict) -> Region:
    from . import regions as R
    from .serialize import map_from_tree

    kind = tree.get("kind")
    if kind == "ball":
        return R.Ball(np.asarray(tree["center"]), tree["radius"])
    if kind == "annulus":
        return R.Annulus(np.asarray(tree["center"]), tree["r_inner"], tree["r_outer"])
    if kind == "box":
        return R.Box(np.asarray(tree["lo"]), np.asarray(tree["hi"]))
    if kind == "complement":
        return R.Complement(region_from_tree(tree["region"]))
    if kind == "union":
        return R.Union(tuple(region_from_tree(t) for t in tree["regions"]))
    if kind == "all":
        return R.All(tree["dimension"])
    if kind == "image_of":
        return R.ImageOf(map_from_tree(tree["map"]), region_from_tree(tree["region"]))
    raise ParameterError(f"unknown region kind '{kind}'")
