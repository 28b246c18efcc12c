"""Deform a diffeomorphism into its own derivative near a fixed point.

Given H with H(0) = 0 and A = DH(0), `local_linearize` produces a map that
is the identity (bitwise) on a small ball, equals H (bitwise) outside a
slightly larger ball, and interpolates through two devices in between:

* a blend H_b that follows A x near the origin and H further out, and
* a damped linear deformation that applies A^{-1} exactly on an inner ball
  and dies out before the blend's linear zone ends,

so the middle piece H_b(deform(x)) lands on A A^{-1} x = x at the inner
seam and on H at the outer seam, both to machine precision.

The damped linear deformation is built from the factorization
A = expm(K) expm(Y): the symmetric part is split into stages of log-norm
at most ln 2 and integrated (with an exact matrix branch on the zone whose
trajectories never leave the damping plateau); the skew part conserves
radius, which makes its damped flow a closed-form rotation by a
radius-dependent angle -- no integration, no error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, LinearizationError, OrientationError, ParameterError
from .flows import MIN_FLOW_STEPS, VectorField, integrate_flow
from .linalg import expm, linear_factorize, positive_growth_rate, skew_rotation_blocks
from .maps import CompositeMap, IdentityMap, PiecewiseMap, SmoothMap, _eye_like, glue_piecewise
from .profiles import DampingWindow
from .regions import All, Annulus, Ball, grid_in_region

#: Growth-margin factor on the exact-zone radius of damped linear stages.
GROWTH_MARGIN = 1.1

#: Region inflation used when declaring piece membership around seams.
SEAM_INFLATION = 0.02


class RadialLinearField(VectorField):
    """beta(|x|) * M x, for a damping window beta: linear core, zero far out."""

    def __init__(self, matrix, window: DampingWindow):
        M = np.asarray(matrix, dtype=float)
        self.matrix = M
        self.dimension = M.shape[0]
        self.window = window
        self.support = Ball(np.zeros(self.dimension), window.outer)

    def value(self, X):
        r = np.linalg.norm(X, axis=1)
        return self.window(r)[:, None] * (X @ self.matrix.T)

    def jacobian(self, X):
        r = np.linalg.norm(X, axis=1)
        b = self.window(r)
        db = self.window.derivative(r)
        J = b[:, None, None] * np.broadcast_to(self.matrix, (X.shape[0],) + self.matrix.shape)
        act = db != 0.0  # on the plateaus the radial term vanishes; there r may be 0
        if act.any():
            Mx = X[act] @ self.matrix.T
            grad = (db[act] / r[act])[:, None] * X[act]
            J = J.copy()
            J[act] += Mx[:, :, None] * grad[:, None, :]
        return J


class DampedSymmetricStage(SmoothMap):
    """Time-one map of beta(|x|) * Y x for symmetric Y with ||Y|| <= ln 2.

    Starting points whose whole trajectory stays in the beta == 1 plateau
    (radius <= window.inner / e^{lambda_plus}) are mapped by expm(Y)
    directly -- the flow is exactly linear there.  Everything else is
    integrated; the branch seam sits deep inside the plateau where both
    branches approximate the same linear flow to ~1e-12.
    """

    def __init__(self, sym_matrix, window: DampingWindow, *, steps: int = MIN_FLOW_STEPS):
        Y = np.asarray(sym_matrix, dtype=float)
        n = Y.shape[0]
        super().__init__(n, support=Ball(np.zeros(n), window.outer))
        self.matrix = Y
        self.window = window
        self.steps = int(steps)
        self.exact_matrix = expm(Y)
        self.exact_zone = window.inner / math.exp(positive_growth_rate(Y))
        self.field = RadialLinearField(Y, window)

    def _split(self, X):
        return np.linalg.norm(X, axis=1) <= self.exact_zone

    def _evaluate(self, X):
        exact = self._split(X)
        out = np.empty_like(X)
        if exact.any():
            out[exact] = X[exact] @ self.exact_matrix.T
        if (~exact).any():
            out[~exact] = integrate_flow(self.field, X[~exact], steps=self.steps)
        return out

    def _jacobian(self, X):
        exact = self._split(X)
        J = np.empty((X.shape[0], self.dimension, self.dimension))
        if exact.any():
            J[exact] = self.exact_matrix
        if (~exact).any():
            _, Jnum = integrate_flow(self.field, X[~exact], steps=self.steps, with_jacobian=True)
            J[~exact] = Jnum
        return J

    def inverse(self):
        return DampedSymmetricStage(-self.matrix, self.window, steps=self.steps)

    def refined(self, factor: int):
        return DampedSymmetricStage(self.matrix, self.window, steps=self.steps * int(factor))


class DampedSkewStage(SmoothMap):
    """Time-one map of beta(|x|) * K x for skew K: the exact closed form.

    The field is tangent to spheres, so |x| is conserved and the flow is
    x -> expm(beta(|x|) K) x, evaluated by plane rotations -- exact at any
    radius, no integrator involved.
    """

    def __init__(self, skew_matrix, window: DampingWindow):
        K = np.asarray(skew_matrix, dtype=float)
        n = K.shape[0]
        super().__init__(n, support=Ball(np.zeros(n), window.outer))
        self.matrix = K
        self.window = window
        self.blocks = skew_rotation_blocks(K)

    def _evaluate(self, X):
        r = np.linalg.norm(X, axis=1)
        beta = self.window(r)
        out = X.copy()
        act = beta > 0.0
        if act.any():
            out[act] = self.blocks.apply_exp(beta[act], X[act])
        return out

    def _jacobian(self, X):
        r = np.linalg.norm(X, axis=1)
        beta = self.window(r)
        dbeta = self.window.derivative(r)
        J = self.blocks.exp_matrices(beta)
        act = dbeta != 0.0  # implies r > 0
        if act.any():
            F = self.blocks.apply_exp(beta[act], X[act])
            KF = F @ self.matrix.T
            grad = (dbeta[act] / r[act])[:, None] * X[act]
            J[act] += KF[:, :, None] * grad[:, None, :]
        return J

    def inverse(self):
        return DampedSkewStage(-self.matrix, self.window)


class DampedLinearDeformation(CompositeMap):
    """Composite of damped stages: equals `matrix` exactly on the core ball,
    identity (bitwise) outside the outer ball."""

    def __init__(self, stages, *, matrix, factors, window, r_core, r_outer):
        n = np.asarray(matrix).shape[0]
        super().__init__(stages, support=Ball(np.zeros(n), r_outer))
        self.matrix = np.asarray(matrix, dtype=float)
        self.factors = factors
        self.window = window
        self.r_core = float(r_core)
        self.r_outer = float(r_outer)

    def inverse(self):
        return CompositeMap([m.inverse() for m in reversed(self.maps)], support=self.support)


def damped_linear_deform(matrix, r_core: float, r_outer: float, *, steps: int = MIN_FLOW_STEPS) -> DampedLinearDeformation:
    """Globally smooth map equal to `matrix` on B(0, r_core), identity
    outside B(0, r_outer).

    The damping window must accommodate the worst radial growth of the
    symmetric factor: trajectories from the core ball reach at most
    r_core * e^{lambda_plus(Y)}; with a 10% margin that reach must stay
    below 0.75 * r_outer, else GeometryError -- the deformation does not
    fit in the shell.
    """
    if not (0.0 < r_core < r_outer):
        raise ParameterError(f"need 0 < r_core < r_outer, got {r_core}, {r_outer}")
    A = np.asarray(matrix, dtype=float)
    factors = linear_factorize(A)
    lam = positive_growth_rate(factors.Y)
    reach = GROWTH_MARGIN * r_core * math.exp(lam)
    if reach > 0.75 * r_outer:
        raise GeometryError(
            f"linear deformation does not fit: trajectories from radius {r_core:.6g} "
            f"reach {reach:.6g}, beyond 0.75 * r_outer = {0.75 * r_outer:.6g}"
        )
    window = DampingWindow(max(reach, 0.5 * r_outer), r_outer)
    norm_y = float(np.abs(np.linalg.eigvalsh(factors.Y)).max()) if A.shape[0] else 0.0
    n_stages = max(1, int(math.ceil(norm_y / math.log(2.0))))
    sym = DampedSymmetricStage(factors.Y / n_stages, window, steps=steps)
    skew = DampedSkewStage(factors.K, window)
    # right-to-left: the symmetric stages run first, the rotation last.
    stages = [skew] + [sym] * n_stages
    return DampedLinearDeformation(
        stages, matrix=A, factors=factors, window=window, r_core=r_core, r_outer=r_outer
    )


class BlendMap(SmoothMap):
    """Radial interpolation between a linear map (inside) and H (outside).

    Follows A x bitwise below window.inner, H bitwise above window.outer,
    and (1 - w) H + w A x in between for the damping weight w(|x|).
    """

    def __init__(self, H: SmoothMap, matrix, window: DampingWindow):
        A = np.asarray(matrix, dtype=float)
        super().__init__(H.dimension, domain=H.domain)
        self.H = H
        self.matrix = A
        self.window = window

    def _evaluate(self, X):
        r = np.linalg.norm(X, axis=1)
        w = self.window(r)
        out = np.empty_like(X)
        a_side = w == 1.0
        h_side = w == 0.0
        mid = ~(a_side | h_side)
        if a_side.any():
            out[a_side] = X[a_side] @ self.matrix.T
        if h_side.any():
            out[h_side] = self.H(X[h_side])
        if mid.any():
            wm = w[mid][:, None]
            out[mid] = (1.0 - wm) * self.H(X[mid]) + wm * (X[mid] @ self.matrix.T)
        return out

    def _jacobian(self, X):
        r = np.linalg.norm(X, axis=1)
        w = self.window(r)
        dw = self.window.derivative(r)
        J = np.empty((X.shape[0], self.dimension, self.dimension))
        a_side = w == 1.0
        h_side = w == 0.0
        mid = ~(a_side | h_side)
        if a_side.any():
            J[a_side] = self.matrix
        if h_side.any():
            J[h_side] = self.H.jacobian(X[h_side])
        if mid.any():
            pts = X[mid]
            wm = w[mid][:, None, None]
            J[mid] = (1.0 - wm) * self.H.jacobian(pts) + wm * self.matrix
            gap = pts @ self.matrix.T - self.H(pts)
            grad = (dw[mid] / r[mid])[:, None] * pts
            J[mid] += gap[:, :, None] * grad[:, None, :]
        return J


@dataclass
class LinearizationResult:
    """Outcome of local_linearize: the glued map plus its geometry."""

    map: PiecewiseMap
    matrix: np.ndarray
    delta0: float
    delta1: float
    delta2: float
    blend: BlendMap
    deform: DampedLinearDeformation
    attempts: int

    def identity_ball(self) -> Ball:
        return Ball(np.zeros(self.matrix.shape[0]), self.delta0)

    def untouched_radius(self) -> float:
        return self.delta2 * (1.0 + SEAM_INFLATION)


def local_linearize(
    H: SmoothMap,
    rho: float,
    *,
    delta2: float | None = None,
    eta: float = SEAM_INFLATION,
    glue_tol: float = 1e-10,
    grid_target: int = 500,
    max_halvings: int = 40,
    fix_tol: float = 1e-9,
    steps: int = MIN_FLOW_STEPS,
    seed: int = 0,
) -> LinearizationResult:
    """Make H the identity near its fixed point at the origin.

    Returns a map equal to the identity on B(0, delta0), equal to H outside
    B(0, delta2 * (1 + eta)), glued through the blend-and-deform middle
    piece.  delta2 starts at rho / 4 and is halved (at most `max_halvings`
    times) until the blend passes a positive-Jacobian grid check; delta1 =
    delta2 / 2 bounds the blend's linear zone and delta0 = delta1 / (4 *
    max(||A^-1||, 1)) keeps the deformed core inside it.
    """
    n = H.dimension
    origin = np.zeros(n)
    drift = float(np.linalg.norm(H(origin)))
    if drift > fix_tol:
        raise LinearizationError(
            f"map must fix the origin to be linearized there; |H(0)| = {drift:.3e}"
        )
    A = H.jacobian(origin)
    det = float(np.linalg.det(A))
    if det <= 0.0:
        raise OrientationError(f"derivative at the fixed point must have det > 0, got {det:.6e}")
    inv_norm = float(np.linalg.norm(np.linalg.inv(A), 2))

    d2 = rho / 4.0 if delta2 is None else float(delta2)
    if not (0.0 < d2 <= rho / 4.0):
        raise ParameterError(f"delta2 must lie in (0, rho/4], got {d2}")
    attempts = 0
    blend = None
    while attempts <= max_halvings:
        attempts += 1
        d1 = d2 / 2.0
        d0 = d1 / (4.0 * max(inv_norm, 1.0))
        blend = BlendMap(H, A, DampingWindow(d1, d2))
        check_zone = Annulus(origin, 0.9 * d1, min(1.1 * d2, rho))
        grid = grid_in_region(check_zone, grid_target)
        dets = np.linalg.det(blend.jacobian(grid))
        if dets.min() > 0.0:
            break
        d2 *= 0.5
    else:
        raise LinearizationError(
            f"blend stayed degenerate after {max_halvings} halvings of delta2 "
            f"(last min det {dets.min():.3e} at delta2 = {d2 * 2:.3e})"
        )

    deform = damped_linear_deform(np.linalg.inv(A), d0, d1, steps=steps)
    middle = CompositeMap([blend, deform])
    pieces = [
        (Ball(origin, d0), IdentityMap(n)),
        (Annulus(origin, d0 * (1.0 - eta), d2 * (1.0 + eta)), middle),
        (All(n), H),
    ]
    overlaps = [
        (0, 1, Annulus(origin, d0 * (1.0 - eta), d0)),
        (1, 2, Annulus(origin, d2, d2 * (1.0 + eta))),
    ]
    glued = glue_piecewise(pieces, overlaps=overlaps, tol=glue_tol, seed=seed)
    return LinearizationResult(
        map=glued,
        matrix=A,
        delta0=d0,
        delta1=d1,
        delta2=d2,
        blend=blend,
        deform=deform,
        attempts=attempts,
    )
