"""Compactly supported flows: damped translations and ball transport.

The workhorse is the damped translation: the time-one map of the field
w(d(x)) * (end - start), where d is a smoothed distance to the travel
segment and w a damping window equal to 1 within `payload_radius` and 0
beyond `tube_radius`.  Points of the payload ball are translated *exactly*
-- their whole trajectory stays inside the w == 1 plateau, where every
Runge-Kutta stage evaluates the constant field, so the integrator
reproduces x + (end - start) to the last bit.  Outside the tube the field
is exactly zero and the map is the identity, bitwise.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import ContainmentError, GeometryError, ParameterError
from .maps import CompositeMap, SmoothMap
from .profiles import DampingWindow, smooth_step, smooth_step_derivative
from .regions import (
    Capsule,
    Region,
    as_points,
    segment_segment_distance,
    sphere_points,
)

#: Steps per unit of tube stiffness (segment length over damping-shell width).
#: Sized so that doubling the step count moves any output by well under 1e-9
#: even for long routes threaded through thin damping shells (stiffness ~12).
STEPS_PER_STIFFNESS = 144

#: Minimum RK4 step count for any flow map.
MIN_FLOW_STEPS = 96

#: Safe bound on max_u u*(1 - smooth_step(u)); governs how far the smoothed
#: travel parameter overshoots the segment (numerically the max is ~0.279).
CLAMP_OVERHANG = 0.3


def default_step_count(length: float, shell_width: float) -> int:
    stiffness = length / shell_width if shell_width > 0 else 1.0
    return max(MIN_FLOW_STEPS, int(math.ceil(STEPS_PER_STIFFNESS * stiffness)))


# ---------------------------------------------------------------------------
# vector fields and integration


class VectorField:
    """Time-independent field on R^n with analytic spatial derivative."""

    dimension: int
    support: Region | None = None

    def value(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def integrate_flow(field: VectorField, X, *, time: float = 1.0, steps: int, with_jacobian: bool = False):
    """Classical RK4 time-`time` map of `field`, applied to points X.

    With `with_jacobian` the tangent map is carried through the exact
    derivative of the RK4 recursion, so the returned Jacobian differentiates
    the *implemented* map, not the ideal flow.
    """
    pts, single = as_points(X, field.dimension)
    if steps < 1:
        raise ParameterError(f"flow needs at least one step, got {steps}")
    h = time / steps
    x = pts.copy()
    carry = np.zeros_like(x)  # Kahan compensation keeps accumulation at ~1 ulp
    n = field.dimension
    if with_jacobian:
        M = np.broadcast_to(np.eye(n), (x.shape[0], n, n)).copy()
    for _ in range(steps):
        k1 = field.value(x)
        x2 = x + (0.5 * h) * k1
        k2 = field.value(x2)
        x3 = x + (0.5 * h) * k2
        k3 = field.value(x3)
        x4 = x + h * k3
        k4 = field.value(x4)
        if with_jacobian:
            K1 = np.einsum("mij,mjk->mik", field.jacobian(x), M)
            K2 = np.einsum("mij,mjk->mik", field.jacobian(x2), M + (0.5 * h) * K1)
            K3 = np.einsum("mij,mjk->mik", field.jacobian(x3), M + (0.5 * h) * K2)
            K4 = np.einsum("mij,mjk->mik", field.jacobian(x4), M + h * K3)
            M = M + (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4)
        inc = (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        y = inc - carry
        t = x + y
        carry = (t - x) - y
        x = t
    if with_jacobian:
        return (x[0], M[0]) if single else (x, M)
    return x[0] if single else x


class FlowMap(SmoothMap):
    """Time-t map of a vector field as a SmoothMap."""

    def __init__(self, field: VectorField, *, time: float = 1.0, steps: int = MIN_FLOW_STEPS, support: Region | None = None):
        super().__init__(field.dimension, support=support if support is not None else field.support)
        self.field = field
        self.time = float(time)
        self.steps = int(steps)

    def _evaluate(self, X):
        return integrate_flow(self.field, X, time=self.time, steps=self.steps)

    def _jacobian(self, X):
        _, J = integrate_flow(self.field, X, time=self.time, steps=self.steps, with_jacobian=True)
        return J

    def inverse(self):
        return FlowMap(self.field, time=-self.time, steps=self.steps, support=self.support)

    def refined(self, factor: int):
        return type(self)._rebuild(self, self.steps * int(factor))

    def _rebuild(self, steps: int):
        return FlowMap(self.field, time=self.time, steps=steps, support=self.support)


# ---------------------------------------------------------------------------
# smoothed tube coordinates


def smooth_clamp(t, T: float):
    """C-infinity clamp of t to [0, 1]: identity inside, constant beyond +-T.

    The ramps join the plateaus with all derivatives matching; the reference
    value never overshoots [0 - CLAMP_OVERHANG*T, 1 + CLAMP_OVERHANG*T] and
    |smooth_clamp(t) - t| <= |t| below 0 (resp. |t - 1| above 1), which is
    what keeps payload trajectories inside the damping plateau.
    """
    t = np.asarray(t, dtype=float)
    out = t.copy()
    out[t <= -T] = 0.0
    out[t >= 1.0 + T] = 1.0
    lo = (t > -T) & (t < 0.0)
    if lo.any():
        u = -t[lo] / T
        out[lo] = t[lo] * (1.0 - smooth_step(u))
    hi = (t > 1.0) & (t < 1.0 + T)
    if hi.any():
        u = (t[hi] - 1.0) / T
        out[hi] = t[hi] - (t[hi] - 1.0) * smooth_step(u)
    return out


def smooth_clamp_derivative(t, T: float):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    out[(t >= 0.0) & (t <= 1.0)] = 1.0
    lo = (t > -T) & (t < 0.0)
    if lo.any():
        u = -t[lo] / T
        out[lo] = 1.0 - smooth_step(u) - u * smooth_step_derivative(u)
    hi = (t > 1.0) & (t < 1.0 + T)
    if hi.any():
        u = (t[hi] - 1.0) / T
        out[hi] = 1.0 - smooth_step(u) - u * smooth_step_derivative(u)
    return out


class TubeField(VectorField):
    """Damped constant field moving a payload ball along one segment.

    value(x) = w(dtube(x)) * (end - start), where dtube is the distance to
    the point start + sc(t(x)) * (end - start) for the smooth clamp sc of the
    axial coordinate t(x).  dtube is smooth, coincides with the segment
    distance away from the endpoint caps, dominates the distance to the
    (slightly extended) segment, and satisfies dtube(x) <= |x - start| on the
    payload ball.
    """

    def __init__(self, start, end, window: DampingWindow):
        a = np.asarray(start, dtype=float)
        b = np.asarray(end, dtype=float)
        L = float(np.linalg.norm(b - a))
        if L <= 0.0:
            raise ParameterError("translation segment is degenerate (start == end)")
        self.dimension = a.shape[0]
        self.start = a
        self.end = b
        self.length = L
        self.axis = (b - a) / L
        self.window = window
        shell = window.outer - window.inner
        self.clamp_scale = min(2.0, shell / L)
        self.overhang = CLAMP_OVERHANG * self.clamp_scale * L
        ext = self.overhang * self.axis
        self.support = Capsule(a - ext, b + ext, window.outer)

    def _tube_distance(self, pts):
        t = (pts - self.start) @ self.axis / self.length
        s = smooth_clamp(t, self.clamp_scale)
        h = pts - self.start - (s * self.length)[:, None] * self.axis[None, :]
        return t, h, np.linalg.norm(h, axis=1)

    def value(self, X):
        pts, _ = as_points(X, self.dimension)
        _, _, d = self._tube_distance(pts)
        w = self.window(d)
        return w[:, None] * (self.end - self.start)

    def jacobian(self, X):
        pts, _ = as_points(X, self.dimension)
        t, h, d = self._tube_distance(pts)
        dw = self.window.derivative(d)
        n = self.dimension
        J = np.zeros((pts.shape[0], n, n))
        act = dw != 0.0  # plateaus contribute nothing; there d > 0 is guaranteed
        if act.any():
            hh = h[act] / d[act, None]
            scp = smooth_clamp_derivative(t[act], self.clamp_scale)
            grad = hh - (scp * (hh @ self.axis))[:, None] * self.axis[None, :]
            v = self.end - self.start
            J[act] = v[None, :, None] * (dw[act, None] * grad)[:, None, :]
        return J


class DampedTranslationMap(FlowMap):
    """Diffeomorphism translating B(start, payload_radius) to the same ball
    at `end`, identity outside a capsule of radius `tube_radius` around the
    travel segment.  The inverse is the mirrored translation, which undoes
    the payload exactly and the tube to integrator accuracy.
    """

    def __init__(self, start, end, payload_radius: float, tube_radius: float, *, steps: int | None = None):
        window = DampingWindow(payload_radius, tube_radius)
        field = TubeField(start, end, window)
        if steps is None:
            steps = default_step_count(field.length, tube_radius - payload_radius)
        super().__init__(field, time=1.0, steps=steps)
        self.payload_radius = float(payload_radius)
        self.tube_radius = float(tube_radius)

    @property
    def start(self):
        return self.field.start

    @property
    def end(self):
        return self.field.end

    def inverse(self):
        return DampedTranslationMap(
            self.end, self.start, self.payload_radius, self.tube_radius, steps=self.steps
        )

    def _rebuild(self, steps: int):
        return DampedTranslationMap(
            self.start, self.end, self.payload_radius, self.tube_radius, steps=steps
        )

    def to_tree(self):
        return {
            "type": "damped_translate",
            "params": {
                "start": self.start.tolist(),
                "end": self.end.tolist(),
                "payload_radius": self.payload_radius,
                "tube_radius": self.tube_radius,
                "steps": self.steps,
            },
        }


def damped_translation(start, end, payload_radius: float, tube_radius: float | None = None, *, steps: int | None = None) -> DampedTranslationMap:
    """Validated damped translation; tube_radius defaults to twice the payload."""
    if tube_radius is None:
        tube_radius = 2.0 * payload_radius
    if not (0.0 < payload_radius < tube_radius):
        raise ParameterError(
            f"need 0 < payload_radius < tube_radius, got {payload_radius}, {tube_radius}"
        )
    return DampedTranslationMap(start, end, payload_radius, tube_radius, steps=steps)


# ---------------------------------------------------------------------------
# polyline transport and multi-ball moves


def as_polyline(route) -> np.ndarray:
    """Normalize a route -- an (k, n) vertex array or (start, end) pair -- to
    a vertex array with non-degenerate segments."""
    vertices = np.asarray(route, dtype=float)
    if vertices.ndim != 2 or vertices.shape[0] < 2:
        raise ParameterError(f"route needs at least two vertices, got shape {vertices.shape}")
    lengths = np.linalg.norm(np.diff(vertices, axis=0), axis=1)
    scale = max(1.0, float(np.abs(vertices).max()))
    if np.any(lengths <= 1e-12 * scale):
        raise ParameterError("route contains a degenerate segment")
    return vertices


def transport_along_polyline(route, payload_radius: float, tube_radius: float | None = None, *, steps: int | None = None) -> SmoothMap:
    """Chain damped translations along a polyline.

    Each segment translates the payload ball exactly onto the next vertex, so
    the composite carries B(first_vertex, payload_radius) to the last vertex
    bitwise-exactly and is the identity outside the union of segment capsules.
    """
    vertices = as_polyline(route)
    if tube_radius is None:
        tube_radius = 2.0 * payload_radius
    if not (0.0 < payload_radius < tube_radius):
        raise ParameterError(
            f"need 0 < payload_radius < tube_radius, got {payload_radius}, {tube_radius}"
        )
    legs = [
        DampedTranslationMap(vertices[k], vertices[k + 1], payload_radius, tube_radius, steps=steps)
        for k in range(vertices.shape[0] - 1)
    ]
    if len(legs) == 1:
        return legs[0]
    # CompositeMap applies right-to-left; first leg goes last in the list.
    return CompositeMap(list(reversed(legs)))


def _route_capsules(transport: SmoothMap):
    legs = [transport] if isinstance(transport, DampedTranslationMap) else list(reversed(transport.maps))
    return [leg.field.support for leg in legs]


def move_balls(
    routes,
    payload_radius: float,
    tube_radius: float | None = None,
    *,
    domain: Region | None = None,
    steps: int | None = None,
    clearance: float = 0.0,
) -> SmoothMap:
    """Simultaneously transport disjoint balls along their routes.

    Every route gets a polyline transport; tubes of *different* routes must
    stay disjoint (checked segment-to-segment, including the smoothing
    overhang, plus `clearance`), so the per-route maps have disjoint supports
    and compose into one diffeomorphism that moves each payload ball exactly
    and is the identity outside all tubes.  With `domain` given, every tube
    must fit inside it (sampled on capsule boundaries).
    """
    if len(routes) == 0:
        raise ParameterError("move_balls needs at least one route")
    transports = [transport_along_polyline(r, payload_radius, tube_radius, steps=steps) for r in routes]
    capsules = [_route_capsules(t) for t in transports]

    for i in range(len(routes)):
        for j in range(i + 1, len(routes)):
            for ci in capsules[i]:
                for cj in capsules[j]:
                    gap = segment_segment_distance(ci.a, ci.b, cj.a, cj.b)
                    need = ci.radius + cj.radius + clearance
                    if gap <= need:
                        raise GeometryError(
                            f"tubes of routes {i} and {j} collide: segment gap "
                            f"{gap:.6g} <= required {need:.6g}"
                        )

    if domain is not None:
        for i, caps in enumerate(capsules):
            for cap in caps:
                if not domain.contains(_capsule_boundary_samples(cap)).all():
                    raise ContainmentError(
                        f"tube of route {i} leaves the working domain "
                        f"(capsule radius {cap.radius:.6g})"
                    )

    if len(transports) == 1:
        return transports[0]
    return CompositeMap(transports)


def _capsule_boundary_samples(cap: Capsule, axial: int = 9, ring: int = 24) -> np.ndarray:
    axis_pts = cap.a + np.linspace(0.0, 1.0, axial)[:, None] * (cap.b - cap.a)
    dirs = sphere_points(np.zeros(cap.dimension), 1.0, ring)
    pts = (axis_pts[:, None, :] + cap.radius * dirs[None, :, :]).reshape(-1, cap.dimension)
    caps_ends = np.vstack([
        cap.a + cap.radius * dirs,
        cap.b + cap.radius * dirs,
    ])
    return np.vstack([pts, caps_ends])
