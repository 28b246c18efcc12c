"""Scalar C-infinity transition kernels and radial profile inversion.

Everything here is built on the classical exponential step
``s(t) = f(t) / (f(t) + f(1-t))`` with ``f(t) = exp(-1/t)`` for ``t > 0``:
smooth, exactly 0 for ``t <= 0``, exactly 1 for ``t >= 1`` and strictly
increasing in between.  The plateaus are realized by branching, so plateau
values are bitwise exact and plateau derivatives are exactly zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

# Residual tolerance of the radial inversion, relative to max(1, y).
_INVERT_RTOL = 1e-13


def _as_float_array(t):
    arr = np.asarray(t, dtype=float)
    return arr, np.isscalar(t) or arr.ndim == 0


def smooth_step(t):
    """Exponential smoothstep: 0 for t <= 0, 1 for t >= 1, C-inf monotone between."""
    arr, scalar = _as_float_array(t)
    out = np.zeros_like(arr)
    out[arr >= 1.0] = 1.0
    mid = (arr > 0.0) & (arr < 1.0)
    if np.any(mid):
        tm = arr[mid]
        # s = 1 / (1 + exp(1/t - 1/(1-t))); the exp may overflow harmlessly to inf.
        with np.errstate(over="ignore"):
            out[mid] = 1.0 / (1.0 + np.exp(1.0 / tm - 1.0 / (1.0 - tm)))
    return float(out) if scalar else out


def smooth_step_derivative(t):
    """Derivative of :func:`smooth_step`; exactly zero on both plateaus."""
    arr, scalar = _as_float_array(t)
    out = np.zeros_like(arr)
    mid = (arr > 0.0) & (arr < 1.0)
    if np.any(mid):
        tm = arr[mid]
        with np.errstate(over="ignore"):
            s = 1.0 / (1.0 + np.exp(1.0 / tm - 1.0 / (1.0 - tm)))
        # s' = s (1 - s) (1/t^2 + 1/(1-t)^2); the s(1-s) factor kills the poles.
        out[mid] = s * (1.0 - s) * (1.0 / tm**2 + 1.0 / (1.0 - tm) ** 2)
    return float(out) if scalar else out


@dataclass(frozen=True)
class TransitionProfile:
    """Non-decreasing radial profile: value c0 for t <= a, c1 for t >= b.

    Used as the multiplier phi in radial squeezes ``x -> phi(|x|) x``, hence
    the positivity requirement on ``c0``: the squeezed map must stay injective
    at the origin.
    """

    a: float
    b: float
    c0: float
    c1: float

    def __post_init__(self):
        if not (0.0 <= self.a < self.b):
            raise ParameterError(f"profile needs 0 <= a < b, got a={self.a}, b={self.b}")
        if not (0.0 < self.c0 <= self.c1):
            raise ParameterError(f"profile needs 0 < c0 <= c1, got c0={self.c0}, c1={self.c1}")
        if not np.isfinite([self.a, self.b, self.c0, self.c1]).all():
            raise ParameterError("profile parameters must be finite")

    def __call__(self, t):
        arr, scalar = _as_float_array(t)
        s = smooth_step((arr - self.a) / (self.b - self.a))
        out = self.c0 + (self.c1 - self.c0) * s
        # Re-branch so the plateaus are bitwise exact even after the affine map.
        out = np.where(arr <= self.a, self.c0, out)
        out = np.where(arr >= self.b, self.c1, out)
        return float(out) if scalar else out

    def derivative(self, t):
        arr, scalar = _as_float_array(t)
        ds = smooth_step_derivative((arr - self.a) / (self.b - self.a))
        out = (self.c1 - self.c0) / (self.b - self.a) * ds
        return float(out) if scalar else out

    def radial_value(self, t):
        """g(t) = phi(t) * t, the radius-to-radius action of the squeeze."""
        arr, scalar = _as_float_array(t)
        out = self(arr) * arr
        return float(out) if scalar else out

    def radial_derivative(self, t):
        arr, scalar = _as_float_array(t)
        out = self.derivative(arr) * arr + self(arr)
        return float(out) if scalar else out


def transition_profile(a: float, b: float, c0: float, c1: float) -> TransitionProfile:
    """Validated constructor for :class:`TransitionProfile`."""
    return TransitionProfile(float(a), float(b), float(c0), float(c1))


@dataclass(frozen=True)
class DampingWindow:
    """Decreasing window: exactly 1 for t <= inner, exactly 0 for t >= outer.

    This is the damping applied to vector fields so their flows are supported
    in a prescribed ball or tube.  Unlike :class:`TransitionProfile` it is
    allowed to vanish.
    """

    inner: float
    outer: float

    def __post_init__(self):
        if not (0.0 <= self.inner < self.outer):
            raise ParameterError(
                f"window needs 0 <= inner < outer, got inner={self.inner}, outer={self.outer}"
            )

    def __call__(self, t):
        arr, scalar = _as_float_array(t)
        out = 1.0 - smooth_step((arr - self.inner) / (self.outer - self.inner))
        out = np.where(arr <= self.inner, 1.0, out)
        out = np.where(arr >= self.outer, 0.0, out)
        return float(out) if scalar else out

    def derivative(self, t):
        arr, scalar = _as_float_array(t)
        ds = smooth_step_derivative((arr - self.inner) / (self.outer - self.inner))
        out = -ds / (self.outer - self.inner)
        return float(out) if scalar else out


def invert_radial_profile(profile: TransitionProfile, y):
    """Solve g(r) = phi(r) * r = y for r >= 0 to residual 1e-13 * max(1, y).

    On the two plateaus the inverse is the exact division; in the transition
    band a bisection-safeguarded Newton iteration runs on the bracket [a, b].
    g is strictly increasing there (g' >= c0 > 0), so the bracket never lies.
    """
    arr, scalar = _as_float_array(y)
    if np.any(arr < 0):
        raise ParameterError("radial inversion is defined for y >= 0 only")
    out = np.empty_like(arr)

    ga = profile.c0 * profile.a
    gb = profile.c1 * profile.b
    low = arr <= ga
    high = arr >= gb
    mid = ~(low | high)
    out[low] = arr[low] / profile.c0
    out[high] = arr[high] / profile.c1

    if np.any(mid):
        target = arr[mid]
        lo = np.full_like(target, profile.a)
        hi = np.full_like(target, profile.b)
        # Secant-style initial guess, clipped into the bracket.
        r = np.clip(
            profile.a + (target - ga) * (profile.b - profile.a) / max(gb - ga, 1e-300),
            lo,
            hi,
        )
        tol = _INVERT_RTOL * np.maximum(1.0, target)
        for _ in range(120):
            g = profile.radial_value(r)
            res = g - target
            done = np.abs(res) <= tol
            if done.all():
                break
            lo = np.where(res < 0, np.maximum(lo, r), lo)
            hi = np.where(res > 0, np.minimum(hi, r), hi)
            step = res / profile.radial_derivative(r)
            cand = r - step
            bad = ~np.isfinite(cand) | (cand <= lo) | (cand >= hi)
            cand = np.where(bad, 0.5 * (lo + hi), cand)
            r = np.where(done, r, cand)
        out[mid] = r

    return float(out) if scalar else out
