"""Shared helpers for the test suite.

The finite-difference Jacobian here is written from scratch (forward map
only, central differences) so it can serve as an independent oracle for the
analytic Jacobians throughout the library.
"""
import numpy as np
import pytest

from diffeoglue.maps import (
    PolyPerturbMap,
    SmoothMap,
    TwistMap,
    rotation_map,
    shear_map,
)


def fd_jacobian(mapping, x, h=1e-6):
    """Central-difference Jacobian of `mapping` at a single point."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    J = np.empty((n, n))
    for j in range(n):
        step = h * max(1.0, abs(x[j]))
        e = np.zeros(n)
        e[j] = step
        J[:, j] = (mapping(x + e) - mapping(x - e)) / (2.0 * step)
    return J


def max_jacobian_gap(mapping, points, h=1e-6):
    """Worst relative gap between analytic and FD Jacobians over `points`."""
    worst = 0.0
    for x in points:
        Ja = mapping.jacobian(x)
        Jf = fd_jacobian(mapping, x, h)
        gap = np.abs(Ja - Jf).max() / max(1.0, np.abs(Ja).max())
        worst = max(worst, float(gap))
    return worst


def make_family(name: str, dimension: int) -> SmoothMap:
    """Origin-fixing representative of each built-in map family.

    Parameters chosen so every map is a diffeomorphism on a ball of radius
    ~1.4 about the origin with comfortable margin.
    """
    origin = np.zeros(dimension)
    if name == "rotation":
        return rotation_map(dimension, 0.7)
    if name == "shear":
        return shear_map(dimension, 0.45)
    if name == "twist":
        return TwistMap(origin, 0.9, inner=0.35, outer=1.3)
    if name == "poly_perturb":
        return PolyPerturbMap(origin, 0.35, src_axis=0, dst_axis=1)
    raise ValueError(name)


FAMILIES = ("rotation", "shear", "twist", "poly_perturb")


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)
