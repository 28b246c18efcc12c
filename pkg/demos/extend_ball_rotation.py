"""Extend a rotation of a ball to a global map, then poke at it.

The input only promises a diffeomorphism of the closed ball B(a, 1); the
extension must agree with it on the ball, be the identity far away (bitwise,
not approximately), and stay an orientation-preserving diffeomorphism in
between.  All three get measured below.
"""
import numpy as np

from diffeoglue import (
    Ball,
    BallDiffeo,
    Complement,
    palais_extend,
    rotation_map,
    sample_region,
    stream,
)

a = np.array([1.0, -0.5])
rot = rotation_map(2, np.pi / 5.0)  # fixes the origin, so recenter it by hand

# a rotation about the ball center a: x -> a + R(x - a)
from diffeoglue import TranslatedMap

spin = TranslatedMap(rot, a)
ball = BallDiffeo(spin, a, 1.0, 0.4)

ext = palais_extend(ball, 0.5, seed=11)
print("tau found by the collar search:", ext.tau)
print("identity radius (everything outside is untouched):", ext.identity_radius)

# 1. agreement on the ball
pts = sample_region(Ball(a, 1.0), 2000, stream(1))
gap = np.linalg.norm(ext.map(pts) - spin(pts), axis=1).max()
print("worst agreement gap on the ball:", gap)

# 2. bitwise identity far away (window the unbounded complement for sampling)
far = sample_region(
    Complement(Ball(a, ext.identity_radius)), 2000, stream(2), window=Ball(a, 12.0)
)
moved = np.abs(ext.map(far) - far).max()
print("max |F(x) - x| outside the support (want exactly 0.0):", moved)

# 3. a diffeomorphism everywhere: invert through the structural inverse and
# check the Jacobian keeps positive determinant through the collar
shell = sample_region(Ball(a, ext.identity_radius), 4000, stream(3))
back = ext.map.inverse()(ext.map(shell))
print("worst roundtrip |F^-1(F(x)) - x|:", np.linalg.norm(back - shell, axis=1).max())
dets = np.linalg.det(ext.map.jacobian(shell))
print("Jacobian determinant range:", dets.min(), "..", dets.max())
