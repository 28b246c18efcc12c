# Deform a nonlinear map into the identity near the origin.
#
# local_linearize takes H with H(0) = 0 and produces H1 that is *exactly* the
# identity on a small ball, *bitwise* equal to H outside a working radius,
# and a diffeomorphic interpolation in between (first bend H to its linear
# part DH(0), then flow the linear part to the identity with a damped matrix
# log).  The ball-extension pipeline leans on this to make maps trivial where
# it needs to do surgery.

import numpy as np

from diffeoglue import Ball, TwistMap, local_linearize, sample_region, stream

H = TwistMap(np.zeros(2), 0.8, 0.3, 1.1)  # twist supported in an annulus
lin = local_linearize(H, 1.6, seed=5)

print("DH(0) recovered by the pipeline:\n", lin.matrix)
print("identity ball radius delta0 :", lin.delta0)
print("untouched beyond radius     :", lin.untouched_radius())
print("radius halvings needed      :", lin.attempts)

core = sample_region(lin.identity_ball(), 1500, stream(21))
print("worst |H1 - id| on the core :", np.abs(lin.map(core) - core).max(), "(want 0.0)")

outside = sample_region(Ball(np.zeros(2), 3.0), 4000, stream(22))
outside = outside[np.linalg.norm(outside, axis=1) > lin.untouched_radius()]
print("worst |H1 - H| outside      :", np.abs(lin.map(outside) - H(outside)).max(), "(want 0.0)")

# the blend region is where things could go wrong, so sample the Jacobian
# there and make sure orientation never flips
mid = sample_region(Ball(np.zeros(2), lin.untouched_radius()), 4000, stream(23))
dets = np.linalg.det(lin.map.jacobian(mid))
print("min det DH1 on the blend    :", dets.min())

back = lin.map.inverse()(lin.map(mid))
print("worst roundtrip on the blend:", np.linalg.norm(back - mid, axis=1).max())
