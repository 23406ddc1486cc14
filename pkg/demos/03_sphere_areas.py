"""
Areas on the 3-sphere by counting crossings
===========================================

Throw random great circles at a surface in S^3 and count crossings: the
area is 2 pi times the mean count.  Great spheres come out at 4 pi, the
Clifford torus at 2 pi^2, and no zero set of a degree-2 harmonic is crossed
more than 4 times by any circle.
"""

import math

import numpy as np

from minmax_lab import sweepouts as sw

lines = 20_000
coord = sw.coordinate_family(lines, seed=0)
m, top = coord.masses_and_max(np.eye(4))
print("great spheres x_i = 0:", np.round(m / (4 * math.pi), 6), " max crossings", top.max())

clifford = sw.eigenfunction_family([sw.harmonic_basis()[5]], lines, 0, require_constant=False)
m, top = clifford.masses_and_max([[1.0]])
print(f"Clifford torus: {m[0]:.4f} vs 2 pi^2 = {2 * math.pi**2:.4f}, max crossings {top[0]}")

# the 14-dimensional family of all harmonics of degree <= 2
fam = sw.eigenfunction_family(lines=1024, seed=1, samples=256)
A = np.random.default_rng(2).standard_normal((2000, 14))
m, top = fam.masses_and_max(A, chunk=16)
print(f"2000 random members: max area / 8 pi = {m.max() / (8 * math.pi):.4f}, "
      f"max crossings {top.max()} (bound {fam.crossing_bound})")
