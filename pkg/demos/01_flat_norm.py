"""
Flat norm by minimum cut
========================

A null-homologous cycle t on a closed surface is cheapest to "erase" either
by paying for t itself or by paying for a region whose boundary cancels it.
The flat norm picks the best mixture, and on a cell complex it is a minimum
s-t cut on the dual graph of the faces.
"""

import math

import numpy as np

from minmax_lab import chains as ch
from minmax_lab import models as md

# the octahedron inscribed in the unit sphere
octa = md.build_octahedron()
z = np.asarray(octa.centers[1])[:, 2]
equator = octa.chain(1, np.flatnonzero(np.abs(z) < 1e-12))

# the equator has length 4 sqrt(2); a hemisphere of 4 faces has area 2 sqrt(3)
fn = ch.flat_norm(equator)
print(f"equator mass       {ch.mass(equator):.6f}")
print(f"flat norm          {fn.cost:.6f}   (2 sqrt 3 = {2 * math.sqrt(3):.6f})")
print(f"filling faces      {fn.chain.cells.tolist()}")

# random boundaries on a weighted 4x4 torus, checked against brute force over all 2^16 regions
rng = np.random.default_rng(1)
torus = md.build_torus(1, 4)
torus = ch.reweighted(torus, {d: rng.uniform(0.5, 2.0, torus.n_cells(d)) for d in (1, 2)})
print("\n  cut        exhaustive")
for _ in range(5):
    t = ch.boundary(ch.Mod2Chain.from_mask(torus, 2, rng.random(16) < 0.4))
    print(f"  {ch.flat_norm(t).cost:.6f}   {ch.flat_norm_exhaustive(t).cost:.6f}")
