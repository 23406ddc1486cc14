"""
Which loops of cycles sweep out?
================================

Walk around a loop of cycles, and at each small step add the lighter of the
two regions bounded by consecutive cycles.  The sum is either empty or the
whole manifold.  Loops that sum to everything are sweepouts.
"""

import numpy as np

from minmax_lab import almgren as am
from minmax_lab import models as md
from minmax_lab import sweepouts as sw

for cx in (md.build_torus(1, 27), md.build_sphere(2, 8)):
    f = md.morse_direction(cx, 0)
    w = am.calibrate_threshold(f)["threshold"]
    lin = sw.linear_sweepout(f)
    loops = {
        # sublevel sets from empty to everything: the basic sweepout
        "level sets": lin.generator,
        "started elsewhere": lambda s: lin.generator(np.asarray(s) + 0.37),
        "twice around": lambda s: lin.generator(2 * np.asarray(s)),
        "wiggle in place": lambda s: 2.0 + 0.3 * np.sin(2 * np.pi * np.atleast_1d(s))[:, None],
    }
    print(f"{cx.name}  (step threshold {w:.4f})")
    for name, path in loops.items():
        cls, stats = am.path_class(lin, path, w)
        print(f"  {name:18s} class {cls}   {stats.steps} steps")
