"""
Cutting a neighbourhood out of parameter space
==============================================

Remove from RP^(p+1) the parameters whose cycle lies close (in flat
distance) to a chosen cycle.  If what was removed carries no sweepout loop
and the full family detects p + 1, the remainder still detects p.
"""

from minmax_lab import cli

cfg = {"model": {"kind": "torus", "n": 1, "g": 27}, "family": {"kind": "guth", "field_seed": 0}}
for p in (1, 2):
    r = cli._restriction_step(cfg, p, "median-level")
    print(f"p={p}: kept {r['Y_cells'][0]} of {r['X_cells'][0]} vertices (eps {r['eps']:.4f}); "
          f"removed part trivial: {r['hypothesis_Z_trivial']}; "
          f"full detects {p + 1}: {r['detects_p_plus_1']}; remainder detects {p}: {r['detected']}")
