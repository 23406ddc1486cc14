"""
How the p-widths of a flat torus grow
=====================================

For each p the bent polynomial family is a detected p-sweepout; its largest
member bounds the p-width from above.  A packing of p small balls, each
forced to carry a fixed share of mass, bounds it from below.  Both grow
like sqrt(p) on a 2-torus.
"""

from minmax_lab import cli

cfg = cli.validate_config({"scenario": "width-scan", "p": [1, 2, 4, 8, 16],
                           "samples": {"upper": 64, "polish": 2, "alpha_centers": 3}})
report = cli.execute(cfg, jobs=4)
res = report["results"]

print(f"ball-mass constant alpha = {res['alpha']['alpha']:.4f}")
print("   p    lower     upper   envelope")
for r, env in zip(res["per_p"], res["summary"]["upper_envelope"]):
    print(f"{r['p']:4d} {r['lower']:8.4f} {r['upper']:9.4f} {env:9.4f}")
for key in ("lower_fit", "upper_fit"):
    fit = res["summary"][key]
    print(f"{key}: slope {fit['slope']:.3f}, Weyl ratios in {[round(x, 4) for x in fit['weyl_interval']]}")
