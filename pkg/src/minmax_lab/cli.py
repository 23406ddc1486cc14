"""Reproducible experiment runner.

``minmax-lab run --config cfg.json`` validates the config, runs one scenario
and writes a JSON report, a CSV table and a plot-data CSV.  ``minmax-lab
verify report.json`` re-checks the recorded invariants from the serialized
witnesses.  All randomness is derived from the config seed, so identical
configs give byte-identical files.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from . import almgren as am
from . import chains as ch
from . import models as md
from . import param as pt
from . import sweepouts as sw
from . import widths as wd

log = logging.getLogger("minmax_lab")

SCENARIOS = ("width-scan", "s3-targets", "detection-suite", "flatnorm-oracle", "packing-bound")
PROVENANCE = ("measured", "calibrated", "structural-bound")
REPORT_FORMAT = "minmax-lab-report/1"
REL = 1e-9


class ConfigError(ValueError):
    pass


class ReportError(ValueError):
    pass


_int = {"type": "integer", "minimum": 0}
_pos = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "minmax-lab experiment config",
    "type": "object",
    "required": ["scenario"],
    "additionalProperties": False,
    "properties": {
        "scenario": {"enum": list(SCENARIOS)},
        "model": {
            "type": "object", "additionalProperties": False,
            "properties": {"kind": {"enum": ["torus", "sphere"]}, "n": _pos,
                           "g": {"type": "integer", "minimum": 3}, "d": {"enum": [2, 3]}},
        },
        "family": {
            "type": "object", "additionalProperties": False,
            "properties": {"kind": {"enum": ["bent-guth", "guth"]}, "field_seed": _int},
        },
        "p": {"type": "array", "items": _pos, "minItems": 1, "uniqueItems": True},
        "restriction_p": {"type": "array", "items": _pos, "uniqueItems": True},
        "samples": {
            "type": "object", "additionalProperties": False,
            "properties": {k: _pos for k in ("upper", "polish", "alpha_centers", "lines", "sweep_lines",
                                             "params", "crofton_samples", "members", "cycles")},
        },
        "seed": _int,
        "tolerances": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "relative": {"type": "number", "exclusiveMinimum": 0},
                "slope": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "weyl_spread": {"type": "number", "minimum": 1},
                "monotone": {"type": "number", "minimum": 0},
            },
        },
        "outputs": {
            "type": "object", "additionalProperties": False,
            "properties": {"dir": {"type": "string"}, "prefix": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"}},
        },
        "assertions": {"type": "boolean"},
    },
}

_TORUS = {"kind": "torus", "n": 1, "g": 81}
_TOL = {"relative": 0.02, "slope": [0.4, 0.6], "weyl_spread": 3.0, "monotone": 0.02}
DEFAULTS = {
    "width-scan": {"model": _TORUS, "family": {"kind": "bent-guth", "field_seed": 0},
                   "p": [1, 2, 4, 8, 16, 32], "samples": {"upper": 256, "polish": 4, "alpha_centers": 6}},
    "packing-bound": {"model": _TORUS, "family": {"kind": "bent-guth", "field_seed": 0},
                      "p": [1, 2, 4, 8, 16, 32], "samples": {"alpha_centers": 6}},
    "s3-targets": {"samples": {"lines": 100_000, "sweep_lines": 1024, "params": 10_000,
                               "crofton_samples": 512, "members": 16}},
    "detection-suite": {"model": {"kind": "torus", "n": 1, "g": 27}, "family": {"kind": "guth", "field_seed": 0},
                        "p": [1, 2, 3, 4], "restriction_p": [1, 2, 3]},
    "flatnorm-oracle": {"samples": {"cycles": 200}},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate_config(cfg: dict) -> dict:
    """Schema-check and fill defaults; raises ConfigError with the schema message."""
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None
    sc = cfg["scenario"]
    full = _merge({"seed": 0, "tolerances": _TOL, "assertions": True,
                   "outputs": {"dir": ".", "prefix": sc}}, DEFAULTS[sc])
    full = _merge(full, cfg)
    lo, hi = full["tolerances"]["slope"]
    if not lo < hi:
        raise ConfigError("invalid config at tolerances/slope: lower end must be below upper end")
    if sc in ("width-scan", "packing-bound") and full["model"].get("kind", "torus") != "torus":
        raise ConfigError("invalid config at model/kind: width scans run on torus models")
    if sc == "width-scan" and len(full["p"]) < 4:
        raise ConfigError("invalid config at p: a scaling fit needs at least 4 values of p")
    return full


def load_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return validate_config(raw)


def derive_seed(base: int, *keys) -> int:
    """Independent stream per (base, keys); string keys are hashed stably."""
    ent = [int(base)]
    for k in keys:
        ent.extend(k.encode() if isinstance(k, str) else [int(k)])
    return int(np.random.SeedSequence(ent).generate_state(1)[0])


def jsonable(x):
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    return x


def _row(key, quantity, value, provenance, p=None, ok=None) -> dict:
    if provenance not in PROVENANCE:
        raise ValueError(f"unknown provenance {provenance!r}")
    return {"key": key, "p": p, "quantity": quantity, "value": value, "provenance": provenance, "pass": ok}


def _close(a, b, rel=REL) -> bool:
    return abs(a - b) <= rel * max(1.0, abs(a), abs(b))


def _map(fn, args, jobs: int):
    if jobs <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        futs = [ex.submit(fn, *a) for a in args]
        return [f.result() for f in futs]


# ---------------------------------------------------------------------------
# model and family reconstruction (shared by run and verify)


def build_model(desc: dict) -> ch.AmbientComplex:
    if desc.get("kind", "torus") == "torus":
        return md.build_torus(desc.get("n", 1), desc.get("g", 27))
    return md.build_sphere(desc.get("d", 2), desc.get("g", 8))


def build_field(cfg: dict):
    cx = build_model(cfg["model"])
    return md.morse_direction(cx, cfg["family"].get("field_seed", 0))


def build_family(f, kind: str, p: int) -> am.ChainFamily:
    return sw.bent_guth_family(f, p) if kind == "bent-guth" else sw.guth_family(f, p)


def _alpha(cfg: dict, cx, w) -> dict:
    rng = np.random.default_rng(derive_seed(cfg["seed"], "alpha"))
    rot = sw.torus_rotation_sweepout(cx)
    radii = [0.05, 0.08, 0.11, 0.14, 0.17, 0.2]
    cal = wd.calibrate_alpha(rot, rng.random((cfg["samples"]["alpha_centers"], cx.dim)), radii, w)
    return {"alpha": cal["alpha"], "alphas": cal["alphas"], "spread": cal["spread"], "radii": radii,
            "family": rot.to_json(), "provenance": "calibrated"}


# ---------------------------------------------------------------------------
# width-scan and packing-bound


def _width_step(cfg: dict, p: int, w: float, alpha: float, upper: bool) -> dict:
    f = build_field(cfg)
    fam = build_family(f, cfg["family"]["kind"], p)
    det = am.is_p_sweepout(fam, None, p, w).to_json()
    out = {"p": p, "detection": det}
    if upper:
        u, diag = wd.upper_estimate(fam, cfg["samples"]["upper"], cfg["samples"]["polish"],
                                    derive_seed(cfg["seed"], "upper", p), det)
        out["upper"], out["upper_diagnostic"] = u, diag
    packing = md.ball_packing(fam.complex, p)
    wit, lb = wd.packing_lower_bound(fam, packing, alpha, det, seed=derive_seed(cfg["seed"], "packing", p))
    out["lower"], out["witness"], out["packing"] = lb, wit, packing.to_json()
    if upper:
        wd.WidthReport(p, out["upper"], out["upper_diagnostic"], lb, packing.to_json(), wit, alpha,
                       fam.complex.name, fam.to_json(), tolerance=cfg["tolerances"]["relative"])
    log.info("p=%d detected=%s lower=%.5g%s", p, det["detected"], lb,
             f" upper={out['upper']:.5g}" if upper else "")
    return jsonable(out)


def _scan_summary(cfg: dict, per_p: list, upper: bool) -> dict:
    ps = [r["p"] for r in per_p]
    out = {}
    lows = [r["lower"] for r in per_p]
    if len(ps) >= 4:
        out["lower_fit"] = wd.scaling_fit(ps, lows)
    if upper:
        ups = [r["upper"] for r in per_p]
        env = wd.monotone_envelope(ps, ups)
        out["upper_envelope"] = env
        out["upper_fit"] = wd.scaling_fit(ps, ups)
        out["envelope_monitor"] = wd.monotonicity_and_equality(ps, env, cfg["tolerances"]["monotone"])
        try:
            wd.monotonicity_and_equality(ps, ups, cfg["tolerances"]["monotone"])
            out["raw_monotone"] = {"monotone": True, "detail": ""}
        except wd.MonotonicityError as exc:
            out["raw_monotone"] = {"monotone": False, "detail": str(exc)}
    return jsonable(out)


def _scan_rows(results: dict, upper: bool) -> list:
    rows = [_row("alpha-hat", "alpha", results["alpha"]["alpha"], "calibrated"),
            _row("step-threshold", "threshold", results["threshold"], "calibrated")]
    for i, r in enumerate(results["per_p"]):
        p = r["p"]
        rows.append(_row("detection", "detected", int(r["detection"]["detected"]), "measured", p,
                         r["detection"]["detected"]))
        if upper:
            rows.append(_row("upper", "sup-mass", r["upper"], "measured", p))
            rows.append(_row("upper-envelope", "sup-mass", results["summary"]["upper_envelope"][i], "measured", p))
        rows.append(_row("witness", "min-ball-mass", min(r["witness"]["ball_masses"]), "measured", p,
                         min(r["witness"]["ball_masses"]) > r["witness"]["threshold"]))
        rows.append(_row("witness", "ball-threshold", r["witness"]["threshold"], "calibrated", p))
        rows.append(_row("lower", "packing-bound", r["lower"], "calibrated", p))
    s = results["summary"]
    for name in ("upper_fit", "lower_fit"):
        if name in s:
            rows.append(_row(name.replace("_", "-"), "slope", s[name]["slope"], "measured"))
            for p, v in zip([r["p"] for r in results["per_p"]], s[name]["weyl_ratios"]):
                rows.append(_row(name.replace("_fit", "-weyl"), "weyl-ratio", v, "measured", p))
    return rows


def _scan_assertions(cfg: dict, results: dict, upper: bool) -> list:
    tol = cfg["tolerances"]
    lo, hi = tol["slope"]
    per = results["per_p"]
    s = results["summary"]
    out = [{"name": "all-detected", "passed": all(r["detection"]["detected"] for r in per), "detail": ""},
           {"name": "witness-above-threshold",
            "passed": all(min(r["witness"]["ball_masses"]) > r["witness"]["threshold"] for r in per), "detail": ""}]
    if "lower_fit" in s:
        sl = s["lower_fit"]["slope"]
        wi = s["lower_fit"]["weyl_interval"]
        out.append({"name": "lower-slope", "passed": lo <= sl <= hi, "detail": f"{sl:.4f} in [{lo}, {hi}]"})
        out.append({"name": "lower-weyl-compact", "passed": wi[1] <= tol["weyl_spread"] * wi[0],
                    "detail": f"[{wi[0]:.4g}, {wi[1]:.4g}]"})
    if upper:
        sl = s["upper_fit"]["slope"]
        wi = s["upper_fit"]["weyl_interval"]
        out.append({"name": "upper-slope", "passed": lo <= sl <= hi, "detail": f"{sl:.4f} in [{lo}, {hi}]"})
        out.append({"name": "upper-weyl-compact", "passed": wi[1] <= tol["weyl_spread"] * wi[0],
                    "detail": f"[{wi[0]:.4g}, {wi[1]:.4g}]"})
        out.append({"name": "lower-below-upper",
                    "passed": all(r["lower"] <= r["upper"] * (1 + tol["relative"]) for r in per), "detail": ""})
    return out


def _scan_plot(results: dict, upper: bool) -> list:
    rows = []
    s = results["summary"]
    for r in results["per_p"]:
        lp = math.log(r["p"])
        rows.append(("lower", lp, math.log(r["lower"])))
        if upper:
            rows.append(("upper", lp, math.log(r["upper"])))
    for name in ("upper_fit", "lower_fit"):
        if name in s:
            for r in results["per_p"]:
                lp = math.log(r["p"])
                rows.append((name, lp, s[name]["intercept"] + s[name]["slope"] * lp))
    return rows


def run_scan(cfg: dict, jobs: int, upper: bool) -> dict:
    f = build_field(cfg)
    cx = f.complex
    w = am.calibrate_threshold(f)["threshold"]
    alpha = _alpha(cfg, cx, w)
    per_p = _map(_width_step, [(cfg, p, w, alpha["alpha"], upper) for p in sorted(cfg["p"])], jobs)
    res = {"model": cx.name, "threshold": w, "alpha": jsonable(alpha), "per_p": per_p}
    res["summary"] = _scan_summary(cfg, per_p, upper)
    return res


# ---------------------------------------------------------------------------
# s3-targets


def _s3_lines(cfg):
    s = cfg["samples"]
    return s["lines"], s["crofton_samples"]


def run_s3(cfg: dict, jobs: int) -> dict:
    s = cfg["samples"]
    lines, cs = _s3_lines(cfg)
    seed = derive_seed(cfg["seed"], "lines")
    rng = np.random.default_rng(derive_seed(cfg["seed"], "members"))
    coord = sw.eigenfunction_family(sw.harmonic_basis()[1:5], lines, seed, cs, require_constant=False)
    members = np.vstack([np.eye(4), wd._unit_rows(rng, s["members"], 4)])
    cm, cmax = coord.masses_and_max(members)
    clif = sw.eigenfunction_family([sw.harmonic_basis()[5]], lines, seed, cs, require_constant=False)
    clm, clmax = clif.masses_and_max([[1.0]])
    sweep = sw.eigenfunction_family(lines=s["sweep_lines"], seed=derive_seed(cfg["seed"], "sweep-lines"),
                                    samples=cs // 2)
    A = wd._unit_rows(np.random.default_rng(derive_seed(cfg["seed"], "params")), s["params"], 14)
    sm, smax = sweep.masses_and_max(A, chunk=16)
    i = int(np.argmax(sm))
    j = int(np.argmax(smax))
    return jsonable({
        "coordinate": {"lines": lines, "seed": seed, "samples": cs, "members": members, "masses": cm,
                       "max_crossings": cmax, "target": 4 * math.pi},
        "clifford": {"lines": lines, "seed": seed, "samples": cs, "mass": float(clm[0]),
                     "max_crossings": int(clmax[0]), "target": 2 * math.pi**2},
        "harmonic14": {"lines": s["sweep_lines"], "seed": sweep.seed, "samples": sweep.samples,
                       "params": s["params"], "max_mass": float(sm[i]), "argmax": A[i],
                       "max_crossings": int(smax[j]), "argmax_crossings": A[j],
                       "crossing_bound": sweep.crossing_bound, "mass_bound": 8 * math.pi,
                       "violations": int(np.sum(smax > 4))},
    })


def _s3_rows(cfg: dict, res: dict) -> list:
    tol = cfg["tolerances"]["relative"]
    c, cl, h = res["coordinate"], res["clifford"], res["harmonic14"]
    err = max(abs(m / c["target"] - 1) for m in c["masses"])
    rows = [_row("4pi", "target", c["target"], "structural-bound"),
            _row("4pi", "max-rel-error", err, "measured", ok=err <= tol)]
    rows += [_row("4pi", f"mass[{k}]", m, "measured", ok=abs(m / c["target"] - 1) <= tol)
             for k, m in enumerate(c["masses"])]
    rows += [_row("8pi", "target", h["mass_bound"], "structural-bound"),
             _row("8pi", "max-mass", h["max_mass"], "measured", ok=h["max_mass"] <= h["mass_bound"] * (1 + tol)),
             _row("8pi", "max-crossings", h["max_crossings"], "structural-bound", ok=h["max_crossings"] <= 4),
             _row("8pi", "violations", h["violations"], "structural-bound", ok=h["violations"] == 0)]
    e = abs(cl["mass"] / cl["target"] - 1)
    rows += [_row("2pi^2", "target", cl["target"], "structural-bound"),
             _row("2pi^2", "mass", cl["mass"], "measured", ok=e <= tol)]
    return rows


def _s3_assertions(cfg: dict, res: dict) -> list:
    tol = cfg["tolerances"]["relative"]
    c, cl, h = res["coordinate"], res["clifford"], res["harmonic14"]
    err = max(abs(m / c["target"] - 1) for m in c["masses"])
    return [
        {"name": "great-sphere-4pi", "passed": err <= tol, "detail": f"max relative error {err:.3g}"},
        {"name": "harmonic-crossings-le-4", "passed": h["max_crossings"] <= 4 and h["violations"] == 0,
         "detail": f"max {h['max_crossings']}"},
        {"name": "harmonic-mass-le-8pi", "passed": h["max_mass"] <= h["mass_bound"] * (1 + tol),
         "detail": f"max {h['max_mass']:.5g}"},
        {"name": "clifford-2pi2", "passed": abs(cl["mass"] / cl["target"] - 1) <= tol,
         "detail": f"{cl['mass']:.5g}"},
    ]


def _s3_plot(res: dict) -> list:
    c = res["coordinate"]
    rows = [("coordinate", k, m) for k, m in enumerate(c["masses"])]
    rows.append(("clifford", 0, res["clifford"]["mass"]))
    rows.append(("harmonic14-max", 0, res["harmonic14"]["max_mass"]))
    return rows


# ---------------------------------------------------------------------------
# detection-suite


_LOOP_KINDS = ("level", "rotated", "constant", "neighborhood")


def _loop_path(lin, kind: str):
    if kind == "level":
        return lin.generator
    if kind == "rotated":
        return lambda s: lin.generator(np.asarray(s) + 0.37)
    if kind == "constant":
        return lambda s: np.full((len(np.atleast_1d(s)), 1), 2.0)
    return lambda s: 2.0 + 0.3 * np.sin(2 * np.pi * np.atleast_1d(s))[:, None]


def _loop_models(cfg: dict) -> list:
    g = cfg["model"].get("g", 27)
    return [{"kind": "torus", "n": 1, "g": g}, {"kind": "torus", "n": 1, "g": 3 * g},
            {"kind": "sphere", "d": 2, "g": 8}, {"kind": "sphere", "d": 2, "g": 24}]


def _loop_step(cfg: dict, model: dict) -> dict:
    cx = build_model(model)
    f = md.morse_direction(cx, cfg["family"]["field_seed"])
    w = am.calibrate_threshold(f)["threshold"]
    lin = sw.linear_sweepout(f)
    out = {"model": model, "name": cx.name, "threshold": w, "classes": {}}
    for kind in _LOOP_KINDS:
        out["classes"][kind] = am.path_class(lin, _loop_path(lin, kind), w)[0]
    return jsonable(out)


def _guth_step(cfg: dict, p: int) -> dict:
    f = build_field(cfg)
    w = am.calibrate_threshold(f)["threshold"]
    rep = am.is_p_sweepout(build_family(f, cfg["family"]["kind"], p), None, p, w, full_limit=max(4, p))
    return jsonable({"p": p, "report": rep.to_json()})


def _restriction_targets(f, kind: str) -> list:
    if kind == "median-level":
        return [md.level_cycle(f, md.volume_quantile(f, 0.5))]
    return [f.complex.empty(f.complex.n)]


def _restriction_step(cfg: dict, p: int, target: str) -> dict:
    f = build_field(cfg)
    w = am.calibrate_threshold(f)["threshold"]
    fam = build_family(f, cfg["family"]["kind"], p + 1)
    X = fam.domain(1)
    T = _restriction_targets(f, target)
    params = fam.to_param(X.vertex_coords)
    dist = np.array([am.flat_distance_to_set(fam.cycle(a), T) for a in params])
    u = np.unique(dist)
    # smallest exclusion that removes a vertex, kept strictly between distance levels
    eps = float(0.5 * (u[1] + u[2])) if len(u) > 2 else float(u[-1])
    r = am.restrict_and_detect(fam, X, T, eps, p, w)
    lam, _, _ = am.pulled_back_class(fam, X, w)
    keys = ("eps", "p", "Y_cells", "X_cells", "detected", "proper", "Z_loop_classes",
            "hypothesis_Z_trivial", "detects_p_plus_1", "implication_holds", "distances", "threshold")
    out = {k: r[k] for k in keys}
    out["target"] = target
    out["cocycle"] = np.flatnonzero(lam.cochain).tolist()
    return jsonable(out)


def _cup_ring() -> dict:
    out = {"rp": [], "torus": None}
    for p in (1, 2, 3, 4):
        X, _ = pt.build_rp(p, 1)
        lam = pt.cohomology_classes(X, 1)[0]
        levels = _cup_levels(X, lam.cochain, p + 1)
        out["rp"].append({"p": p, "cocycle": np.flatnonzero(lam.cochain).tolist(), "levels": levels})
    T = pt.torus2(1)
    a, b = pt.cohomology_classes(T, 1)
    prod = pt.cup(a, b)
    out["torus"] = {"a": np.flatnonzero(a.cochain).tolist(), "b": np.flatnonzero(b.cochain).tolist(),
                    "product_nonzero": not prod.is_zero(), "top_betti": pt.betti(T)[2]}
    return jsonable(out)


def _cup_levels(X, cochain, top: int) -> dict:
    lam = pt.CohomologyClass(X, 1, np.asarray(cochain, dtype=np.uint8))
    tri = X.triangulation
    power, out = lam, {}
    for q in range(1, top + 1):
        if q > 1:
            power = pt.cup(lam, power, tri)
        out[q] = not power.is_zero()
    return out


def run_detection(cfg: dict, jobs: int) -> dict:
    loops = _map(_loop_step, [(cfg, m) for m in _loop_models(cfg)], jobs)
    guth = _map(_guth_step, [(cfg, p) for p in sorted(cfg["p"])], jobs)
    rargs = [(cfg, p, t) for p in sorted(cfg["restriction_p"]) for t in ("median-level", "empty")]
    restr = _map(_restriction_step, rargs, jobs)
    return jsonable({"loops": loops, "guth": guth, "restriction": restr, "cup_ring": _cup_ring()})


_EXPECTED = {"level": 1, "rotated": 1, "constant": 0, "neighborhood": 0}


def _det_rows(res: dict) -> list:
    rows = []
    for L in res["loops"]:
        for kind in _LOOP_KINDS:
            c = L["classes"][kind]
            rows.append(_row(f"loop:{L['name']}:{kind}", "class", c, "measured", ok=c == _EXPECTED[kind]))
    for G in res["guth"]:
        r = G["report"]
        for q, v in sorted(r["levels"].items(), key=lambda t: int(t[0])):
            rows.append(_row("guth", f"lambda^{q}!=0", int(v), "measured", G["p"]))
    for R in res["restriction"]:
        rows.append(_row(f"restriction:{R['target']}", "eps", R["eps"], "calibrated", R["p"]))
        rows.append(_row(f"restriction:{R['target']}", "detected", int(R["detected"]), "measured", R["p"],
                         R["implication_holds"]))
    for r in res["cup_ring"]["rp"]:
        for q, v in sorted(r["levels"].items(), key=lambda t: int(t[0])):
            rows.append(_row("rp-ring", f"lambda^{q}!=0", int(v), "structural-bound", r["p"],
                             bool(v) == (int(q) <= r["p"])))
    t = res["cup_ring"]["torus"]
    rows.append(_row("torus-ring", "a.b!=0", int(t["product_nonzero"]), "structural-bound",
                     ok=t["product_nonzero"]))
    return rows


def _det_assertions(res: dict) -> list:
    loops_ok = all(c == _EXPECTED[k] for L in res["loops"] for k, c in L["classes"].items())
    guth_ok = all(G["report"]["detected"] for G in res["guth"])
    ring_ok = all(bool(v) == (int(q) <= r["p"]) for r in res["cup_ring"]["rp"] for q, v in r["levels"].items())
    ring_ok = ring_ok and res["cup_ring"]["torus"]["product_nonzero"]
    impl = all(R["implication_holds"] for R in res["restriction"])
    nontrivial = {R["p"] for R in res["restriction"]
                  if R["proper"] and R["hypothesis_Z_trivial"] and R["detects_p_plus_1"]}
    want = {R["p"] for R in res["restriction"]}
    return [
        {"name": "loop-classes", "passed": loops_ok, "detail": ""},
        {"name": "guth-detected", "passed": guth_ok, "detail": ""},
        {"name": "cup-ring", "passed": ring_ok, "detail": ""},
        {"name": "restriction-implication", "passed": impl, "detail": ""},
        {"name": "restriction-nontrivial", "passed": nontrivial == want,
         "detail": f"nontrivial instances for p in {sorted(nontrivial)}"},
    ]


def _det_plot(res: dict) -> list:
    rows = []
    for G in res["guth"]:
        for q, v in sorted(G["report"]["levels"].items(), key=lambda t: int(t[0])):
            rows.append((f"guth-p{G['p']}", int(q), int(v)))
    return rows


# ---------------------------------------------------------------------------
# flatnorm-oracle


def small_complex(desc: dict) -> ch.AmbientComplex:
    kind = desc["kind"]
    if kind == "octahedron":
        cx = md.build_octahedron()
    elif kind == "icosahedron":
        cx = md.build_icosahedron()
    else:
        cx = md.build_torus(1, desc["g"])
    if desc.get("weight_seed") is not None:
        rng = np.random.default_rng(desc["weight_seed"])
        cx = ch.reweighted(cx, {d: rng.uniform(0.5, 2.0, cx.n_cells(d)) for d in (cx.n, cx.dim)})
    return cx


_SMALL = ({"kind": "octahedron"}, {"kind": "icosahedron"}, {"kind": "torus", "g": 3}, {"kind": "torus", "g": 4})


def equator(cx: ch.AmbientComplex) -> ch.Mod2Chain:
    z = np.asarray(cx.centers[1])[:, 2]
    return cx.chain(1, np.flatnonzero(np.abs(z) < 1e-12))


def _filling_cost(t: ch.Mod2Chain, A_cells) -> float:
    cx = t.complex
    A = cx.chain(cx.dim, A_cells)
    return ch.mass(A) + ch.mass(ch.add(t, ch.boundary(A)))


def run_flatnorm(cfg: dict, jobs: int) -> dict:
    rng = np.random.default_rng(derive_seed(cfg["seed"], "flatnorm"))
    cases = []
    octa = md.build_octahedron()
    eq = equator(octa)
    fn = ch.flat_norm(eq)
    cases.append({"complex": {"kind": "octahedron", "weight_seed": None}, "cycle": eq.cells.tolist(),
                  "filling": fn.chain.cells.tolist(), "mincut": fn.cost,
                  "exhaustive": ch.flat_norm_exhaustive(eq).cost, "expected": 2 * math.sqrt(3)})
    for i in range(cfg["samples"]["cycles"]):
        desc = dict(_SMALL[i % len(_SMALL)])
        desc["weight_seed"] = None if i % 2 == 0 else derive_seed(cfg["seed"], "weights", i)
        cx = small_complex(desc)
        A = rng.random(cx.n_cells(cx.dim)) < rng.uniform(0.1, 0.6)
        t = ch.boundary(ch.Mod2Chain.from_mask(cx, cx.dim, A))
        fn = ch.flat_norm(t)
        cases.append({"complex": desc, "cycle": t.cells.tolist(), "filling": fn.chain.cells.tolist(),
                      "mincut": fn.cost, "exhaustive": ch.flat_norm_exhaustive(t).cost, "expected": None})
    for c in cases:
        c["equal"] = _close(c["mincut"], c["exhaustive"])
    return jsonable({"cases": cases})


def _fn_rows(res: dict) -> list:
    rows = []
    for i, c in enumerate(res["cases"]):
        rows.append(_row(f"case{i}:{c['complex']['kind']}", "mincut", c["mincut"], "measured", ok=c["equal"]))
        rows.append(_row(f"case{i}:{c['complex']['kind']}", "exhaustive", c["exhaustive"], "measured",
                         ok=c["equal"]))
    return rows


def _fn_assertions(res: dict) -> list:
    c0 = res["cases"][0]
    bad = [i for i, c in enumerate(res["cases"]) if not c["equal"]]
    return [{"name": "mincut-equals-exhaustive", "passed": not bad, "detail": f"mismatches {bad}"},
            {"name": "octahedron-equator", "passed": _close(c0["mincut"], c0["expected"]),
             "detail": f"{c0['mincut']:.12g}"}]


def _fn_plot(res: dict) -> list:
    return [("mincut-vs-exhaustive", c["exhaustive"], c["mincut"]) for c in res["cases"]]


# ---------------------------------------------------------------------------
# driver


def _derive(cfg: dict, res: dict):
    sc = cfg["scenario"]
    if sc in ("width-scan", "packing-bound"):
        up = sc == "width-scan"
        return _scan_rows(res, up), _scan_assertions(cfg, res, up), _scan_plot(res, up)
    if sc == "s3-targets":
        return _s3_rows(cfg, res), _s3_assertions(cfg, res), _s3_plot(res)
    if sc == "detection-suite":
        return _det_rows(res), _det_assertions(res), _det_plot(res)
    return _fn_rows(res), _fn_assertions(res), _fn_plot(res)


def execute(cfg: dict, jobs: int = 1) -> dict:
    """Run a validated config and return the report (nothing written)."""
    sc = cfg["scenario"]
    if sc == "width-scan":
        res = run_scan(cfg, jobs, True)
    elif sc == "packing-bound":
        res = run_scan(cfg, jobs, False)
    elif sc == "s3-targets":
        res = run_s3(cfg, jobs)
    elif sc == "detection-suite":
        res = run_detection(cfg, jobs)
    else:
        res = run_flatnorm(cfg, jobs)
    res = jsonable(res)
    rows, asserts, plot = _derive(cfg, res)
    stored = {k: v for k, v in cfg.items() if k != "outputs"}
    stored["outputs"] = {"prefix": cfg["outputs"]["prefix"]}
    return jsonable({"format": REPORT_FORMAT, "version": __version__, "scenario": sc, "config": stored,
                     "results": res, "rows": rows, "assertions": asserts, "plot": plot,
                     "passed": all(a["passed"] for a in asserts)})


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=1) + "\n"


def _cell(v):
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else v


def _csv(rows: list, header: list) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([_cell(r[h]) for h in header])
    return buf.getvalue()


def write_outputs(report: dict, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pre = report["config"]["outputs"]["prefix"]
    paths = {"report": out / f"{pre}.json", "table": out / f"{pre}.csv", "plot": out / f"{pre}_plot.csv"}
    paths["report"].write_text(dumps(report))
    paths["table"].write_text(_csv(report["rows"], ["key", "p", "quantity", "value", "provenance", "pass"]))
    paths["plot"].write_text(_plot_csv(report["plot"]))
    return paths


def _plot_csv(rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["series", "x", "y", "provenance"])
    for s, x, y in rows:
        prov = "measured" if not str(s).endswith("_fit") else "calibrated"
        wr.writerow([s, repr(float(x)), repr(float(y)), prov])
    return buf.getvalue()


def run(config, out_dir=None, seed_override: int | None = None, jobs: int = 1) -> tuple[int, dict]:
    """Validate, execute and write outputs.  Returns (exit code, report)."""
    cfg = validate_config(config) if isinstance(config, dict) else load_config(config)
    if seed_override is not None:
        cfg["seed"] = int(seed_override)
    report = execute(cfg, jobs)
    write_outputs(report, out_dir if out_dir is not None else cfg["outputs"]["dir"])
    failed = [a["name"] for a in report["assertions"] if not a["passed"]]
    for name in failed:
        log.error("assertion failed: %s", name)
    code = 0 if (not failed or not cfg["assertions"]) else 1
    return code, report


# ---------------------------------------------------------------------------
# verification


class _Checker:
    def __init__(self):
        self.problems: list[str] = []

    def num(self, where: str, stored, value, rel=REL):
        value = float(value)
        if not isinstance(stored, (int, float)) or not _close(float(stored), value, rel):
            self.problems.append(f"{where}: stored {stored!r} != recomputed {value!r}")

    def same(self, where: str, stored, value):
        if jsonable(stored) != jsonable(value):
            self.problems.append(f"{where}: stored {stored!r} != recomputed {value!r}")

    def true(self, where: str, cond: bool, msg: str):
        if not cond:
            self.problems.append(f"{where}: {msg}")


def _verify_scan(rep: dict, chk: _Checker, upper: bool):
    cfg = rep["config"]
    res = rep["results"]
    f = build_field(cfg)
    al = res["alpha"]
    chk.num("results.alpha.alpha", al["alpha"], min(al["alphas"]))
    n = f.complex.n
    for i, r in enumerate(res["per_p"]):
        base = f"results.per_p[{i}]"
        p = r["p"]
        fam = build_family(f, cfg["family"]["kind"], p)
        wit = r["witness"]
        chk.num(f"{base}.witness.alpha", wit["alpha"], al["alpha"])
        chk.num(f"{base}.witness.threshold", wit["threshold"], wit["alpha"] / 3 * wit["radius"] ** n)
        chk.num(f"{base}.witness.bound", wit["bound"], p * wit["alpha"] / 6 * wit["radius"] ** n)
        chk.num(f"{base}.lower", r["lower"], wit["bound"])
        pk = md.BallPacking(np.asarray(wit["centers"], dtype=float), wit["radius"], 0.0, f.complex.metric)
        chk.true(f"{base}.witness.centers", md.verify_packing(f.complex, pk), "balls overlap")
        use_roots = wit["roots"] is not None
        x = np.asarray(wit["roots"] if use_roots else wit["params"], dtype=float)[None]
        if use_roots:
            chk.num(f"{base}.witness.params", 0.0,
                    float(np.abs(np.asarray(wit["params"]) - sw.roots_to_coeffs(x[0], p)).max()))
        bm = wd.ball_masses(fam, x, pk, roots=use_roots)[0]
        for j, (s, v) in enumerate(zip(wit["ball_masses"], bm)):
            chk.num(f"{base}.witness.ball_masses[{j}]", s, v)
        chk.true(f"{base}.witness.ball_masses", len(wit["ball_masses"]) == p, "wrong number of balls")
        chk.num(f"{base}.witness.mass", wit["mass"], float(fam.masses(x, roots=use_roots)[0]))
        det = r["detection"]
        if det["method"] == "cup-power":
            X = fam.domain(1)
            lam = np.zeros(X.n_cells(1), dtype=np.uint8)
            lam[det["cocycle"]] = 1
            chk.true(f"{base}.detection.cocycle", pt.CohomologyClass(X, 1, lam).is_cocycle(), "not a cocycle")
            lv = _cup_levels(X, lam, p)
            chk.same(f"{base}.detection.detected", det["detected"], lv[p])
        if upper:
            d = r["upper_diagnostic"]
            if d["argmax_roots"] is not None:
                m = fam.masses(np.asarray(d["argmax_roots"])[None], roots=True)[0]
            else:
                m = fam.masses(np.asarray(d["argmax"])[None])[0]
            chk.num(f"{base}.upper", r["upper"], m)
    summary = _scan_summary(cfg, res["per_p"], upper)
    _compare_tree(chk, "results.summary", res["summary"], summary)


def _verify_s3(rep: dict, chk: _Checker):
    res = rep["results"]
    c = res["coordinate"]
    fam = sw.eigenfunction_family(sw.harmonic_basis()[1:5], c["lines"], c["seed"], c["samples"],
                                  require_constant=False)
    m, mx = fam.masses_and_max(c["members"])
    for k, (s, v) in enumerate(zip(c["masses"], m)):
        chk.num(f"results.coordinate.masses[{k}]", s, v)
    cl = res["clifford"]
    clf = sw.eigenfunction_family([sw.harmonic_basis()[5]], cl["lines"], cl["seed"], cl["samples"],
                                  require_constant=False)
    chk.num("results.clifford.mass", cl["mass"], clf.masses_and_max([[1.0]])[0][0])
    h = res["harmonic14"]
    hf = sw.eigenfunction_family(lines=h["lines"], seed=h["seed"], samples=h["samples"])
    hm, _ = hf.masses_and_max([h["argmax"]])
    chk.num("results.harmonic14.max_mass", h["max_mass"], hm[0])
    _, hc = hf.masses_and_max([h["argmax_crossings"]])
    chk.num("results.harmonic14.max_crossings", h["max_crossings"], hc[0])
    chk.num("results.harmonic14.crossing_bound", h["crossing_bound"], hf.crossing_bound)


def _verify_detection(rep: dict, chk: _Checker):
    cfg = rep["config"]
    res = rep["results"]
    for i, L in enumerate(res["loops"]):
        again = _loop_step(cfg, L["model"])
        for k in _LOOP_KINDS:
            chk.same(f"results.loops[{i}].classes.{k}", L["classes"].get(k), again["classes"][k])
    f = build_field(cfg)
    for i, G in enumerate(res["guth"]):
        r = G["report"]
        if r["method"] != "cup-power":
            continue
        X = pt.build_rp(G["p"], 1)[0]
        lam = np.zeros(X.n_cells(1), dtype=np.uint8)
        lam[r["cocycle"]] = 1
        chk.true(f"results.guth[{i}].report.cocycle", pt.CohomologyClass(X, 1, lam).is_cocycle(), "not a cocycle")
        lv = _cup_levels(X, lam, G["p"])
        for q, v in lv.items():
            chk.same(f"results.guth[{i}].report.levels.{q}", r["levels"].get(str(q)), v)
        chk.same(f"results.guth[{i}].report.detected", r["detected"], lv[G["p"]])
    for i, R in enumerate(res["restriction"]):
        base = f"results.restriction[{i}]"
        p = R["p"]
        X = pt.build_rp(p + 1, 1)[0]
        lamv = np.zeros(X.n_cells(1), dtype=np.uint8)
        lamv[R["cocycle"]] = 1
        lam = pt.CohomologyClass(X, 1, lamv)
        chk.true(f"{base}.cocycle", lam.is_cocycle(), "not a cocycle")
        Y = pt.subcomplex_where(X, np.asarray(R["distances"]) >= R["eps"])
        chk.same(f"{base}.Y_cells", R["Y_cells"], Y.counts)
        chk.same(f"{base}.proper", R["proper"], list(Y.counts) != list(X.counts))
        lamY = pt.restrict_class(lam, Y)
        power = lamY
        for _ in range(p - 1):
            power = pt.cup(lamY, power)
        chk.same(f"{base}.detected", R["detected"], (not power.is_zero()) if p <= Y.dim else False)
        Z = pt.closure_complement(X, Y)
        zv = []
        if Z.dim >= 1:
            lamZ = pt.restrict_class(lam, Z)
            zv = [pt.evaluate(lamZ, z) for z in pt.homology(Z, 1).vectors]
        chk.same(f"{base}.Z_loop_classes", R["Z_loop_classes"], zv)
        chk.same(f"{base}.detects_p_plus_1", R["detects_p_plus_1"], _cup_levels(X, lamv, p + 1)[p + 1])
        hyp = all(v == 0 for v in zv)
        chk.same(f"{base}.implication_holds", R["implication_holds"],
                 (not (hyp and R["detects_p_plus_1"])) or R["detected"])
    for i, r in enumerate(res["cup_ring"]["rp"]):
        X = pt.build_rp(r["p"], 1)[0]
        lam = np.zeros(X.n_cells(1), dtype=np.uint8)
        lam[r["cocycle"]] = 1
        lv = _cup_levels(X, lam, r["p"] + 1)
        for q, v in lv.items():
            chk.same(f"results.cup_ring.rp[{i}].levels.{q}", r["levels"].get(str(q)), v)
    t = res["cup_ring"]["torus"]
    T = pt.torus2(1)
    ca, cb = (np.zeros(T.n_cells(1), dtype=np.uint8) for _ in range(2))
    ca[t["a"]] = 1
    cb[t["b"]] = 1
    prod = pt.cup(pt.CohomologyClass(T, 1, ca), pt.CohomologyClass(T, 1, cb))
    chk.same("results.cup_ring.torus.product_nonzero", t["product_nonzero"], not prod.is_zero())


def _verify_flatnorm(rep: dict, chk: _Checker):
    for i, c in enumerate(rep["results"]["cases"]):
        cx = small_complex(c["complex"])
        t = cx.chain(cx.n, c["cycle"])
        chk.true(f"results.cases[{i}].cycle", ch.is_cycle(t), "not a cycle")
        chk.num(f"results.cases[{i}].mincut", c["mincut"], _filling_cost(t, c["filling"]))
        chk.num(f"results.cases[{i}].exhaustive", c["exhaustive"], ch.flat_norm_exhaustive(t).cost)
        chk.same(f"results.cases[{i}].equal", c["equal"], _close(c["mincut"], c["exhaustive"]))
        if c["expected"] is not None:
            chk.num(f"results.cases[{i}].expected", c["expected"], 2 * math.sqrt(3))


def _compare_tree(chk: _Checker, where: str, stored, fresh):
    if isinstance(fresh, dict):
        if not isinstance(stored, dict):
            chk.problems.append(f"{where}: expected an object")
            return
        for k in sorted(set(stored) | set(fresh)):
            if k not in stored or k not in fresh:
                chk.problems.append(f"{where}.{k}: missing or unexpected field")
            else:
                _compare_tree(chk, f"{where}.{k}", stored[k], fresh[k])
    elif isinstance(fresh, list):
        if not isinstance(stored, list) or len(stored) != len(fresh):
            chk.problems.append(f"{where}: length mismatch")
            return
        for k, (a, b) in enumerate(zip(stored, fresh)):
            _compare_tree(chk, f"{where}[{k}]", a, b)
    elif isinstance(fresh, float) and not isinstance(fresh, bool):
        chk.num(where, stored, fresh)
    else:
        chk.same(where, stored, fresh)


def verify_report(report: dict) -> tuple[bool, list[str]]:
    """Re-check a report from its witnesses.  Returns (ok, pinpointed problems)."""
    for k in ("format", "scenario", "config", "results", "rows", "assertions", "passed"):
        if k not in report:
            raise ReportError(f"corrupt report: missing field {k!r}")
    if report["format"] != REPORT_FORMAT:
        raise ReportError(f"corrupt report: unknown format {report['format']!r}")
    try:
        cfg = validate_config(report["config"])
    except ConfigError as exc:
        raise ReportError(f"corrupt report: {exc}") from None
    chk = _Checker()
    sc = report["scenario"]
    chk.same("scenario", sc, cfg["scenario"])
    try:
        if sc in ("width-scan", "packing-bound"):
            _verify_scan(report, chk, sc == "width-scan")
        elif sc == "s3-targets":
            _verify_s3(report, chk)
        elif sc == "detection-suite":
            _verify_detection(report, chk)
        else:
            _verify_flatnorm(report, chk)
        rows, asserts, plot = _derive(cfg, report["results"])
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ReportError(f"corrupt report: {type(exc).__name__}: {exc}") from None
    _compare_tree(chk, "rows", report["rows"], jsonable(rows))
    _compare_tree(chk, "assertions", report["assertions"], jsonable(asserts))
    _compare_tree(chk, "plot", report.get("plot"), jsonable(plot))
    for i, r in enumerate(report["rows"]):
        chk.true(f"rows[{i}].provenance", r.get("provenance") in PROVENANCE, "unknown provenance")
    chk.same("passed", report["passed"], all(a["passed"] for a in asserts))
    return not chk.problems, chk.problems


def verify(path) -> tuple[bool, list[str]]:
    try:
        report = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ReportError(f"corrupt report {path}: {exc}") from None
    if not isinstance(report, dict):
        raise ReportError("corrupt report: top level is not an object")
    return verify_report(report)


# ---------------------------------------------------------------------------
# entry point


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="minmax-lab", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run a scenario from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--seed-override", type=int, default=None)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out-dir", default=None)
    v = sub.add_parser("verify", help="re-check a report from its witnesses")
    v.add_argument("report")
    sub.add_parser("schema", help="print the config JSON schema")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    if args.cmd == "schema":
        print(json.dumps(CONFIG_SCHEMA, indent=1, sort_keys=True))
        return 0
    if args.cmd == "run":
        if args.jobs < 1:
            print("error: --jobs must be at least 1", file=sys.stderr)
            return 2
        try:
            code, report = run(args.config, args.out_dir, args.seed_override, args.jobs)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        for a in report["assertions"]:
            print(f"{'PASS' if a['passed'] else 'FAIL'} {a['name']} {a['detail']}".rstrip())
        return code
    try:
        ok, problems = verify(args.report)
    except ReportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for p in problems:
        print(p)
    print("verified" if ok else "verification failed")
    return 0 if ok else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
