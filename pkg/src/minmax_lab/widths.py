"""Width estimates: sampled sup-mass upper estimates, ball-mass constants,
packing lower bounds, scaling fits and the monotonicity monitor."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import almgren as am
from .chains import ChainError
from .models import BallPacking, ModelError
from .sweepouts import SampledFamily, level_roots, roots_to_coeffs


class WidthError(ChainError):
    pass


class MonotonicityError(WidthError):
    pass


@dataclass
class WidthReport:
    p: int
    upper: float
    upper_diagnostic: dict
    lower: float | None = None
    packing: dict | None = None
    witness: dict | None = None
    alpha_hat: float | None = None
    model: str = ""
    family: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    detection: dict | None = None
    tolerance: float = 0.02

    def __post_init__(self):
        if self.lower is not None and self.lower > self.upper * (1 + self.tolerance):
            raise WidthError(f"lower bound {self.lower:.4g} exceeds upper estimate {self.upper:.4g}")

    def to_json(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# sup-mass upper estimates


def _unit_rows(rng, n, d):
    A = rng.standard_normal((n, d))
    return A / np.linalg.norm(A, axis=1, keepdims=True)


def structured_roots(fam: am.ChainFamily, rng, count: int) -> list:
    """Root sets placed inside the level intervals of the family.

    For bent families the intervals are the f-images of the central balls,
    where a level set produces a chord across a whole cell; for plain
    polynomial families there is one interval, the range of f.
    """
    ivs = fam.level_intervals
    p = fam.p
    out = []
    m = len(ivs)
    # evenly spread, round robin over the intervals
    for shift in range(min(m, count)):
        per = [0] * m
        for j in range(p):
            per[(j + shift) % m] += 1
        roots = []
        for (lo, hi), c in zip(ivs, per):
            if c:
                roots += list(lo + (hi - lo) * (np.arange(c) + 0.5) / c)
        out.append(roots)
    # all roots in one interval
    for lo, hi in ivs:
        if len(out) >= count:
            break
        out.append(list(lo + (hi - lo) * (np.arange(p) + 0.5) / p))
    # random interval assignments with uniform positions
    while len(out) < count:
        idx = rng.integers(0, m, p)
        out.append([ivs[i][0] + (ivs[i][1] - ivs[i][0]) * rng.random() for i in idx])
    return out


def _polish_roots(fam, roots, value, rounds, rng, grid: int = 12):
    """Coordinate ascent: move one root at a time to the best of a grid of
    positions spread over every level interval."""
    ivs = fam.level_intervals
    pos = np.concatenate([lo + (hi - lo) * (np.arange(grid) + 0.5) / grid for lo, hi in ivs])
    roots = np.array(roots, dtype=float)
    best = value
    for _ in range(rounds):
        improved = False
        for j in rng.permutation(len(roots)):
            trial = np.repeat(roots[None], len(pos), axis=0)
            trial[:, j] = pos + 1e-9 * rng.standard_normal(len(pos)) * (pos[-1] - pos[0])
            m = fam.masses(trial, roots=True)
            i = int(np.argmax(m))
            if m[i] > best:
                best, roots, improved = float(m[i]), trial[i], True
        if not improved:
            break
    return best, roots


def _polish_coeffs(fam, a, value, iters, rng, masses):
    best = value
    scale = 0.1
    for _ in range(iters):
        trial = a + scale * rng.standard_normal(len(a))
        trial /= np.linalg.norm(trial)
        v = float(masses(trial[None])[0])
        if v > best:
            best, a = v, trial
        else:
            scale = max(scale * 0.9, 1e-4)
    return best, a


def upper_estimate(fam, samples: int = 256, polish: int = 4, seed: int = 0, detection=None,
                   structured: int = 32, polish_iters: int = 200, polish_rounds: int = 3) -> tuple[float, dict]:
    """Max sampled mass plus local ascent from the top ``polish`` candidates.

    Parameters are drawn in a seeded prefix order, so the first ``samples``
    draws are a subset of the doubled run; the diagnostic is the relative
    change when the number of samples doubles.  This estimates the sup of
    this family (an upper bound for the width up to sampling error); it is
    never a certificate.
    """
    if isinstance(fam, SampledFamily):
        if fam.crossing_bound > 4:
            raise WidthError("no structural detection certificate for this family")
        masses = fam.masses
        provenance = "measured"
    else:
        if detection is None or not detection.get("detected", False):
            raise WidthError("family is not a detected p-sweepout; refusing to report a width bound")
        masses = fam.masses
        provenance = "measured"
    rng = np.random.default_rng(seed)
    A = _unit_rows(rng, 2 * samples, fam.param_dim)
    mA = masses(A)
    half = float(mA[:samples].max())
    full = float(mA.max())
    cands = [(float(m), a, None) for m, a in zip(mA, A)]
    if structured and getattr(fam, "level_intervals", None):
        R = np.array(structured_roots(fam, rng, structured))
        for m, r in zip(fam.masses(R, roots=True), R):
            cands.append((float(m), roots_to_coeffs(r, fam.p), r))
    cands.sort(key=lambda t: -t[0])
    sampled_max = cands[0][0]
    best, arg, arg_roots = cands[0][0], cands[0][1], cands[0][2]
    for m, a, r in cands[:polish]:
        rr = None
        if r is not None:
            v, rr = _polish_roots(fam, r, m, polish_rounds, rng)
            aa = roots_to_coeffs(rr, fam.p)
        else:
            v, aa = _polish_coeffs(fam, a, m, polish_iters, rng, masses)
        if v > best:
            best, arg, arg_roots = v, aa, rr
    diag = {"samples": samples, "max_at_samples": half, "max_at_double": full,
            "doubling_change": (full - half) / full if full > 0 else 0.0,
            "sampled_max": sampled_max, "polished": best, "argmax": np.asarray(arg).tolist(),
            "argmax_roots": None if arg_roots is None else np.asarray(arg_roots).tolist(),
            "provenance": provenance}
    return best, diag


# ---------------------------------------------------------------------------
# ball-mass constant from 1-sweepouts


def loop_ball_profile(fam: am.ChainFamily, center, radii, steps: int = 1024) -> np.ndarray:
    """sup over the loop of the mass restricted to B_r(center), per radius."""
    cx = fam.complex
    s = (np.arange(steps) + 0.5) / steps
    A = np.atleast_2d(fam.generator(s))
    Bm = np.concatenate([am.ball_facet_masks(cx, center, r) for r in radii], axis=1).astype(float)
    w = np.asarray(cx.weights[cx.n])
    out = np.zeros(len(radii))
    for i in range(0, len(A), 128):
        ind = fam.facet_indicator(A[i:i + 128]).astype(float) * w
        out = np.maximum(out, (ind @ Bm).max(axis=0))
    return out


def ball_mass_bound(fam: am.ChainFamily, center, radii, threshold: float, steps: int = 1024) -> dict:
    """Least-squares alpha in sup_theta M(Phi(theta) restricted to B_r) ~ alpha r^n."""
    if not am.is_sweepout(fam, threshold):
        raise WidthError("ball-mass bound needs a sweepout")
    n = fam.complex.n
    radii = np.asarray(radii, dtype=float)
    prof = loop_ball_profile(fam, center, radii, steps)
    x = radii**n
    alpha = float(prof @ x / (x @ x))
    resid = float(np.sqrt(np.mean((prof - alpha * x) ** 2)))
    if not alpha > 0:
        raise WidthError("fitted ball-mass constant is not positive")
    return {"alpha": alpha, "residual": resid, "radii": radii.tolist(), "profile": prof.tolist(),
            "center": np.asarray(center, dtype=float).tolist(), "provenance": "calibrated"}


def calibrate_alpha(fam: am.ChainFamily, centers, radii, threshold: float) -> dict:
    """alpha-hat as the minimum over several centers (stability recorded)."""
    fits = [ball_mass_bound(fam, c, radii, threshold) for c in centers]
    al = np.array([f["alpha"] for f in fits])
    return {"alpha": float(al.min()), "alphas": al.tolist(), "spread": float(al.max() / al.min() - 1),
            "fits": fits, "provenance": "calibrated"}


# ---------------------------------------------------------------------------
# packing lower bound


def ball_masses(fam: am.ChainFamily, A, packing: BallPacking, roots: bool = False) -> np.ndarray:
    """(B, p) masses of Phi(a) restricted to each packing ball."""
    cx = fam.complex
    Bm = am.ball_facet_masks(cx, packing.centers, packing.radius).astype(float)
    ind = fam.facet_indicator(A, roots).astype(float) * np.asarray(cx.weights[cx.n])
    return ind @ Bm


def _ball_points(packing: BallPacking, j: int, rng, rings=(0.0, 0.25, 0.5, 0.7), k: int = 12):
    c = packing.centers[j]
    D = len(c)
    pts = [c]
    for f in rings[1:]:
        for t in range(k):
            ang = 2 * np.pi * (t + rng.random()) / k
            if D == 2:
                d = np.array([np.cos(ang), np.sin(ang)])
            else:
                d = rng.standard_normal(D)
                d /= np.linalg.norm(d)
            pts.append(c + f * packing.radius * d)
    P = np.array(pts)
    return np.mod(P + 1e-7 * rng.standard_normal(P.shape), 1.0)


def _candidate_levels(fam, packing, j, rng):
    pts = _ball_points(packing, j, rng)
    keep = []
    for x in pts:
        try:
            keep.append(float(fam.field(fam.transport(x[None]))[0]))
        except ModelError:
            continue
    return np.array(keep)


def packing_lower_bound(fam: am.ChainFamily, packing: BallPacking, alpha: float, detection: dict | None = None,
                        rounds: int = 8, seed: int = 0) -> tuple[dict, float]:
    """Search a parameter with every ball mass above (alpha/3) r^n.

    Returns the witness and the bound p (alpha/6) r^n.  For field-based
    families the search places one root of P_a at a level whose (transported)
    level set crosses each ball; later rounds try the next-best levels for the
    balls that failed, then random perturbations.
    """
    if detection is None or not detection.get("detected", False):
        raise WidthError("packing bound needs a detected p-sweepout")
    p = fam.p
    if packing.count != p:
        raise WidthError("packing must have exactly p balls")
    n = fam.complex.n
    tau = alpha / 3 * packing.radius**n
    bound = p * alpha / 6 * packing.radius**n
    rng = np.random.default_rng(seed)
    tried = 0
    if fam.field is not None and fam.transport is not None:
        ranked = []
        for j in range(p):
            lv = _candidate_levels(fam, packing, j, rng)
            mj = ball_masses(fam, lv[:, None], packing, roots=True)[:, j]
            order = np.argsort(-mj)
            ranked.append(lv[order])
        choice = np.zeros(p, dtype=int)
        for rnd in range(rounds):
            roots = np.array([ranked[j][min(choice[j], len(ranked[j]) - 1)] for j in range(p)])
            if rnd >= rounds // 2:
                roots = roots + 1e-4 * rng.standard_normal(p) * (np.ptp(fam.field.center_values))
            bm = ball_masses(fam, roots[None], packing, roots=True)[0]
            tried += 1
            if np.all(bm > tau):
                return _witness(fam, roots_to_coeffs(roots, p), bm, tau, bound, packing, alpha, tried, roots), bound
            choice[bm <= tau] += 1
    A = _unit_rows(rng, 512, fam.param_dim)
    bm = ball_masses(fam, A, packing)
    i = int(np.argmax(bm.min(axis=1)))
    tried += len(A)
    if np.all(bm[i] > tau):
        return _witness(fam, A[i], bm[i], tau, bound, packing, alpha, tried, None), bound
    raise WidthError(f"no witness after {tried} candidates; best min ball mass {bm[i].min():.4g} <= {tau:.4g}")


def _witness(fam, a, bm, tau, bound, packing, alpha, tried, roots):
    return {"params": np.asarray(a).tolist(), "ball_masses": bm.tolist(), "threshold": tau,
            "bound": bound, "alpha": alpha, "radius": packing.radius, "centers": packing.centers.tolist(),
            "mass": float(fam.masses(np.asarray(roots if roots is not None else a)[None], roots=roots is not None)[0]),
            "candidates_tried": tried,
            "roots": None if roots is None else list(map(float, roots)), "provenance": "calibrated"}


# ---------------------------------------------------------------------------
# fits and monitors


def scaling_fit(ps, values, n: int = 1) -> dict:
    """Slope of log(value) against log(p) and the Weyl ratios value p^(-1/(n+1))."""
    ps = np.asarray(ps, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(np.unique(ps)) < 4:
        raise WidthError("scaling fit needs at least 4 distinct p")
    if np.any(values <= 0):
        raise WidthError("scaling fit needs positive values")
    fit = stats.linregress(np.log(ps), np.log(values))
    weyl = values * ps ** (-1 / (n + 1))
    return {"slope": float(fit.slope), "stderr": float(fit.stderr), "intercept": float(fit.intercept),
            "r2": float(fit.rvalue**2), "weyl_ratios": weyl.tolist(),
            "weyl_interval": [float(weyl.min()), float(weyl.max())]}


def monotonicity_and_equality(ps, values, tol: float = 0.02) -> dict:
    """Raise on a decrease beyond ``tol``; flag near-equal consecutive widths."""
    order = np.argsort(ps)
    ps = np.asarray(ps)[order]
    values = np.asarray(values, dtype=float)[order]
    flags = []
    for (p0, v0), (p1, v1) in zip(zip(ps, values), zip(ps[1:], values[1:])):
        if v1 < v0 * (1 - tol):
            raise MonotonicityError(f"estimate decreases from p={p0} ({v0:.5g}) to p={p1} ({v1:.5g})")
        if abs(v1 - v0) <= tol * max(abs(v0), abs(v1)):
            flags.append({"p": int(p0), "q": int(p1), "values": [float(v0), float(v1)], "event": "near-equality"})
    return {"monotone": True, "near_equalities": flags}


def monotone_envelope(ps, values) -> list:
    """upper_p = min over p' >= p of the estimates: a p'-sweepout is also a
    p-sweepout, so each minimum is still an upper estimate for level p."""
    order = np.argsort(ps)
    v = np.asarray(values, dtype=float)[order]
    env = np.minimum.accumulate(v[::-1])[::-1]
    out = np.empty_like(env)
    out[order] = env
    return out.tolist()
