"""Discrete maps into cycle space and the Almgren degree.

Families here are region families: every value is the boundary of a set of
top cells, and the set is carried along as a filling hint.  Two consecutive
values s, t have exactly two fillings of s + t (the symmetric difference of
their regions and its complement); the isoperimetric choice is the lighter
one.  Summing choices around a loop gives either nothing or the whole
manifold, which is the Almgren class of the loop.

Steps whose lighter filling is heavier than a working threshold are split
(the family is evaluated at the midpoint) until every step is small.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import param as pt
from .chains import (AmbientComplex, ChainError, EssentialCycleError, FillingTieError, Mod2Chain,
                     add, boundary, flat_norm, is_cycle, isoperimetric_choice, mass)
from .models import ScalarField, volume_quantile, level_cycle


class FinenessError(ChainError):
    """A discretization step is too coarse for a unique small filling."""


class DetectionError(ChainError):
    pass


# ---------------------------------------------------------------------------
# families


@dataclass
class ChainFamily:
    """A family of n-cycles a -> boundary(region(a)) on a mesh.

    ``regions`` maps a (B, P) parameter batch to a (B, n_top) bool array.
    ``to_param`` maps domain coordinates in [0,1]^m to parameters and
    ``generator`` is a closed parameter path s -> a(s), s in [0,1], whose
    class generates H^1 of the domain.
    """

    complex: AmbientComplex
    regions: Callable[[np.ndarray], np.ndarray]
    param_dim: int
    domain_kind: str
    p: int
    to_param: Callable[[np.ndarray], np.ndarray]
    generator: Callable[[np.ndarray], np.ndarray] | None = None
    kind: str = "family"
    descriptor: dict = field(default_factory=dict)
    backend: str = "mesh"
    field: ScalarField | None = None
    transport: Callable[[np.ndarray], np.ndarray] | None = None
    rule: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    level_intervals: list | None = None
    root_regions: Callable[[np.ndarray], np.ndarray] | None = None

    def region(self, a) -> np.ndarray:
        return self.regions(np.atleast_2d(np.asarray(a, dtype=float)))[0]

    def cycle(self, a) -> Mod2Chain:
        cx = self.complex
        R = Mod2Chain.from_mask(cx, cx.dim, self.region(a))
        return boundary(R)

    def facet_indicator(self, A, roots: bool = False) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if roots:
            if self.root_regions is None:
                raise ChainError("family has no root form")
            masks = self.root_regions(A)
        else:
            masks = self.regions(A)
        cf = self.complex.cofaces
        return masks[:, cf[:, 0]] != masks[:, cf[:, 1]]

    def masses(self, A, chunk: int = 256, roots: bool = False) -> np.ndarray:
        """Masses for a parameter batch; with ``roots`` the rows are root
        sets of P_a (a stable form when roots cluster)."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        w = np.asarray(self.complex.weights[self.complex.n])
        out = np.empty(len(A))
        for i in range(0, len(A), chunk):
            out[i:i + chunk] = self.facet_indicator(A[i:i + chunk], roots) @ w
        return out

    def domain(self, j: int = 1) -> pt.ParamComplex:
        if self.domain_kind == "rp":
            return pt.build_rp(self.p, j)[0]
        if self.domain_kind == "circle":
            return pt.circle(j)
        raise DetectionError(f"no parameter complex for domain {self.domain_kind!r}")

    def to_json(self) -> dict:
        return dict(self.descriptor, kind=self.kind, p=self.p, backend=self.backend,
                    model=self.complex.name, domain=self.domain_kind)


def restricted_family(fam: ChainFamily, X: pt.ParamComplex) -> ChainFamily:
    """The same rule, declared over a subcomplex of its domain."""
    out = ChainFamily(**{k: getattr(fam, k) for k in fam.__dataclass_fields__})
    out.domain_kind = "sub"
    out.descriptor = dict(fam.descriptor, restricted_to=X.name)
    return out


@dataclass
class DiscreteMap:
    """Cycle values on the vertices of a parameter complex."""

    X: pt.ParamComplex
    values: list
    complex: AmbientComplex

    def __post_init__(self):
        if len(self.values) != self.X.n_cells(0):
            raise ChainError("one value per parameter vertex required")
        for v in self.values:
            if v.complex is not self.complex:
                raise ChainError("values live on different complexes")


def _region_of(c: Mod2Chain) -> np.ndarray:
    from .chains import filling_of
    return filling_of(c).mask()


def fineness(phi: DiscreteMap) -> float:
    """max over adjacent vertices of mass(phi(x) + phi(y))."""
    B = phi.X.boundaries[1].tocsc() if phi.X.dim >= 1 else None
    if B is None or B.shape[1] == 0:
        return 0.0
    best = 0.0
    for e in range(B.shape[1]):
        ends = B.indices[B.indptr[e]:B.indptr[e + 1]]
        if len(ends) < 2:
            continue
        best = max(best, mass(add(phi.values[ends[0]], phi.values[ends[1]])))
    return best


def discretize(fam: ChainFamily, k: int, j: int = 1, flat_samples: int = 64, seed: int = 0):
    """Evaluate a mesh family on the vertices of X(k) and measure it.

    Returns the map and a report with its fineness, the largest flat distance
    between the family at an edge midpoint and the map at the nearest vertex
    (sampled) and the largest mass.
    """
    if fam.backend != "mesh":
        raise ChainError("discretize needs a mesh-backed family")
    X = pt.subdivide(fam.domain(j), k)
    coords = X.vertex_coords
    params = fam.to_param(coords)
    values = [fam.cycle(a) for a in params]
    phi = DiscreteMap(X, values, fam.complex)
    E = X.boundaries[1].tocsc()
    rng = np.random.default_rng(seed)
    edges = rng.permutation(E.shape[1])[:flat_samples]
    worst = 0.0
    for e in edges:
        v = X.verts[1][e]
        mk = X.masks[1][e]
        mid = (v + 0.5 * ((mk >> np.arange(X.m)) & 1)) / X.N
        near = E.indices[E.indptr[e]]
        worst = max(worst, flat_norm(add(fam.cycle(fam.to_param(mid[None])[0]), values[near])).cost)
    report = {"k": k, "fineness": fineness(phi), "max_flat_distance": worst,
              "max_mass": max(mass(v) for v in values), "vertices": X.n_cells(0)}
    return phi, report


# ---------------------------------------------------------------------------
# isoperimetric steps


@dataclass
class StepStats:
    steps: int = 0
    max_lighter: float = 0.0
    max_step_mass: float = 0.0

    def merge(self, other: "StepStats"):
        self.steps += other.steps
        self.max_lighter = max(self.max_lighter, other.max_lighter)
        self.max_step_mass = max(self.max_step_mass, other.max_step_mass)


def _lighter(cx: AmbientComplex, R0: np.ndarray, R1: np.ndarray, rtol: float = 1e-12):
    vol = np.asarray(cx.weights[cx.dim])
    D = R0 ^ R1
    m = float(vol[D].sum())
    total = cx.total_volume
    if abs(2 * m - total) <= rtol * total:
        raise FillingTieError("both fillings of a step have half the total volume")
    return (D, m) if 2 * m < total else (~D, total - m)


def _cut_mass(cx: AmbientComplex, R: np.ndarray) -> float:
    cf = cx.cofaces
    return float(np.asarray(cx.weights[cx.n])[R[cf[:, 0]] != R[cf[:, 1]]].sum())


def _vol(cx: AmbientComplex, D: np.ndarray) -> float:
    return float(np.asarray(cx.weights[cx.dim])[D].sum())


def path_choices(region_at: Callable[[float], np.ndarray], cx: AmbientComplex, s0: float, s1: float,
                 threshold: float, R0=None, R1=None, max_depth: int = 40, min_pieces: int = 4):
    """Sum of isoperimetric choices along the path s0 -> s1.

    Regions are followed continuously along the path, so the filling of a
    step that the path itself sweeps is the symmetric difference D of the
    endpoint regions.  A step is accepted once D and both half-step
    differences have volume at most ``threshold`` (< half the total); then D
    is the lighter filling, i.e. the isoperimetric choice.  Comparing with
    min(D, complement) alone would accept a step that sweeps almost
    everything in between.
    """
    if not threshold < 0.5 * cx.total_volume:
        raise FinenessError("threshold must be below half the total volume")
    R0 = region_at(s0) if R0 is None else R0
    R1 = region_at(s1) if R1 is None else R1
    total = np.zeros_like(R0)
    stats = StepStats()
    grid = np.linspace(s0, s1, min_pieces + 1)
    regs = [R0] + [region_at(s) for s in grid[1:-1]] + [R1]
    stack = [(grid[i], grid[i + 1], regs[i], regs[i + 1], 0) for i in range(min_pieces - 1, -1, -1)]
    while stack:
        a, b, Ra, Rb, depth = stack.pop()
        D = Ra ^ Rb
        vol = _vol(cx, D)
        ok = vol <= threshold
        if ok and vol > 0:
            mid = 0.5 * (a + b)
            Rm = region_at(mid)
            ok = _vol(cx, Ra ^ Rm) <= threshold and _vol(cx, Rm ^ Rb) <= threshold
        if not ok:
            if depth >= max_depth:
                raise FinenessError(f"step volume {vol:.4g} above threshold {threshold:.4g} at depth {depth}")
            mid = 0.5 * (a + b)
            Rm = region_at(mid)
            stack.append((mid, b, Rm, Rb, depth + 1))
            stack.append((a, mid, Ra, Rm, depth + 1))
            continue
        total ^= D
        stats.steps += 1
        stats.max_lighter = max(stats.max_lighter, vol)
        stats.max_step_mass = max(stats.max_step_mass, _cut_mass(cx, D))
    return total, stats


def _class_of_sum(total: np.ndarray) -> int:
    if not total.any():
        return 0
    if total.all():
        return 1
    raise FinenessError("sum of isoperimetric choices is not a cycle; refine the loop")


def loop_class(cycles: list, threshold: float | None = None) -> int:
    """Almgren class of a closed loop of cycles (last value adjacent to the first)."""
    if len(cycles) == 0:
        raise ChainError("empty loop")
    cx = cycles[0].complex
    fund = np.zeros(cx.n_cells(cx.dim), dtype=bool)
    for s, t in zip(cycles, cycles[1:] + cycles[:1]):
        A = isoperimetric_choice(s, t)
        if threshold is not None and mass(A) > threshold:
            raise FinenessError(f"isoperimetric choice of mass {mass(A):.4g} exceeds {threshold:.4g}")
        fund[A.cells] ^= True
    return _class_of_sum(fund)


def almgren_class(phi: DiscreteMap, threshold: float | None = None) -> int:
    """F^# of a discrete map over a subdivided circle."""
    X = phi.X
    if not (X.m == 1 and X.identify == "periodic"):
        raise ChainError("almgren_class needs a loop (subdivided circle) domain")
    return loop_class(list(phi.values), threshold)


def path_class(fam: ChainFamily, path: Callable[[np.ndarray], np.ndarray], threshold: float,
               n0: int = 16, max_depth: int = 40):
    """Almgren class of the closed parameter loop s -> path(s), s in [0, 1]."""
    cx = fam.complex
    region_at = lambda s: fam.region(np.atleast_2d(path(np.array([s])))[0])
    grid = np.linspace(0.0, 1.0, n0 + 1)
    regs = [region_at(s) for s in grid]
    total = np.zeros(cx.n_cells(cx.dim), dtype=bool)
    stats = StepStats()
    for i in range(n0):
        t, st = path_choices(region_at, cx, grid[i], grid[i + 1], threshold, regs[i], regs[i + 1], max_depth)
        total ^= t
        stats.merge(st)
    # closing step between two regions of the same cycle
    close, light = _lighter(cx, regs[-1], regs[0])
    if light > 0:
        raise FinenessError("path is not closed in cycle space")
    total ^= close
    return _class_of_sum(total), stats


# ---------------------------------------------------------------------------
# thresholds


def calibrate_threshold(f: ScalarField) -> dict:
    """Working step threshold: half the smallest flat gap among the empty
    cycle and the quartile level cycles of f, capped at a quarter volume."""
    cx = f.complex
    cyc = [cx.empty(cx.n)] + [level_cycle(f, volume_quantile(f, q)) for q in (0.25, 0.5, 0.75)]
    gaps = []
    for i in range(len(cyc)):
        for j in range(i + 1, len(cyc)):
            gaps.append(flat_norm(add(cyc[i], cyc[j])).cost)
    pos = [g for g in gaps if g > 0]
    w = min(0.5 * min(pos), 0.25 * cx.total_volume)
    return {"threshold": w, "min_gap": min(pos), "total_volume": cx.total_volume, "model": cx.name}


# ---------------------------------------------------------------------------
# detection


def edge_cochain(fam: ChainFamily, X: pt.ParamComplex, threshold: float, base_cell: int = 0,
                 pieces: int = 8, chunk: int = 512):
    """1-cochain eps(e) = [base cell lies in the sum of choices along e].

    Edges are followed as straight segments in domain coordinates.  Around
    any loop the sum of eps is the Almgren class of the loop.  Accepted
    choices telescope to R0 ^ R1, so edges are first certified in batches on
    a uniform grid of ``pieces`` steps (midpoints included); only edges that
    fail there are refined adaptively.
    """
    cx = fam.complex
    if not threshold < 0.5 * cx.total_volume:
        raise FinenessError("threshold must be below half the total volume")
    vol = np.asarray(cx.weights[cx.dim])
    wf = np.asarray(cx.weights[cx.n])
    cf = cx.cofaces
    eps = np.zeros(X.n_cells(1), dtype=np.uint8)
    stats = StepStats()
    V, M = X.verts[1], X.masks[1]
    start = V / X.N
    stop = (V + ((M[:, None] >> np.arange(X.m)) & 1)) / X.N
    s = np.linspace(0.0, 1.0, 2 * pieces + 1)
    for lo in range(0, len(V), chunk):
        x0, x1 = start[lo:lo + chunk], stop[lo:lo + chunk]
        pts = (1 - s)[None, :, None] * x0[:, None, :] + s[None, :, None] * x1[:, None, :]
        R = fam.regions(fam.to_param(pts.reshape(-1, X.m))).reshape(len(x0), len(s), -1)
        half = (R[:, 1:] ^ R[:, :-1]) @ vol
        D = R[:, 2::2] ^ R[:, :-2:2]
        whole = D @ vol
        ok = (half <= threshold).all(axis=1) & (whole <= threshold).all(axis=1)
        cut = (D[:, :, cf[:, 0]] ^ D[:, :, cf[:, 1]]) @ wf
        for i in np.flatnonzero(ok):
            eps[lo + i] = int(R[i, 0, base_cell] ^ R[i, -1, base_cell])
            stats.steps += pieces
            stats.max_lighter = max(stats.max_lighter, float(whole[i].max()))
            stats.max_step_mass = max(stats.max_step_mass, float(cut[i].max()))
        for i in np.flatnonzero(~ok):
            a0, a1 = x0[i], x1[i]
            region_at = lambda t, a0=a0, a1=a1: fam.region(fam.to_param(((1 - t) * a0 + t * a1)[None])[0])
            tot, st = path_choices(region_at, cx, 0.0, 1.0, threshold, R[i, 0], R[i, -1])
            eps[lo + i] = int(tot[base_cell])
            stats.merge(st)
    return eps, stats


@dataclass
class DetectionReport:
    p: int
    detected: bool
    evaluations: list
    fineness: float
    threshold: float
    method: str
    levels: dict = field(default_factory=dict)
    steps: int = 0
    cocycle: list | None = None

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def pulled_back_class(fam: ChainFamily, X: pt.ParamComplex, threshold: float):
    """lambda = Phi^*(generator) on X as a cellular cocycle plus loop evaluations."""
    eps, stats = edge_cochain(fam, X, threshold)
    lam = pt.CohomologyClass(X, 1, eps)
    if not lam.is_cocycle():
        raise FinenessError("edge classes are not a cocycle; refine the parameter grid")
    H1 = pt.homology(X, 1)
    evals = [pt.evaluate(lam, z) for z in H1.vectors]
    return lam, evals, stats


def is_sweepout(fam: ChainFamily, threshold: float) -> bool:
    if fam.generator is None:
        raise DetectionError("family has no loop to test")
    cls, _ = path_class(fam, fam.generator, threshold)
    return cls == 1


def is_p_sweepout(fam: ChainFamily, X: pt.ParamComplex | None, p: int, threshold: float,
                  full_limit: int = 4) -> DetectionReport:
    """Test lambda^p != 0 for lambda = Phi^*(generator).

    With a parameter complex X (or a projective family with p <= full_limit)
    lambda is computed on every edge and the cup power is evaluated.  For
    larger projective families the report certifies detection from the
    generator loop alone: lambda(gamma) = 1 forces lambda to be the
    generator of H^1(RP^q), whose powers are nonzero up to q.
    """
    if fam.backend != "mesh":
        raise DetectionError("detection needs a mesh-backed family")
    if X is None and fam.domain_kind == "rp" and fam.p > full_limit:
        cls, st = path_class(fam, fam.generator, threshold)
        ok = cls == 1 and p <= fam.p
        return DetectionReport(p, ok, [cls], st.max_step_mass, threshold, "generator-certificate",
                               {q: (cls == 1) for q in range(1, fam.p + 1)}, st.steps)
    if X is None:
        X = fam.domain(1)
    lam, evals, st = pulled_back_class(fam, X, threshold)
    levels, power = {}, lam
    tri = X.triangulation
    for q in range(1, max(p, 1) + 1):
        if q > 1:
            power = pt.cup(lam, power, tri)
        levels[q] = not power.is_zero()
    return DetectionReport(p, levels.get(p, False), evals, st.max_step_mass, threshold, "cup-power",
                           levels, st.steps, np.flatnonzero(lam.cochain).tolist())


# ---------------------------------------------------------------------------
# relative class in a ball


def relative_filling(t_facets: np.ndarray, ball: np.ndarray, cx: AmbientComplex) -> np.ndarray:
    """Top cells Q inside ``ball`` whose boundary on interior facets of the
    ball is ``t_facets`` (bool over facets); the lighter of Q and ball - Q."""
    cf = cx.cofaces
    interior = ball[cf[:, 0]] & ball[cf[:, 1]]
    cells = np.flatnonzero(ball)
    pos = -np.ones(cx.n_cells(cx.dim), dtype=np.int64)
    pos[cells] = np.arange(len(cells))
    adj = [[] for _ in cells]
    for f in np.flatnonzero(interior):
        a, b = pos[cf[f, 0]], pos[cf[f, 1]]
        adj[a].append((b, bool(t_facets[f])))
        adj[b].append((a, bool(t_facets[f])))
    x = -np.ones(len(cells), dtype=np.int64)
    for root in range(len(cells)):
        if x[root] >= 0:
            continue
        x[root] = 0
        stack = [root]
        while stack:
            u = stack.pop()
            for v, flip in adj[u]:
                want = x[u] ^ int(flip)
                if x[v] < 0:
                    x[v] = want
                    stack.append(v)
                elif x[v] != want:
                    raise EssentialCycleError("relative cycle does not bound in the ball")
    Q = np.zeros(cx.n_cells(cx.dim), dtype=bool)
    Q[cells[x == 1]] = True
    vol = np.asarray(cx.weights[cx.dim])
    m, bv = float(vol[Q].sum()), float(vol[ball].sum())
    if abs(2 * m - bv) <= 1e-12 * bv:
        raise FillingTieError("relative fillings tie at half the ball volume")
    return Q if 2 * m < bv else (ball & ~Q)


def relative_almgren_class(regions: list, ball: np.ndarray, cx: AmbientComplex,
                           threshold: float | None = None) -> int:
    """Class of a loop of relative cycles in a ball: 1 iff the summed relative
    fillings equal the whole ball.  ``regions`` are the top-cell regions of the
    loop values (only their boundaries inside the ball matter)."""
    cf = cx.cofaces
    vol = np.asarray(cx.weights[cx.dim])
    bv = float(vol[ball].sum())
    total = np.zeros_like(ball)
    for R0, R1 in zip(regions, regions[1:] + regions[:1]):
        D = (R0 ^ R1)
        t = D[cf[:, 0]] != D[cf[:, 1]]
        Q = relative_filling(t, ball, cx)
        if threshold is not None and float(vol[Q].sum()) > threshold:
            raise FinenessError("relative step too coarse")
        total ^= Q
    if not total[ball].any():
        return 0
    if total[ball].all():
        return 1
    raise FinenessError("relative fillings do not sum to a relative cycle")


def relative_path_class(fam: ChainFamily, path, ball: np.ndarray, threshold: float, n0: int = 64,
                        max_depth: int = 30) -> int:
    """Relative class of a closed parameter loop in a ball, refining steps
    whose relative filling exceeds ``threshold`` (in ball volume units)."""
    cx = fam.complex
    vol = np.asarray(cx.weights[cx.dim])
    bv = float(vol[ball].sum())
    cf = cx.cofaces

    def reg(s):
        return fam.region(path(np.array([s]))[0])

    def rel_step(R0, R1):
        D = R0 ^ R1
        t = D[cf[:, 0]] != D[cf[:, 1]]
        return relative_filling(t, ball, cx)

    grid = np.linspace(0, 1, n0 + 1)
    regs = [reg(s) for s in grid[:-1]]
    regs.append(regs[0])
    total = np.zeros_like(ball)
    for i in range(n0):
        stack = [(grid[i], grid[i + 1], regs[i], regs[i + 1], 0)]
        while stack:
            a, b, Ra, Rb, d = stack.pop()
            Q = rel_step(Ra, Rb)
            if float(vol[Q].sum()) > threshold * bv:
                if d >= max_depth:
                    raise FinenessError("relative step too coarse")
                m = 0.5 * (a + b)
                Rm = reg(m)
                stack += [(m, b, Rm, Rb, d + 1), (a, m, Ra, Rm, d + 1)]
                continue
            total ^= Q
    if not total[ball].any():
        return 0
    if total[ball].all():
        return 1
    raise FinenessError("relative fillings do not sum to a relative cycle")


# ---------------------------------------------------------------------------
# mass concentration


def ball_facet_masks(cx: AmbientComplex, centers: np.ndarray, r: float) -> np.ndarray:
    """(n_facets, n_centers) membership of facet barycenters in balls."""
    fc = cx.centers[cx.n]
    return np.stack([cx.distance(fc, c) <= r for c in np.atleast_2d(centers)], axis=1)


def mass_concentration(fam: ChainFamily, radii, samples: int = 256, centers: int = 16, seed: int = 0,
                       params: np.ndarray | None = None) -> dict:
    """sup over sampled parameters and ball centers of the restricted mass."""
    cx = fam.complex
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((samples, fam.param_dim)) if params is None else np.asarray(params)
    if cx.metric == "torus":
        C = rng.random((centers, cx.dim))
    else:
        C = rng.standard_normal((centers, cx.vertices.shape[1]))
        C /= np.linalg.norm(C, axis=1, keepdims=True)
    ind = fam.facet_indicator(A).astype(float) * np.asarray(cx.weights[cx.n])
    prof = []
    for r in radii:
        Bm = ball_facet_masks(cx, C, r).astype(float)
        prof.append(float((ind @ Bm).max()))
    prof = np.array(prof)
    floor = float(np.min(cx.weights[cx.n]))
    radii = np.asarray(radii, dtype=float)
    pos = prof > 0
    slope = float(np.polyfit(np.log(radii[pos]), np.log(prof[pos]), 1)[0]) if pos.sum() >= 2 else float("nan")
    return {"radii": radii.tolist(), "profile": prof.tolist(), "floor": floor, "decay_exponent": slope,
            "monotone": bool(np.all(np.diff(prof) >= -1e-12)),
            "concentrated": bool(pos.sum() >= 2 and slope < 0.5 * cx.n)}


# ---------------------------------------------------------------------------
# Lusternik-Schnirelmann restriction


def flat_distance_to_set(c: Mod2Chain, targets: list) -> float:
    return min(flat_norm(add(c, t)).cost for t in targets)


def restrict_and_detect(fam: ChainFamily, X: pt.ParamComplex, targets: list, eps: float, p: int,
                        threshold: float, check_hypothesis: bool = True) -> dict:
    """Y = cells whose vertices stay flat-distance >= eps from ``targets``;
    detect level p on Y.  Optionally checks that lambda vanishes on every
    H_1 generator of Z = closure(X - Y), and that Phi detects p + 1 on X."""
    if not targets:
        raise ChainError("target set must be nonempty")
    params = fam.to_param(X.vertex_coords)
    dist = np.array([flat_distance_to_set(fam.cycle(a), targets) for a in params])
    Y = pt.subcomplex_where(X, dist >= eps)
    if Y.dim < 0:
        raise DetectionError("restricted complex is empty")
    lam, evals, st = pulled_back_class(fam, X, threshold)
    lamY = pt.restrict_class(lam, Y)
    power = lamY
    for _ in range(p - 1):
        power = pt.cup(lamY, power)
    detected = not power.is_zero() if p <= Y.dim else False
    out = {"eps": eps, "p": p, "Y_cells": Y.counts, "X_cells": X.counts, "detected": detected,
           "proper": list(Y.counts) != list(X.counts),
           "min_distance": float(dist.min()), "max_distance": float(dist.max()), "distances": dist,
           "threshold": threshold, "Y": Y}
    if check_hypothesis:
        Z = pt.closure_complement(X, Y)
        zvals = []
        if Z.dim >= 1:
            lamZ = pt.restrict_class(lam, Z)
            zvals = [pt.evaluate(lamZ, z) for z in pt.homology(Z, 1).vectors]
        full = lam
        for _ in range(p):
            full = pt.cup(lam, full, X.triangulation)
        out["Z_loop_classes"] = zvals
        out["hypothesis_Z_trivial"] = all(v == 0 for v in zvals)
        out["detects_p_plus_1"] = not full.is_zero()
        out["implication_holds"] = (not (out["hypothesis_Z_trivial"] and out["detects_p_plus_1"])) or detected
    return out
