"""Concrete ambient models: flat tori, round spheres and small polyhedra.

Tori are periodic cubical grids of the unit cube.  Spheres are the radial
projection of the subdivided boundary of [-1, 1]^(d+1); cell weights are
computed by Gauss-Legendre quadrature of the projected area element.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.spatial import ConvexHull

from .chains import AmbientComplex, ChainError, Mod2Chain, boundary, make_complex

MAX_TOP_CELLS = 2_000_000


class ModelError(ValueError):
    pass


# ---------------------------------------------------------------------------
# cubical grids


@dataclass(frozen=True)
class GridCells:
    """Cells (v, S) of a cubical grid, grouped by dimension."""

    verts: list  # per dimension: (N, D) int array
    dirs: list  # per dimension: (N,) int bitmask of spanning directions
    boundaries: list  # per dimension d >= 1: sparse (N_{d-1}, N_d)


def _dir_mask(S) -> int:
    return sum(1 << i for i in S)


def _grid_cells(D: int, g: int, periodic: bool, qmax: int, keep=None) -> GridCells:
    size = g if periodic else g + 1
    verts, dirs, lookups = [], [], []
    for q in range(qmax + 1):
        vq, dq, lk = [], [], {}
        count = 0
        for S in itertools.combinations(range(D), q):
            axes = [np.arange(g) if (periodic or i in S) else np.arange(g + 1) for i in range(D)]
            grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, D)
            if keep is not None:
                grid = grid[keep(grid, S)]
            table = np.full((size,) * D, -1, dtype=np.int64)
            table[tuple(grid.T)] = np.arange(count, count + len(grid))
            lk[S] = table
            vq.append(grid)
            dq.append(np.full(len(grid), _dir_mask(S), dtype=np.int64))
            count += len(grid)
        verts.append(np.concatenate(vq) if vq else np.zeros((0, D), int))
        dirs.append(np.concatenate(dq) if dq else np.zeros(0, int))
        lookups.append(lk)
        if q == qmax and count > MAX_TOP_CELLS:
            raise ModelError(f"resolution too large: {count} top cells")
    bnds = [None]
    for q in range(1, qmax + 1):
        rows, cols = [], []
        V, M = verts[q], dirs[q]
        for i in range(D):
            sel = np.flatnonzero((M >> i) & 1)
            if len(sel) == 0:
                continue
            for shift in (0, 1):
                w = V[sel].copy()
                w[:, i] += shift
                if periodic:
                    w %= g
                # look the face up in the table of its direction set
                for S in {tuple(b for b in range(D) if (m >> b) & 1 and b != i) for m in np.unique(M[sel])}:
                    sub = M[sel] == _dir_mask(S) + (1 << i)
                    idx = lookups[q - 1][S][tuple(w[sub].T)]
                    if np.any(idx < 0):
                        raise ModelError("face lookup failed; grid is not face-closed")
                    rows.append(idx)
                    cols.append(sel[sub])
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        B = sp.csc_matrix((np.ones(len(r), dtype=np.int8), (r, c)), shape=(len(verts[q - 1]), len(V)))
        bnds.append(B)
    return GridCells(verts, dirs, bnds)


def _dir_vectors(dirs: np.ndarray, D: int) -> np.ndarray:
    return ((dirs[:, None] >> np.arange(D)) & 1).astype(float)


# ---------------------------------------------------------------------------
# torus


def build_torus(n: int, g: int) -> AmbientComplex:
    """Flat unit torus T^(n+1) as a periodic g^(n+1) cubical grid."""
    if n not in (1, 2):
        raise ModelError("torus models support n in {1, 2}")
    if g < 2:
        raise ModelError("grid resolution must be at least 2")
    D = n + 1
    if g**D > MAX_TOP_CELLS:
        raise ModelError(f"resolution too large: {g**D} top cells")
    cells = _grid_cells(D, g, True, D)
    centers, weights = [], []
    for q in range(D + 1):
        centers.append((cells.verts[q] + 0.5 * _dir_vectors(cells.dirs[q], D)) / g)
        weights.append(np.full(len(cells.verts[q]), (1.0 / g) ** q))
    return make_complex(f"torus-n{n}-g{g}", D, cells.boundaries, weights, centers,
                        cells.verts[0] / g, metric="torus", capacity_scale=float(g**D),
                        info={"kind": "torus", "n": n, "g": g})


# ---------------------------------------------------------------------------
# sphere


def _projected_measure(base: np.ndarray, dirs: np.ndarray, D: int, g: int, order: int) -> np.ndarray:
    """Area of the radial projection of cells (v, S) of the g-grid on [-1,1]^D."""
    q = int(bin(int(dirs[0])).count("1")) if len(dirs) else 0
    if q == 0:
        return np.ones(len(base))
    nodes, wts = np.polynomial.legendre.leggauss(order)
    nodes = 0.5 * (nodes + 1.0)
    wts = 0.5 * wts
    out = np.zeros(len(base))
    # all cells in one call share |S| but not S; group by mask
    for m in np.unique(dirs):
        sel = np.flatnonzero(dirs == m)
        S = np.flatnonzero((int(m) >> np.arange(D)) & 1)
        E = np.zeros((q, D))
        E[np.arange(q), S] = 1.0
        for idx in itertools.product(range(order), repeat=q):
            u = nodes[list(idx)]
            w = np.prod(wts[list(idx)])
            x = -1.0 + 2.0 * (base[sel] + u @ E) / g
            r = np.linalg.norm(x, axis=1, keepdims=True)
            xh = x / r
            # columns DP(x) e_S scaled by dx/du = 2/g
            J = (E[None, :, :] - (xh @ E.T)[:, :, None] * xh[:, None, :]) / r[:, :, None] * (2.0 / g)
            G = J @ np.transpose(J, (0, 2, 1))
            out[sel] += w * np.sqrt(np.maximum(np.linalg.det(G), 0.0))
    return out


def build_sphere(d: int, g: int, quadrature: int = 3) -> AmbientComplex:
    """Round unit sphere S^d from the projected, g-subdivided cube boundary."""
    if d not in (2, 3):
        raise ModelError("sphere models support d in {2, 3}")
    if g < 2:
        raise ModelError("grid resolution must be at least 2")
    D = d + 1
    if 2 * D * g**d > MAX_TOP_CELLS:
        raise ModelError(f"resolution too large: {2 * D * g**d} top cells")

    def on_boundary(grid, S):
        free = [i for i in range(D) if i not in S]
        if not free:
            return np.zeros(len(grid), dtype=bool)
        sub = grid[:, free]
        return np.any((sub == 0) | (sub == g), axis=1)

    cells = _grid_cells(D, g, False, d, keep=on_boundary)
    centers, weights = [], []
    for q in range(d + 1):
        x = -1.0 + 2.0 * (cells.verts[q] + 0.5 * _dir_vectors(cells.dirs[q], D)) / g
        centers.append(x / np.linalg.norm(x, axis=1, keepdims=True))
        w = _projected_measure(cells.verts[q].astype(float), cells.dirs[q], D, g, quadrature)
        if q == 1 and d == 2:
            # edges project to great-circle arcs: use the exact arc length
            a = -1.0 + 2.0 * cells.verts[1] / g
            b = a + 2.0 * _dir_vectors(cells.dirs[1], D) / g
            an = a / np.linalg.norm(a, axis=1, keepdims=True)
            bn = b / np.linalg.norm(b, axis=1, keepdims=True)
            w = np.arccos(np.clip(np.sum(an * bn, axis=1), -1.0, 1.0))
        weights.append(w)
    x0 = -1.0 + 2.0 * cells.verts[0] / g
    return make_complex(f"sphere-d{d}-g{g}", d, cells.boundaries, weights, centers,
                        x0 / np.linalg.norm(x0, axis=1, keepdims=True), metric="sphere",
                        info={"kind": "sphere", "d": d, "g": g, "quadrature": quadrature})


# ---------------------------------------------------------------------------
# polyhedra


def _simplicial_surface(name: str, pts: np.ndarray, faces: np.ndarray) -> AmbientComplex:
    faces = np.sort(faces, axis=1)
    edges = np.unique(np.sort(np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [0, 2]]]), axis=1), axis=0)
    eidx = {tuple(e): i for i, e in enumerate(edges.tolist())}
    r, c = [], []
    for j, (a, b, cc) in enumerate(faces.tolist()):
        for e in ((a, b), (b, cc), (a, cc)):
            r.append(eidx[e])
            c.append(j)
    B2 = sp.csc_matrix((np.ones(len(r), dtype=np.int8), (r, c)), shape=(len(edges), len(faces)))
    r1 = edges.ravel()
    c1 = np.repeat(np.arange(len(edges)), 2)
    B1 = sp.csc_matrix((np.ones(len(r1), dtype=np.int8), (r1, c1)), shape=(len(pts), len(edges)))
    elen = np.linalg.norm(pts[edges[:, 0]] - pts[edges[:, 1]], axis=1)
    tri = pts[faces]
    area = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    ecen = pts[edges].mean(axis=1)
    fcen = tri.mean(axis=1)
    unit = lambda x: x / np.linalg.norm(x, axis=1, keepdims=True)
    return make_complex(name, 2, [None, B1, B2], [np.ones(len(pts)), elen, area],
                        [pts, unit(ecen), unit(fcen)], pts, metric="sphere",
                        info={"kind": "polyhedron", "name": name})


def build_octahedron() -> AmbientComplex:
    pts = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], float)
    faces = np.array([[a, b, c] for a in (0, 1) for b in (2, 3) for c in (4, 5)])
    return _simplicial_surface("octahedron", pts, faces)


def build_icosahedron() -> AmbientComplex:
    phi = (1 + 5**0.5) / 2
    pts = []
    for s1 in (-1, 1):
        for s2 in (-1, 1):
            pts += [(0, s1, s2 * phi), (s1, s2 * phi, 0), (s2 * phi, 0, s1)]
    pts = np.array(pts, float)
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return _simplicial_surface("icosahedron", pts, ConvexHull(pts).simplices)


# ---------------------------------------------------------------------------
# scalar fields


@dataclass(frozen=True)
class ScalarField:
    """Function on an ambient model: vertex values, top-cell center values and
    a closed-form evaluator on model points."""

    complex: AmbientComplex
    vertex_values: np.ndarray
    center_values: np.ndarray
    evaluator: Callable[[np.ndarray], np.ndarray] | None = None
    direction: np.ndarray | None = None

    def __call__(self, pts) -> np.ndarray:
        if self.evaluator is None:
            raise ModelError("field has no closed-form evaluator")
        return self.evaluator(np.atleast_2d(np.asarray(pts, dtype=float)))

    def to_json(self) -> dict:
        return {"complex": self.complex.name,
                "direction": None if self.direction is None else self.direction.tolist()}


def torus_embedding(x: np.ndarray) -> np.ndarray:
    """Flat torus in R^(2D): (cos 2 pi x_i, sin 2 pi x_i)_i / sqrt(D)."""
    D = x.shape[1]
    ang = 2 * np.pi * x
    out = np.empty((len(x), 2 * D))
    out[:, 0::2] = np.cos(ang)
    out[:, 1::2] = np.sin(ang)
    return out / np.sqrt(D)


def embed(cx: AmbientComplex, pts: np.ndarray) -> np.ndarray:
    if cx.metric == "torus":
        return torus_embedding(pts)
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def field_from_function(cx: AmbientComplex, fn: Callable[[np.ndarray], np.ndarray],
                        direction=None) -> ScalarField:
    vv = np.asarray(fn(cx.vertices), dtype=float)
    cv = np.asarray(fn(cx.centers[cx.dim]), dtype=float)
    if not (np.all(np.isfinite(vv)) and np.all(np.isfinite(cv))):
        raise ModelError("field has non-finite values")
    return ScalarField(cx, vv, cv, fn, None if direction is None else np.asarray(direction))


def linear_field(cx: AmbientComplex, v) -> ScalarField:
    """f(x) = <E(x), v> with E the model's embedding."""
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    return field_from_function(cx, lambda p: embed(cx, p) @ v, v)


def _distinct(vals: np.ndarray, tol: float = 1e-9) -> bool:
    s = np.sort(vals)
    return len(s) < 2 or float(np.min(np.diff(s))) > tol


def morse_direction(cx: AmbientComplex, seed: int, direction=None, retries: int = 50) -> ScalarField:
    """Linear height function with distinct vertex and top-cell center values.

    ``direction`` is tried first when given; after that directions are drawn
    uniformly from the sphere with the seeded generator.
    """
    rng = np.random.default_rng(seed)
    edim = 2 * cx.dim if cx.metric == "torus" else cx.vertices.shape[1]
    for attempt in range(retries):
        if attempt == 0 and direction is not None:
            v = np.asarray(direction, dtype=float)
        else:
            v = rng.standard_normal(edim)
        f = linear_field(cx, v)
        if _distinct(f.vertex_values) and _distinct(f.center_values):
            return f
    raise ModelError(f"no Morse direction found in {retries} tries; model looks degenerate")


def _check_level(f: ScalarField, t: float) -> None:
    if np.any(np.isclose(f.center_values, t, rtol=0.0, atol=1e-12)):
        raise ModelError(f"level {t} hits a cell-center value")


def sublevel_region(f: ScalarField, t: float) -> Mod2Chain:
    _check_level(f, t)
    cx = f.complex
    return Mod2Chain.from_mask(cx, cx.dim, f.center_values < t)


def level_cycle(f: ScalarField, t: float) -> Mod2Chain:
    return boundary(sublevel_region(f, t))


def volume_quantile(f: ScalarField, q: float) -> float:
    """Level t (between center values) whose sublevel region holds fraction q."""
    cx = f.complex
    order = np.argsort(f.center_values)
    cum = np.cumsum(np.asarray(cx.weights[cx.dim])[order]) / cx.total_volume
    i = int(np.clip(np.searchsorted(cum, q), 0, len(order) - 2))
    return 0.5 * (f.center_values[order[i]] + f.center_values[order[i + 1]])


# ---------------------------------------------------------------------------
# balls and packings


def half_diameter(cx: AmbientComplex) -> float:
    if cx.metric == "torus":
        return math.sqrt(cx.dim) / 4
    if cx.metric == "sphere":
        return math.pi / 2
    raise ModelError("no diameter for this metric")


def injectivity_radius(cx: AmbientComplex) -> float:
    return 0.5 if cx.metric == "torus" else math.pi


@dataclass(frozen=True)
class Ball:
    complex: AmbientComplex
    center: np.ndarray
    radius: float

    def __call__(self, pts) -> np.ndarray:
        return self.complex.distance(pts, self.center) <= self.radius

    def region(self) -> Mod2Chain:
        cx = self.complex
        return Mod2Chain.from_mask(cx, cx.dim, self(cx.centers[cx.dim]))


def geodesic_ball(cx: AmbientComplex, center, r: float) -> Ball:
    if not 0 < r < half_diameter(cx):
        raise ModelError(f"radius {r} out of range (0, {half_diameter(cx):.4g})")
    c = np.asarray(center, dtype=float)
    if cx.metric == "sphere":
        c = c / np.linalg.norm(c)
    return Ball(cx, c, float(r))


@dataclass(frozen=True)
class BallPacking:
    centers: np.ndarray
    radius: float
    nu: float
    metric: str
    shrinks: int = 0

    @property
    def count(self) -> int:
        return len(self.centers)

    def to_json(self) -> dict:
        return {"centers": self.centers.tolist(), "radius": self.radius, "nu": self.nu,
                "metric": self.metric, "count": self.count, "shrinks": self.shrinks}


def fibonacci_sphere(p: int) -> np.ndarray:
    i = np.arange(p) + 0.5
    z = 1 - 2 * i / p
    theta = np.pi * (1 + 5**0.5) * i
    r = np.sqrt(1 - z**2)
    return np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=1)


def super_fibonacci(p: int) -> np.ndarray:
    """Super-Fibonacci spiral points on S^3."""
    phi = math.sqrt(2.0)
    psi = 1.533751168755204288118041
    i = np.arange(p) + 0.5
    s = i / p
    r = np.sqrt(s)
    R = np.sqrt(1 - s)
    alpha = 2 * np.pi * i / phi
    beta = 2 * np.pi * i / psi
    return np.stack([r * np.sin(alpha), r * np.cos(alpha), R * np.sin(beta), R * np.cos(beta)], axis=1)


def _spiral(d: int, p: int) -> np.ndarray:
    return fibonacci_sphere(p) if d == 2 else super_fibonacci(p)


def _min_pair_distance(cx: AmbientComplex, pts: np.ndarray) -> float:
    best = np.inf
    for i in range(len(pts) - 1):
        best = min(best, float(np.min(cx.distance(pts[i + 1:], pts[i]))))
    return best


_SPIRAL_CONST: dict = {}


def spiral_constant(d: int, pmax: int = 64) -> float:
    """inf over 2 <= p <= pmax of (min pairwise arc distance) * p^(1/d)."""
    if d not in _SPIRAL_CONST:
        vals = []
        for p in range(2, pmax + 1):
            pts = _spiral(d, p)
            G = np.clip(pts @ pts.T, -1, 1)
            np.fill_diagonal(G, -1)
            vals.append(float(np.arccos(G.max())) * p ** (1 / d))
        _SPIRAL_CONST[d] = min(vals)
    return _SPIRAL_CONST[d]


def packing_constant(cx: AmbientComplex) -> float:
    if cx.metric == "torus":
        return 0.25
    return 0.25 * spiral_constant(cx.dim)


def ball_packing(cx: AmbientComplex, p: int, retries: int = 10) -> BallPacking:
    """p disjoint balls of radius nu p^(-1/(n+1))."""
    if p < 1:
        raise ModelError("need p >= 1")
    D = cx.dim
    nu = packing_constant(cx)
    if cx.metric == "torus":
        q = math.ceil(p ** (1 / D) - 1e-12)
        grid = np.stack(np.meshgrid(*[np.arange(q)] * D, indexing="ij"), -1).reshape(-1, D)
        centers = grid[:p] / q
    elif cx.metric == "sphere":
        centers = _spiral(D, p)
    else:
        raise ModelError("packings need a torus or sphere model")
    r = nu * p ** (-1 / D)
    dmin = _min_pair_distance(cx, centers) if p > 1 else np.inf
    for shrinks in range(retries + 1):
        if dmin > 2 * r:
            return BallPacking(centers, r, nu, cx.metric, shrinks)
        r *= 0.9
    raise ModelError(f"packing of {p} balls not disjoint after {retries} shrinks")


def verify_packing(cx: AmbientComplex, packing: BallPacking) -> bool:
    if packing.count < 2:
        return True
    return _min_pair_distance(cx, packing.centers) > 2 * packing.radius


__all__ = [
    "Ball", "BallPacking", "ModelError", "ScalarField", "ball_packing", "build_icosahedron",
    "build_octahedron", "build_sphere", "build_torus", "embed", "field_from_function",
    "geodesic_ball", "half_diameter", "level_cycle", "linear_field", "morse_direction",
    "packing_constant", "sublevel_region", "verify_packing", "volume_quantile", "ChainError",
]
