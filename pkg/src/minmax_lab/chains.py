"""Mod-2 chains on a metrized cell complex.

A closed (n+1)-dimensional cell complex carries sparse mod-2 boundary
matrices in every dimension, a positive weight for each cell (length, area,
volume in model units) and a representative point per cell.  Chains are sets
of cell indices; addition is symmetric difference.

The flat norm of a null-homologous n-cycle is computed exactly as a minimum
s-t cut on the dual graph of the top cells.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable

import networkx as nx
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, connected_components, maximum_flow


class ChainError(ValueError):
    """Invalid chain operation (dimension mismatch, foreign complex, ...)."""


class NotACycleError(ChainError):
    pass


class EssentialCycleError(ChainError):
    """The cycle is not a boundary; raised so callers can fall back to
    exhaustive search on tiny complexes."""


class FillingTieError(ChainError):
    """The two fillings of a difference have equal mass."""


@dataclass(frozen=True, eq=False)
class AmbientComplex:
    """Metrized closed cell complex of dimension ``dim`` = n+1.

    ``boundaries[d]`` is the (cells_{d-1} x cells_d) incidence matrix mod 2,
    ``weights[d]`` the d-dimensional measure of each d-cell and ``centers[d]``
    a representative point of each d-cell in model coordinates.
    ``metric`` is one of ``"torus"`` (unit periodic cube), ``"sphere"``
    (geodesic distance on the unit sphere) or ``"euclidean"``.
    """

    name: str
    dim: int
    boundaries: tuple
    weights: tuple
    centers: tuple
    vertices: np.ndarray
    metric: str = "euclidean"
    capacity_scale: float | None = None
    info: dict | None = None

    def __post_init__(self):
        if len(self.boundaries) != self.dim + 1 or len(self.weights) != self.dim + 1:
            raise ChainError("need boundaries and weights for dimensions 0..dim")
        for d in range(self.dim + 1):
            w = np.asarray(self.weights[d], dtype=float)
            if w.ndim != 1 or len(w) != self.n_cells(d):
                raise ChainError(f"weight array for dimension {d} has wrong length")
            if not np.all(w > 0):
                raise ChainError(f"non-positive weight in dimension {d}")
            w.flags.writeable = False

    # -- structure --------------------------------------------------------

    def n_cells(self, d: int) -> int:
        if d == 0:
            return len(self.vertices)
        return self.boundaries[d].shape[1]

    def boundary_matrix(self, d: int) -> sp.csc_matrix:
        if not 1 <= d <= self.dim:
            raise ChainError(f"no boundary map in dimension {d}")
        return self.boundaries[d]

    @property
    def n(self) -> int:
        """Dimension of the hypersurfaces (cycles) living in this complex."""
        return self.dim - 1

    @cached_property
    def total_volume(self) -> float:
        return float(np.sum(self.weights[self.dim]))

    @cached_property
    def cofaces(self) -> np.ndarray:
        """(n_facets, 2) array of the two top cells adjacent to each facet."""
        B = self.boundaries[self.dim].tocsr()
        counts = np.diff(B.indptr)
        if not np.all(counts == 2):
            bad = int(np.flatnonzero(counts != 2)[0])
            raise ChainError(f"facet {bad} has {counts[bad]} cofaces; complex is not closed")
        return B.indices.reshape(-1, 2).astype(np.int64)

    @cached_property
    def dual_graph(self) -> sp.csr_matrix:
        nt = self.n_cells(self.dim)
        cf = self.cofaces
        g = sp.coo_matrix((np.ones(len(cf)), (cf[:, 0], cf[:, 1])), shape=(nt, nt))
        g = (g + g.T).tocsr()
        g.data[:] = 1.0
        return g

    @cached_property
    def _tree(self):
        """BFS spanning tree of the dual graph, rooted at top cell 0."""
        order, pred = breadth_first_order(self.dual_graph, 0, directed=False,
                                          return_predecessors=True)
        if len(order) != self.n_cells(self.dim):
            raise ChainError("complex is not connected")
        cf = self.cofaces
        nt = self.n_cells(self.dim)
        key = np.minimum(cf[:, 0], cf[:, 1]) * nt + np.maximum(cf[:, 0], cf[:, 1])
        sorter = np.argsort(key, kind="stable")
        skey = key[sorter]
        child = order[1:]
        parent = pred[child]
        qkey = np.minimum(child, parent) * nt + np.maximum(child, parent)
        facet = sorter[np.searchsorted(skey, qkey)]
        return order, parent, facet

    def check(self) -> None:
        """Verify boundary-of-boundary and the closed-manifold condition."""
        for d in range(2, self.dim + 1):
            prod = (self.boundaries[d - 1] @ self.boundaries[d]).tocsr()
            prod.data %= 2
            prod.eliminate_zeros()
            if prod.nnz:
                raise ChainError(f"boundary of boundary nonzero in dimension {d}")
        _ = self.cofaces
        ncomp, _ = connected_components(self.dual_graph, directed=False)
        if ncomp != 1:
            raise ChainError("complex is not connected")

    # -- metric -----------------------------------------------------------

    def distance(self, points: np.ndarray, center) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        c = np.asarray(center, dtype=float)
        if self.metric == "torus":
            diff = np.abs(points - c) % 1.0
            diff = np.minimum(diff, 1.0 - diff)
            return np.sqrt(np.sum(diff**2, axis=1))
        if self.metric == "sphere":
            p = points / np.linalg.norm(points, axis=1, keepdims=True)
            c = c / np.linalg.norm(c)
            return np.arccos(np.clip(p @ c, -1.0, 1.0))
        return np.linalg.norm(points - c, axis=1)

    # -- chains -----------------------------------------------------------

    def chain(self, d: int, cells: Iterable[int] = ()) -> "Mod2Chain":
        return Mod2Chain(self, d, cells)

    def empty(self, d: int) -> "Mod2Chain":
        return Mod2Chain._raw(self, d, np.zeros(0, dtype=np.int64))

    def fundamental(self) -> "Mod2Chain":
        return Mod2Chain._raw(self, self.dim, np.arange(self.n_cells(self.dim)))

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "dim": self.dim,
            "metric": self.metric,
            "vertices": self.vertices.tolist(),
            "boundaries": [None],
            "weights": [np.asarray(w).tolist() for w in self.weights],
            "centers": [np.asarray(c).tolist() for c in self.centers],
        }
        for d in range(1, self.dim + 1):
            B = self.boundaries[d].tocsc()
            out["boundaries"].append([B.indices[B.indptr[j]:B.indptr[j + 1]].tolist()
                                      for j in range(B.shape[1])])
        return out

    @classmethod
    def from_json(cls, data: dict) -> "AmbientComplex":
        dim = data["dim"]
        vertices = np.asarray(data["vertices"], dtype=float)
        counts = [len(vertices)] + [len(c) for c in data["boundaries"][1:]]
        bnds = [None]
        for d in range(1, dim + 1):
            cols = data["boundaries"][d]
            rows = np.concatenate([np.asarray(c, dtype=np.int64) for c in cols]) if cols else np.zeros(0, int)
            ptr = np.cumsum([0] + [len(c) for c in cols])
            bnds.append(sp.csc_matrix((np.ones(len(rows), dtype=np.int8), rows, ptr),
                                      shape=(counts[d - 1], counts[d])))
        return cls(data["name"], dim, tuple(bnds),
                   tuple(np.asarray(w, dtype=float) for w in data["weights"]),
                   tuple(np.asarray(c, dtype=float) for c in data["centers"]),
                   vertices, data.get("metric", "euclidean"))


def make_complex(name, dim, boundaries, weights, centers, vertices, metric="euclidean",
                 capacity_scale=None, info=None) -> AmbientComplex:
    bnds = [None] + [sp.csc_matrix(B, dtype=np.int8) for B in boundaries[1:]]
    return AmbientComplex(name, dim, tuple(bnds),
                          tuple(np.asarray(w, dtype=float) for w in weights),
                          tuple(np.asarray(c, dtype=float) for c in centers),
                          np.asarray(vertices, dtype=float), metric, capacity_scale, info)


def reweighted(cx: AmbientComplex, weights: dict) -> AmbientComplex:
    """Copy of ``cx`` with the weights of the given dimensions replaced."""
    ws = list(cx.weights)
    for d, w in weights.items():
        ws[d] = np.asarray(w, dtype=float)
    return AmbientComplex(cx.name + "-rw", cx.dim, cx.boundaries, tuple(ws), cx.centers,
                          cx.vertices, cx.metric, None, cx.info)


class Mod2Chain:
    """Finite Z2-chain: a sorted set of cell indices of one dimension."""

    __slots__ = ("complex", "dim", "cells", "_region", "__weakref__")

    def __init__(self, complex: AmbientComplex, dim: int, cells: Iterable[int] = ()):
        if not 0 <= dim <= complex.dim:
            raise ChainError(f"dimension {dim} out of range for {complex.name}")
        arr = np.unique(np.asarray(list(cells) if not isinstance(cells, np.ndarray) else cells,
                                   dtype=np.int64))
        if len(arr) and (arr[0] < 0 or arr[-1] >= complex.n_cells(dim)):
            raise ChainError(f"cell index out of range for dimension {dim}")
        self._init(complex, dim, arr)

    def _init(self, complex, dim, arr, region=None):
        arr.flags.writeable = False
        self.complex = complex
        self.dim = dim
        self.cells = arr
        self._region = region

    @classmethod
    def _raw(cls, complex, dim, arr, region=None) -> "Mod2Chain":
        obj = cls.__new__(cls)
        obj._init(complex, dim, np.asarray(arr, dtype=np.int64), region)
        return obj

    @classmethod
    def from_mask(cls, complex, dim, mask) -> "Mod2Chain":
        return cls._raw(complex, dim, np.flatnonzero(mask))

    def mask(self) -> np.ndarray:
        m = np.zeros(self.complex.n_cells(self.dim), dtype=bool)
        m[self.cells] = True
        return m

    def is_empty(self) -> bool:
        return len(self.cells) == 0

    def __len__(self):
        return len(self.cells)

    def __add__(self, other: "Mod2Chain") -> "Mod2Chain":
        return add(self, other)

    def __eq__(self, other):
        if not isinstance(other, Mod2Chain):
            return NotImplemented
        return (self.complex is other.complex and self.dim == other.dim
                and np.array_equal(self.cells, other.cells))

    def __hash__(self):
        return hash((id(self.complex), self.dim, self.cells.tobytes()))

    def __repr__(self):
        return f"Mod2Chain(dim={self.dim}, cells={len(self.cells)}, complex={self.complex.name!r})"

    def to_json(self) -> dict:
        return {"dimension": self.dim, "cells": self.cells.tolist(), "complex": self.complex.name}


def chain_from_json(data: dict, complex: AmbientComplex) -> Mod2Chain:
    if data["complex"] != complex.name:
        raise ChainError(f"chain belongs to {data['complex']!r}, not {complex.name!r}")
    return Mod2Chain(complex, data["dimension"], data["cells"])


@dataclass(frozen=True)
class Filling:
    """(n+1)-chain plus the unfilled part of the target n-cycle."""

    chain: Mod2Chain
    defect: Mod2Chain
    cost: float


def _check_pair(a: Mod2Chain, b: Mod2Chain):
    if a.complex is not b.complex:
        raise ChainError("chains live on different complexes")
    if a.dim != b.dim:
        raise ChainError(f"dimension mismatch: {a.dim} vs {b.dim}")


def add(a: Mod2Chain, b: Mod2Chain) -> Mod2Chain:
    _check_pair(a, b)
    return Mod2Chain._raw(a.complex, a.dim, np.setxor1d(a.cells, b.cells, assume_unique=True))


def boundary(c: Mod2Chain) -> Mod2Chain:
    """Mod-2 boundary.  The boundary of a top-dimensional chain remembers that
    chain as a known filling."""
    if c.dim == 0:
        raise ChainError("boundary of a 0-chain is undefined")
    B = c.complex.boundary_matrix(c.dim)
    if len(c.cells) == 0:
        return c.complex.empty(c.dim - 1)
    sub = B[:, c.cells]
    counts = np.asarray(sub.sum(axis=1)).ravel()
    out = Mod2Chain._raw(c.complex, c.dim - 1, np.flatnonzero(counts % 2))
    if c.dim == c.complex.dim:
        out._region = c
    return out


def mass(c: Mod2Chain) -> float:
    if len(c.cells) == 0:
        return 0.0
    return float(np.sum(c.complex.weights[c.dim][c.cells]))


def is_cycle(c: Mod2Chain) -> bool:
    return c.dim == 0 or boundary(c).is_empty()


def _solve_filling(t: Mod2Chain) -> np.ndarray:
    """Indicator x of top cells with boundary(x) = t and x[0] = 0."""
    cx = t.complex
    order, parent, facet = cx._tree
    tmask = t.mask()
    x = np.zeros(cx.n_cells(cx.dim), dtype=bool)
    flip = tmask[facet]
    child = order[1:]
    # parents precede children in BFS order, so one sequential pass suffices
    xl = x.tolist()
    for c, p, f in zip(child.tolist(), parent.tolist(), flip.tolist()):
        xl[c] = xl[p] ^ f
    x = np.asarray(xl, dtype=bool)
    cf = cx.cofaces
    if not np.array_equal(x[cf[:, 0]] ^ x[cf[:, 1]], tmask):
        raise EssentialCycleError("cycle is not a boundary in this complex")
    return x


def filling_of(t: Mod2Chain) -> Mod2Chain:
    """Some (n+1)-chain bounded by ``t`` (either of the two, unnormalized)."""
    cx = t.complex
    if t.dim != cx.n:
        raise ChainError(f"expected an {cx.n}-chain")
    if t._region is not None:
        return t._region
    if not is_cycle(t):
        raise NotACycleError("input is not a cycle")
    x = _solve_filling(t)
    region = Mod2Chain.from_mask(cx, cx.dim, x)
    t._region = region
    return region


def _min_cut_source_side(cx: AmbientComplex, src_cap, snk_cap, edge_cap) -> np.ndarray:
    nt = cx.n_cells(cx.dim)
    cf = cx.cofaces
    s, t = nt, nt + 1
    if cx.capacity_scale is not None:
        scale = cx.capacity_scale
        caps = [np.rint(c * scale).astype(np.int64) for c in (src_cap, snk_cap, edge_cap)]
        if all(np.allclose(ci, c * scale, atol=1e-6) for ci, c in zip(caps, (src_cap, snk_cap, edge_cap))):
            sc, kc, ec = caps
            idx = np.arange(nt)
            rows = np.concatenate([np.full(nt, s), idx, cf[:, 0], cf[:, 1]])
            cols = np.concatenate([idx, np.full(nt, t), cf[:, 1], cf[:, 0]])
            data = np.concatenate([sc, kc, ec, ec])
            keep = data > 0
            G = sp.csr_matrix((data[keep].astype(np.int32), (rows[keep], cols[keep])),
                              shape=(nt + 2, nt + 2))
            G.sum_duplicates()
            res = maximum_flow(G, s, t, method="dinic")
            R = (G - res.flow).tocsr()
            R.data[R.data < 0] = 0
            R.eliminate_zeros()
            reach = breadth_first_order(R, s, directed=True, return_predecessors=False)
            side = np.zeros(nt + 2, dtype=bool)
            side[reach] = True
            return side[:nt]
    G = nx.DiGraph()
    G.add_nodes_from(range(nt + 2))
    for c in np.flatnonzero(src_cap > 0):
        G.add_edge(s, int(c), capacity=float(src_cap[c]))
    for c in np.flatnonzero(snk_cap > 0):
        G.add_edge(int(c), t, capacity=float(snk_cap[c]))
    for (u, v), w in zip(cf.tolist(), edge_cap.tolist()):
        for a, b in ((u, v), (v, u)):
            if G.has_edge(a, b):
                G[a][b]["capacity"] += w
            else:
                G.add_edge(a, b, capacity=w)
    _, (reach, _) = nx.minimum_cut(G, s, t)
    side = np.zeros(nt + 2, dtype=bool)
    side[list(reach)] = True
    return side[:nt]


def flat_norm(t: Mod2Chain) -> Filling:
    """Exact flat norm of a null-homologous n-cycle.

    Minimizes mass(t + boundary(A)) + mass(A) over (n+1)-chains A.  With R
    any filling of t and Z = R + A the objective is a cut function of the
    indicator of Z, minimized by s-t max-flow.
    """
    cx = t.complex
    if t.dim != cx.n:
        raise ChainError(f"flat norm expects an {cx.n}-cycle")
    if not is_cycle(t):
        raise NotACycleError("flat norm of a non-cycle")
    if t.is_empty():
        return Filling(cx.empty(cx.dim), cx.empty(cx.n), 0.0)
    x = filling_of(t).mask()
    vol = np.asarray(cx.weights[cx.dim])
    src = np.where(x, vol, 0.0)
    snk = np.where(x, 0.0, vol)
    z = _min_cut_source_side(cx, src, snk, np.asarray(cx.weights[cx.n]))
    A = Mod2Chain.from_mask(cx, cx.dim, z ^ x)
    defect = boundary(Mod2Chain.from_mask(cx, cx.dim, z))
    return Filling(A, defect, mass(A) + mass(defect))


def flat_norm_exhaustive(t: Mod2Chain, max_cells: int = 22, chunk: int = 1 << 15) -> Filling:
    """Flat norm by enumerating every (n+1)-chain; an oracle for small complexes."""
    cx = t.complex
    nt = cx.n_cells(cx.dim)
    if t.dim != cx.n:
        raise ChainError(f"flat norm expects an {cx.n}-cycle")
    if nt > max_cells:
        raise ChainError(f"{nt} top cells is too many to enumerate")
    cf = cx.cofaces
    vol = np.asarray(cx.weights[cx.dim])
    wf = np.asarray(cx.weights[cx.n])
    tm = t.mask()
    bits = np.arange(nt)
    best, arg = np.inf, 0
    for lo in range(0, 1 << nt, chunk):
        codes = np.arange(lo, min(lo + chunk, 1 << nt), dtype=np.int64)
        A = ((codes[:, None] >> bits) & 1).astype(bool)
        defect = tm ^ A[:, cf[:, 0]] ^ A[:, cf[:, 1]]
        cost = defect @ wf + A @ vol
        i = int(np.argmin(cost))
        if cost[i] < best:
            best, arg = float(cost[i]), int(codes[i])
    A = ((arg >> bits) & 1).astype(bool)
    chain = Mod2Chain.from_mask(cx, cx.dim, A)
    defect = Mod2Chain.from_mask(cx, cx.n, tm ^ A[cf[:, 0]] ^ A[cf[:, 1]])
    return Filling(chain, defect, best)


def flat_distance(s: Mod2Chain, t: Mod2Chain) -> float:
    return flat_norm(add(s, t)).cost


def isoperimetric_choice(s: Mod2Chain, t: Mod2Chain, rtol: float = 1e-12) -> Mod2Chain:
    """The strictly lighter of the two (n+1)-chains bounded by s + t."""
    _check_pair(s, t)
    cx = s.complex
    if s._region is not None and t._region is not None:
        R = add(s._region, t._region)
    else:
        try:
            R = filling_of(add(s, t))
        except EssentialCycleError as exc:
            raise EssentialCycleError("cycles lie in different homology classes") from exc
    m = mass(R)
    total = cx.total_volume
    if abs(2.0 * m - total) <= rtol * total:
        raise FillingTieError(f"both fillings have mass {m:.6g} = half the total volume")
    if 2.0 * m < total:
        return R
    return Mod2Chain.from_mask(cx, cx.dim, ~R.mask())


def restrict(c: Mod2Chain, region: Callable[[np.ndarray], np.ndarray]) -> Mod2Chain:
    """Cells of ``c`` whose representative point satisfies ``region``."""
    if len(c.cells) == 0:
        return c
    pts = c.complex.centers[c.dim][c.cells]
    keep = np.asarray(region(pts), dtype=bool)
    return Mod2Chain._raw(c.complex, c.dim, c.cells[keep])


def _cut_events(q: Mod2Chain, center):
    """Breakpoints and cut-mass values of s -> mass(bd(q|B_s) + (bd q)|B_s)."""
    cx = q.complex
    dtop = cx.distance(cx.centers[cx.dim], center)
    dfac = cx.distance(cx.centers[cx.n], center)
    cf = cx.cofaces
    qm = q.mask()
    bq = boundary(q).mask()
    ev_f, ev_d = [], []
    for side in (0, 1):
        sel = qm[cf[:, side]]
        ev_f.append(np.flatnonzero(sel))
        ev_d.append(dtop[cf[sel, side]])
    ev_f.append(np.flatnonzero(bq))
    ev_d.append(dfac[bq])
    f = np.concatenate(ev_f)
    d = np.concatenate(ev_d)
    if len(f) == 0:
        return np.zeros(0), np.zeros(0)
    order = np.lexsort((d, f))
    f, d = f[order], d[order]
    start = np.r_[0, np.flatnonzero(np.diff(f)) + 1]
    rank = np.arange(len(f)) - np.repeat(start, np.diff(np.r_[start, len(f)]))
    delta = np.asarray(cx.weights[cx.n])[f] * np.where(rank % 2 == 0, 1.0, -1.0)
    o2 = np.argsort(d, kind="stable")
    return d[o2], np.cumsum(delta[o2])


def cut_mass_profile(q: Mod2Chain, center, radii) -> np.ndarray:
    """Mass of the slice bd(q|B_s) + (bd q)|B_s for each s in ``radii``."""
    if q.dim != q.complex.dim:
        raise ChainError("slicing expects a top-dimensional chain")
    dist, cum = _cut_events(q, center)
    radii = np.asarray(radii, dtype=float)
    if len(dist) == 0:
        return np.zeros_like(radii)
    k = np.searchsorted(dist, radii, side="right")
    out = np.where(k > 0, cum[np.maximum(k - 1, 0)], 0.0)
    return np.maximum(out, 0.0)


def _max_slice_radius(cx: AmbientComplex) -> float:
    return 0.5 if cx.metric == "torus" else np.pi / 2


def slice_radius(q: Mod2Chain, center, r: float) -> float:
    """Radius s in [r/2, r] with the lightest slice of q by the ball B_s."""
    if not 0 < r < _max_slice_radius(q.complex):
        raise ChainError(f"radius {r} outside the model's injectivity range")
    dist, _ = _cut_events(q, center)
    cand = np.unique(np.r_[r / 2, dist[(dist >= r / 2) & (dist <= r)]])
    prof = cut_mass_profile(q, center, cand)
    return float(cand[int(np.argmin(prof))])


def slice_cut(q: Mod2Chain, center, s: float) -> Mod2Chain:
    cx = q.complex
    inside = lambda pts: cx.distance(pts, center) <= s
    return add(boundary(restrict(q, inside)), restrict(boundary(q), inside))


def mean_slice_mass(q: Mod2Chain, center, r: float) -> float:
    """Average of the slice mass over s in [r/2, r] (exact, piecewise constant)."""
    dist, _ = _cut_events(q, center)
    knots = np.unique(np.r_[r / 2, dist[(dist > r / 2) & (dist < r)], r])
    prof = cut_mass_profile(q, center, knots[:-1])
    return float(np.sum(prof * np.diff(knots)) / (r / 2))


def dump_chains(chains: Iterable[Mod2Chain]) -> str:
    return json.dumps([c.to_json() for c in chains], sort_keys=True)
