"""Cubical parameter complexes, Z2 (co)homology and cup products.

A cell of I(m, j) is a pair (v, S): an integer corner v in {0..N}^m with
N = 3^j and a set S of spanning directions, stored as a bitmask.  Quotient
complexes are described by a canonicalization of cell keys: ``periodic``
(coordinates mod N, tori and circles) or ``antipodal`` (the boundary of the
cube with (v, S) ~ (N - v - 1_S, S), the real projective space model).

Cup products are computed on the Kuhn triangulation: the simplices inside a
cell (v, S) are the chains v < v + 1_T1 < v + 1_(T1+T2) < ... for ordered set
partitions of S.  Ordering vertices globally turns it into an ordered
simplicial complex where the front-face/back-face formula applies.  The
subdivision chain map (cell -> sum of its top Kuhn simplices) is used to
push simplicial cochains back to cells for rank tests.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import gf2


class TopologyError(ValueError):
    pass


def _popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    c = np.zeros_like(x)
    while np.any(x):
        c += x & 1
        x = x >> 1
    return c


def _mask_vectors(mask: np.ndarray, m: int) -> np.ndarray:
    return ((np.asarray(mask)[:, None] >> np.arange(m)) & 1).astype(np.int64)


class ParamComplex:
    """Face-closed set of cells of I(m, j), possibly under an identification."""

    def __init__(self, m: int, j: int, identify: str | None, verts, masks,
                 parent: "ParamComplex | None" = None, name: str = ""):
        if identify not in (None, "periodic", "antipodal"):
            raise TopologyError(f"unknown identification {identify!r}")
        self.m, self.j, self.N = m, j, 3**j
        self.identify = identify
        self.name = name or f"I({m},{j})"
        self.parent = parent
        V, M = self._canonical(np.asarray(verts, dtype=np.int64).reshape(-1, m),
                               np.asarray(masks, dtype=np.int64))
        keys = self._encode(V, M)
        keys, first = np.unique(keys, return_index=True)
        V, M = V[first], M[first]
        dims = _popcount(M)
        self.dim = int(dims.max()) if len(dims) else -1
        self.verts, self.masks, self.keys = [], [], []
        for q in range(self.dim + 1):
            sel = dims == q
            k = keys[sel]
            order = np.argsort(k)
            self.verts.append(V[sel][order])
            self.masks.append(M[sel][order])
            self.keys.append(k[order])
        self.boundaries = [None] + [self._boundary(q) for q in range(1, self.dim + 1)]

    # -- keys ------------------------------------------------------------

    def _encode(self, V, M) -> np.ndarray:
        base = self.N + 1
        k = np.zeros(len(V), dtype=np.int64)
        for i in range(self.m - 1, -1, -1):
            k = k * base + V[:, i]
        return k * (1 << self.m) + M

    def _canonical(self, V, M):
        if self.identify == "periodic":
            return V % self.N, M
        if self.identify == "antipodal":
            W = self.N - V - _mask_vectors(M, self.m)
            swap = self._encode(W, M) < self._encode(V, M)
            V = np.where(swap[:, None], W, V)
        return V, M

    def lookup(self, V, M, q: int | None = None) -> np.ndarray:
        """Indices of cells (V, M) (canonicalized); -1 where absent."""
        V, M = self._canonical(np.atleast_2d(np.asarray(V, dtype=np.int64)), np.asarray(M, dtype=np.int64))
        if q is None:
            q = int(_popcount(M[:1])[0]) if len(M) else 0
        if q > self.dim:
            return np.full(len(V), -1)
        keys = self._encode(V, M)
        pos = np.searchsorted(self.keys[q], keys)
        pos = np.minimum(pos, len(self.keys[q]) - 1)
        ok = self.keys[q][pos] == keys
        return np.where(ok, pos, -1)

    def _boundary(self, q: int) -> sp.csc_matrix:
        V, M = self.verts[q], self.masks[q]
        rows, cols = [], []
        for i in range(self.m):
            sel = np.flatnonzero((M >> i) & 1)
            if len(sel) == 0:
                continue
            Mf = M[sel] & ~(1 << i)
            for shift in (0, 1):
                W = V[sel].copy()
                W[:, i] += shift
                idx = self.lookup(W, Mf, q - 1)
                if np.any(idx < 0):
                    raise TopologyError("complex is not closed under faces")
                rows.append(idx)
                cols.append(sel)
        r, c = np.concatenate(rows), np.concatenate(cols)
        B = sp.csc_matrix((np.ones(len(r), dtype=np.int64), (r, c)), shape=(self.n_cells(q - 1), self.n_cells(q)))
        B.data %= 2
        B.eliminate_zeros()
        return B

    # -- structure -------------------------------------------------------

    def n_cells(self, q: int) -> int:
        return len(self.keys[q]) if 0 <= q <= self.dim else 0

    @property
    def counts(self) -> list[int]:
        return [self.n_cells(q) for q in range(self.dim + 1)]

    @property
    def vertex_coords(self) -> np.ndarray:
        return self.verts[0] / self.N

    def euler_characteristic(self) -> int:
        return sum((-1) ** q * self.n_cells(q) for q in range(self.dim + 1))

    @cached_property
    def cell_vertices(self) -> list:
        """Per dimension, the (n_q, 2^q) array of corner vertex indices."""
        out = []
        for q in range(self.dim + 1):
            V, M = self.verts[q], self.masks[q]
            if len(V) == 0:
                out.append(np.zeros((0, 2**q), dtype=np.int64))
                continue
            # corners v + 1_A for A a subset of S, enumerated per mask
            corners = np.zeros((len(V), 2**q), dtype=np.int64)
            for mk in np.unique(M):
                sel = np.flatnonzero(M == mk)
                S = [i for i in range(self.m) if (int(mk) >> i) & 1]
                for a, A in enumerate(itertools.product((0, 1), repeat=q)):
                    W = V[sel].copy()
                    for s, on in zip(S, A):
                        W[:, s] += on
                    corners[sel, a] = self.lookup(W, np.zeros(len(sel), dtype=np.int64), 0)
            out.append(corners)
        return out

    def closure_masks(self, masks: list) -> list:
        """Smallest face-closed cell set containing the given cells."""
        out = [np.asarray(mk, dtype=bool).copy() for mk in masks]
        for q in range(self.dim, 0, -1):
            if out[q].any():
                hit = (self.boundaries[q][:, np.flatnonzero(out[q])].sum(axis=1) > 0)
                out[q - 1] |= np.asarray(hit).ravel()
        return out

    def subcomplex(self, masks: list, name: str = "") -> "ParamComplex":
        masks = [np.asarray(mk, dtype=bool) for mk in masks] + [np.zeros(0, bool)] * (self.dim + 1 - len(masks))
        closed = self.closure_masks(masks)
        if any(np.any(c & ~m) for c, m in zip(closed, masks)):
            raise TopologyError("cell set is not a subcomplex")
        V = np.concatenate([self.verts[q][masks[q]] for q in range(self.dim + 1)])
        M = np.concatenate([self.masks[q][masks[q]] for q in range(self.dim + 1)])
        sub = ParamComplex(self.m, self.j, self.identify, V, M, parent=self, name=name or f"sub({self.name})")
        return sub

    def parent_index(self, q: int) -> np.ndarray:
        """Indices of this subcomplex's q-cells in the parent complex."""
        if self.parent is None:
            return np.arange(self.n_cells(q))
        return self.parent.lookup(self.verts[q], self.masks[q], q)

    def cell_masks_in(self, X: "ParamComplex") -> list:
        """Membership masks of this complex's cells among the cells of X."""
        out = []
        for q in range(X.dim + 1):
            mk = np.zeros(X.n_cells(q), dtype=bool)
            if q <= self.dim and self.n_cells(q):
                idx = X.lookup(self.verts[q], self.masks[q], q)
                if np.any(idx < 0):
                    raise TopologyError("not a subcomplex of the given complex")
                mk[idx] = True
            out.append(mk)
        return out

    def edge_index(self, a: int, b: int) -> int:
        """Index of the 1-cell joining vertices a and b (-1 if none)."""
        va, vb = self.verts[0][a], self.verts[0][b]
        cands = []
        for x, y in ((va, vb), (vb, va)):
            for shift in self._periodic_shifts():
                d = (y + shift) - x
                nz = np.flatnonzero(d)
                if len(nz) == 1 and d[nz[0]] == 1:
                    cands.append((x, nz[0]))
                if self.identify == "antipodal":
                    ya = self.N - y
                    d2 = ya - x
                    nz2 = np.flatnonzero(d2)
                    if len(nz2) == 1 and d2[nz2[0]] == 1:
                        cands.append((x, nz2[0]))
        for x, i in cands:
            idx = self.lookup(x[None, :], np.array([1 << i]), 1)[0]
            if idx >= 0:
                return int(idx)
        return -1

    def _periodic_shifts(self):
        if self.identify != "periodic":
            return [np.zeros(self.m, dtype=np.int64)]
        return [np.array(s, dtype=np.int64) * self.N for s in itertools.product((-1, 0, 1), repeat=self.m)]

    def to_json(self) -> dict:
        return {"m": self.m, "j": self.j, "identify": self.identify, "name": self.name,
                "cells": [{"verts": self.verts[q].tolist(), "masks": self.masks[q].tolist()}
                          for q in range(self.dim + 1)]}

    @classmethod
    def from_json(cls, data: dict) -> "ParamComplex":
        V = np.concatenate([np.asarray(c["verts"], dtype=np.int64).reshape(-1, data["m"]) for c in data["cells"]])
        M = np.concatenate([np.asarray(c["masks"], dtype=np.int64) for c in data["cells"]])
        return cls(data["m"], data["j"], data["identify"], V, M, name=data.get("name", ""))

    def __repr__(self):
        return f"ParamComplex({self.name}, cells={self.counts})"

    @cached_property
    def triangulation(self) -> "Triangulation":
        return Triangulation(self)


# ---------------------------------------------------------------------------
# builders


def _all_cells(m: int, N: int, periodic: bool, keep=None):
    Vs, Ms = [], []
    for q in range(m + 1):
        for S in itertools.combinations(range(m), q):
            axes = [np.arange(N) if (periodic or i in S) else np.arange(N + 1) for i in range(m)]
            grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, m)
            mk = sum(1 << i for i in S)
            if keep is not None:
                grid = grid[keep(grid, S)]
            Vs.append(grid)
            Ms.append(np.full(len(grid), mk, dtype=np.int64))
    return np.concatenate(Vs), np.concatenate(Ms)


def cube(m: int, j: int) -> ParamComplex:
    """The full cube I(m, j)."""
    V, M = _all_cells(m, 3**j, False)
    return ParamComplex(m, j, None, V, M, name=f"I({m},{j})")


def circle(j: int) -> ParamComplex:
    """I(1, j) with 0 ~ 1."""
    if j < 1:
        raise TopologyError("circle needs j >= 1")
    V, M = _all_cells(1, 3**j, True)
    return ParamComplex(1, j, "periodic", V, M, name=f"S1({j})")


def torus2(j: int) -> ParamComplex:
    """I(2, j) with periodic identification of opposite sides."""
    if j < 1:
        raise TopologyError("torus needs j >= 1")
    V, M = _all_cells(2, 3**j, True)
    return ParamComplex(2, j, "periodic", V, M, name=f"T2({j})")


def build_rp(p: int, j: int = 1) -> tuple[ParamComplex, list[int]]:
    """RP^p as the j-subdivided boundary of [0,1]^(p+1) modulo x ~ 1 - x.

    Returns the complex and the vertex sequence of a generator loop of pi_1
    (a path from a point to its antipode, closed in the quotient).
    """
    if p < 1 or j < 1:
        raise TopologyError("build_rp needs p >= 1 and j >= 1")
    m, N = p + 1, 3**j

    def on_boundary(grid, S):
        free = [i for i in range(m) if i not in S]
        if not free:
            return np.zeros(len(grid), dtype=bool)
        sub = grid[:, free]
        return np.any((sub == 0) | (sub == N), axis=1)

    V, M = _all_cells(m, N, False, keep=on_boundary)
    X = ParamComplex(m, j, "antipodal", V, M, name=f"RP{p}({j})")
    return X, generator_loop(X, p)


def generator_loop(X: ParamComplex, p: int) -> list[int]:
    N = X.N
    c = (N - 1) // 2
    cur = np.array([N] + [c] * p, dtype=np.int64)
    path = [cur.copy()]

    def walk(axis, target):
        nonlocal cur
        step = 1 if target > cur[axis] else -1
        while cur[axis] != target:
            cur = cur.copy()
            cur[axis] += step
            path.append(cur)

    walk(1, N)
    walk(0, 0)
    walk(1, c + 1)
    for ax in range(2, p + 1):
        walk(ax, c + 1)
    idx = X.lookup(np.array(path), np.zeros(len(path), dtype=np.int64), 0)
    if idx[0] != idx[-1] or np.any(idx < 0):
        raise TopologyError("generator loop does not close")
    return idx[:-1].tolist()


def loop_edges(X: ParamComplex, loop: list[int]) -> np.ndarray:
    """1-chain (as an edge-index array, with repeats) of a closed vertex loop."""
    out = []
    for a, b in zip(loop, loop[1:] + loop[:1]):
        e = X.edge_index(a, b)
        if e < 0:
            raise TopologyError(f"vertices {a}, {b} are not adjacent")
        out.append(e)
    return np.asarray(out, dtype=np.int64)


def loop_chain(X: ParamComplex, loop: list[int]) -> np.ndarray:
    v = np.zeros(X.n_cells(1), dtype=np.uint8)
    for e in loop_edges(X, loop):
        v[e] ^= 1
    return v


def subdivide(X: ParamComplex, k: int) -> ParamComplex:
    """X(k): the cells of I(m, j + k) contained in cells of X."""
    if k < 0:
        raise TopologyError("k must be >= 0")
    if k == 0:
        return X
    f = 3**k
    Vs, Ms = [], []
    for q in range(X.dim + 1):
        for mk in np.unique(X.masks[q]):
            sel = X.masks[q] == mk
            base = X.verts[q][sel] * f
            S = [i for i in range(X.m) if (int(mk) >> i) & 1]
            for r in range(len(S) + 1):
                for Sp in itertools.combinations(S, r):
                    ranges = [np.arange(f) if i in Sp else (np.arange(f + 1) if i in S else np.arange(1))
                              for i in range(X.m)]
                    off = np.stack(np.meshgrid(*ranges, indexing="ij"), -1).reshape(-1, X.m)
                    W = (base[:, None, :] + off[None, :, :]).reshape(-1, X.m)
                    Vs.append(W)
                    Ms.append(np.full(len(W), sum(1 << i for i in Sp), dtype=np.int64))
    return ParamComplex(X.m, X.j + k, X.identify, np.concatenate(Vs), np.concatenate(Ms),
                        name=f"{X.name}({k})")


def nearest_vertex_map(i: int, j: int) -> Callable[[np.ndarray], np.ndarray]:
    """n(i, j): integer vertex coordinates on the 3^i grid to the nearest
    vertex of the 3^j grid (ties cannot occur since 3^(i-j) is odd)."""
    if j > i:
        raise TopologyError("nearest_vertex_map needs j <= i")
    f = 3 ** (i - j)

    def nmap(v):
        v = np.asarray(v, dtype=np.int64)
        return (v + f // 2) // f

    return nmap


# ---------------------------------------------------------------------------
# subcomplexes


def subcomplex_where(X: ParamComplex, pred) -> ParamComplex:
    """Cells all of whose vertices satisfy ``pred`` (bool per vertex or a
    callable on vertex coordinates in [0,1]^m)."""
    ok = np.asarray(pred(X.vertex_coords) if callable(pred) else pred, dtype=bool)
    if ok.shape != (X.n_cells(0),):
        raise TopologyError("predicate must give one value per vertex")
    masks = [ok[X.cell_vertices[q]].all(axis=1) for q in range(X.dim + 1)]
    return X.subcomplex(masks, name=f"Y({X.name})")


def closure_complement(X: ParamComplex, Y: ParamComplex) -> ParamComplex:
    ym = Y.cell_masks_in(X)
    return X.subcomplex(X.closure_masks([~m for m in ym]), name=f"Z({X.name})")


def union_masks(a: list, b: list) -> list:
    return [x | y for x, y in zip(a, b)]


# ---------------------------------------------------------------------------
# homology and cohomology


def _coboundary_columns(X: ParamComplex, q: int, rel: list | None = None) -> list[int]:
    """delta: C^q -> C^(q+1) as bitset columns over (q+1)-cells, restricted to
    cochains vanishing on ``rel``."""
    if q + 1 > X.dim:
        return [0] * X.n_cells(q)
    B = X.boundaries[q + 1].tocsr()
    keep_rows = None if rel is None else ~rel[q + 1]
    cols = []
    for i in range(X.n_cells(q)):
        r = B.indices[B.indptr[i]:B.indptr[i + 1]]
        if keep_rows is not None:
            r = r[keep_rows[r]]
        b = 0
        for x in r.tolist():
            b ^= 1 << x
        cols.append(b)
    return cols


_RED_CACHE: dict = {}


def _reduction(X: ParamComplex, kind: str, q: int, rel=None) -> gf2.Reduction:
    key = (id(X), kind, q, None if rel is None else tuple(np.packbits(r).tobytes() for r in rel))
    hit = _RED_CACHE.get(key)
    if hit is not None and hit[0] is X:
        return hit[1]
    if kind == "boundary":
        cols = gf2.columns_to_bits(X.boundaries[q]) if 1 <= q <= X.dim else []
        red = gf2.reduce_columns(cols, track=True)
    else:
        cols = _coboundary_columns(X, q, rel)
        if rel is not None:
            cols = [c for c, r in zip(cols, rel[q]) if not r]
        red = gf2.reduce_columns(cols, track=True)
    if len(_RED_CACHE) > 64:
        _RED_CACHE.clear()
    _RED_CACHE[key] = (X, red)
    return red


@dataclass
class Basis:
    degree: int
    vectors: list  # uint8 arrays over q-cells
    pivots: list  # certificate: leading rows after reduction

    @property
    def rank(self) -> int:
        return len(self.vectors)

    def to_json(self) -> dict:
        return {"degree": self.degree, "pivots": self.pivots,
                "vectors": [np.flatnonzero(v).tolist() for v in self.vectors]}


def homology(X: ParamComplex, q: int) -> Basis:
    """Basis of H_q(X; Z2) as cycle representatives."""
    n = X.n_cells(q)
    if q == 0:
        cycles = [1 << i for i in range(n)]
    else:
        cycles = _reduction(X, "boundary", q).kernel
    bnd = _reduction(X, "boundary", q + 1) if q + 1 <= X.dim else gf2.Reduction()
    chosen, piv = gf2.quotient_basis(cycles, bnd)
    return Basis(q, [gf2.bits_to_vector(c, n) for c in chosen], piv)


def cohomology(X: ParamComplex, q: int, rel: list | None = None) -> Basis:
    """Basis of H^q(X, A; Z2) as cocycle representatives (A given by ``rel``)."""
    n = X.n_cells(q)
    free = np.ones(n, dtype=bool) if rel is None else ~rel[q]
    free_idx = np.flatnonzero(free)
    if q < X.dim:
        cocycles = _reduction(X, "coboundary", q, rel).kernel
    else:
        cocycles = [1 << i for i in range(len(free_idx))]
    if q == 0:
        image = gf2.Reduction()
    else:
        image = _reduction(X, "coboundary", q - 1, rel)
    # the coboundary reduction works in full row coordinates; map free-column
    # combinations back to cochains on all q-cells
    vecs = []
    for combo in cocycles:
        v = np.zeros(n, dtype=np.uint8)
        v[free_idx[gf2.bit_indices(combo)]] = 1
        vecs.append(v)
    chosen, piv = gf2.quotient_basis([gf2.vector_to_bits(v) for v in vecs], image)
    return Basis(q, [gf2.bits_to_vector(c, n) for c in chosen], piv)


def betti(X: ParamComplex) -> list[int]:
    return [homology(X, q).rank for q in range(X.dim + 1)]


def coboundary(X: ParamComplex, q: int, cochain) -> np.ndarray:
    """delta of a cellular q-cochain."""
    c = np.asarray(cochain, dtype=np.int64)
    if q + 1 > X.dim:
        return np.zeros(0, dtype=np.uint8)
    return ((X.boundaries[q + 1].T @ c) % 2).astype(np.uint8)


def is_coboundary(X: ParamComplex, q: int, cochain, rel: list | None = None) -> bool:
    v = np.asarray(cochain, dtype=np.uint8) % 2
    if rel is not None and np.any(v[rel[q]]):
        raise TopologyError("relative cochain does not vanish on the subcomplex")
    if not v.any():
        return True
    if q == 0:
        return False
    return _reduction(X, "coboundary", q - 1, rel).contains(gf2.vector_to_bits(v))


# ---------------------------------------------------------------------------
# triangulation and cup products


class Triangulation:
    """Kuhn triangulation of a ParamComplex with a global vertex order."""

    def __init__(self, X: ParamComplex, order: np.ndarray | None = None):
        self.X = X
        nv = X.n_cells(0)
        # rank[v] = position of vertex v in the global order (default: index
        # order, i.e. lexicographic on canonical coordinates)
        self.rank = np.arange(nv) if order is None else np.argsort(np.asarray(order))
        self.simplices, self.carrier, self._keys, self._korder = [], [], [], []
        for r in range(X.dim + 1):
            simp, carr = self._enumerate(r)
            srt = np.argsort(self.rank[simp], axis=1)
            simp = np.take_along_axis(simp, srt, axis=1)
            keys = self._key(simp)
            ko = np.argsort(keys)
            if len(keys) > 1 and np.any(np.diff(keys[ko]) == 0):
                raise TopologyError("Kuhn triangulation is degenerate at this subdivision level")
            self.simplices.append(simp)
            self.carrier.append(carr)
            self._keys.append(keys[ko])
            self._korder.append(ko)

    def _key(self, simp: np.ndarray) -> np.ndarray:
        nv = self.X.n_cells(0)
        s = np.sort(simp, axis=1)
        k = np.zeros(len(s), dtype=np.int64)
        for i in range(s.shape[1]):
            k = k * nv + s[:, i]
        return k

    def _enumerate(self, r: int):
        """r-simplices: chains in cells (v, S) from ordered partitions of S
        into r nonempty blocks."""
        X = self.X
        simps, carr = [], []
        for q in range(r, X.dim + 1):
            V, M = X.verts[q], X.masks[q]
            for mk in np.unique(M):
                sel = np.flatnonzero(M == mk)
                S = [i for i in range(X.m) if (int(mk) >> i) & 1]
                for labels in itertools.product(range(r), repeat=q):
                    if len(set(labels)) != r:
                        continue
                    verts = [V[sel]]
                    cur = V[sel].copy()
                    for b in range(r):
                        cur = cur.copy()
                        for s, lab in zip(S, labels):
                            if lab == b:
                                cur[:, s] += 1
                        verts.append(cur)
                    ids = np.stack([X.lookup(w, np.zeros(len(w), dtype=np.int64), 0) for w in verts], axis=1)
                    simps.append(ids)
                    carr.append(sel)
        if not simps:
            return np.zeros((0, r + 1), dtype=np.int64), np.zeros(0, dtype=np.int64)
        return np.concatenate(simps), np.concatenate(carr)

    def n_simplices(self, r: int) -> int:
        return len(self.simplices[r]) if 0 <= r < len(self.simplices) else 0

    def index(self, r: int, simp: np.ndarray) -> np.ndarray:
        keys = self._key(simp)
        pos = np.searchsorted(self._keys[r], keys)
        pos = np.minimum(pos, len(self._keys[r]) - 1)
        if np.any(self._keys[r][pos] != keys):
            raise TopologyError("simplex not in the triangulation")
        return self._korder[r][pos]

    @cached_property
    def subdivision(self) -> list:
        """sd_q as a sparse (q-cells x q-simplices) incidence matrix."""
        out = []
        for r in range(len(self.simplices)):
            n_s = self.n_simplices(r)
            # simplices enumerated first for q == r carry the full-dimensional
            # Kuhn simplices of q-cells; find them through their carrier dim
            is_top = self._carrier_dim(r) == r
            rows = self.carrier[r][is_top]
            cols = np.flatnonzero(is_top)
            out.append(sp.csr_matrix((np.ones(len(rows), dtype=np.int64), (rows, cols)),
                                     shape=(self.X.n_cells(r), n_s)))
        return out

    def _carrier_dim(self, r: int) -> np.ndarray:
        X = self.X
        # the enumeration loops over carrier dimensions q = r..dim in order
        sizes = [X.n_cells(q) * _ordered_partitions(q, r) for q in range(r, X.dim + 1)]
        return np.repeat(np.arange(r, X.dim + 1), sizes)

    @cached_property
    def edge_lift(self) -> sp.csr_matrix:
        """(simplicial edges x cubical edges): each simplicial edge v -> v + 1_T
        as the sum of the cube edges on the monotone path in increasing axis
        order.  Applied to a cellular 1-cocycle it gives the simplicial one."""
        X = self.X
        carr = self.carrier[1]
        cdim = self._carrier_dim(1)
        rows, cols = [], []
        for q in range(1, X.dim + 1):
            sel = np.flatnonzero(cdim == q)
            cells = carr[sel]
            V, M = X.verts[q][cells], X.masks[q][cells]
            cur = V.copy()
            for i in range(X.m):
                on = ((M >> i) & 1).astype(bool)
                if not on.any():
                    continue
                e = X.lookup(cur[on], np.full(on.sum(), 1 << i), 1)
                rows.append(sel[on])
                cols.append(e)
                cur[on, i] += 1
        r, c = np.concatenate(rows), np.concatenate(cols)
        L = sp.csr_matrix((np.ones(len(r), dtype=np.int64), (r, c)), shape=(self.n_simplices(1), X.n_cells(1)))
        return L

    def lift(self, q: int, cochain) -> np.ndarray:
        """Cellular cochain of degree 0 or 1 to a simplicial cochain."""
        c = np.asarray(cochain, dtype=np.int64) % 2
        if q == 0:
            return c.astype(np.uint8)
        if q == 1:
            return ((self.edge_lift @ c) % 2).astype(np.uint8)
        raise TopologyError("only degree 0 and 1 cochains lift through edge paths")

    def push(self, q: int, cochain) -> np.ndarray:
        """sd^*: simplicial q-cochain to cellular q-cochain."""
        c = np.asarray(cochain, dtype=np.int64) % 2
        return ((self.subdivision[q] @ c) % 2).astype(np.uint8)

    def cup(self, a: int, alpha, b: int, beta) -> np.ndarray:
        """Simplicial cup product: (alpha u beta)(s) = alpha(front_a s) beta(back_b s)."""
        r = a + b
        if r >= len(self.simplices):
            return np.zeros(0, dtype=np.uint8)
        simp = self.simplices[r]
        if len(simp) == 0:
            return np.zeros(0, dtype=np.uint8)
        fa = self.index(a, simp[:, :a + 1])
        bb = self.index(b, simp[:, a:])
        return (np.asarray(alpha)[fa] & np.asarray(beta)[bb]).astype(np.uint8)

    def coboundary(self, r: int, cochain) -> np.ndarray:
        """Simplicial delta of an r-cochain."""
        if r + 1 >= len(self.simplices):
            return np.zeros(0, dtype=np.uint8)
        simp = self.simplices[r + 1]
        c = np.asarray(cochain, dtype=np.uint8)
        out = np.zeros(len(simp), dtype=np.uint8)
        for drop in range(r + 2):
            face = np.delete(simp, drop, axis=1)
            out ^= c[self.index(r, face)]
        return out

    def in_subcomplex(self, r: int, cell_masks: list) -> np.ndarray:
        """Simplices whose carrier cell lies in the subcomplex."""
        cdim = self._carrier_dim(r)
        out = np.zeros(self.n_simplices(r), dtype=bool)
        for q in range(r, self.X.dim + 1):
            sel = cdim == q
            out[sel] = cell_masks[q][self.carrier[r][sel]]
        return out


def _ordered_partitions(q: int, r: int) -> int:
    """Number of surjections from a q-set onto r ordered blocks."""
    return sum((-1) ** i * math.comb(r, i) * (r - i) ** q for i in range(r + 1))


@dataclass
class CohomologyClass:
    """Cohomology class given by a cocycle.

    ``level`` is ``"cell"`` (cellular cochain on X) or ``"simplex"`` (cochain
    on X's Kuhn triangulation ``tri``).  ``rel`` holds the cell masks of the
    subcomplex the cochain vanishes on (None for absolute classes).
    """

    complex: ParamComplex
    degree: int
    cochain: np.ndarray
    level: str = "cell"
    rel: list | None = None
    tri: Triangulation | None = None

    def triangulation(self) -> Triangulation:
        return self.tri if self.tri is not None else self.complex.triangulation

    def simplicial(self) -> np.ndarray:
        if self.level == "simplex":
            return self.cochain
        return self.triangulation().lift(self.degree, self.cochain)

    def cellular(self) -> np.ndarray:
        if self.level == "cell":
            return self.cochain
        return self.triangulation().push(self.degree, self.cochain)

    def is_cocycle(self) -> bool:
        if self.level == "cell":
            return not coboundary(self.complex, self.degree, self.cochain).any()
        return not self.triangulation().coboundary(self.degree, self.cochain).any()

    def is_zero(self) -> bool:
        if self.degree > self.complex.dim:
            return True
        return is_coboundary(self.complex, self.degree, self.cellular(), self.rel)

    def __eq__(self, other):
        if not isinstance(other, CohomologyClass):
            return NotImplemented
        if other.complex is not self.complex or other.degree != self.degree:
            return False
        diff = self.cellular() ^ other.cellular()
        rel = self.rel if self.rel is not None else other.rel
        return is_coboundary(self.complex, self.degree, diff, rel)

    def to_json(self) -> dict:
        return {"degree": self.degree, "level": self.level,
                "support": np.flatnonzero(self.cochain).tolist(), "complex": self.complex.name}


def cohomology_classes(X: ParamComplex, q: int, rel: list | None = None) -> list[CohomologyClass]:
    return [CohomologyClass(X, q, v, "cell", rel) for v in cohomology(X, q, rel).vectors]


def unit_class(X: ParamComplex) -> CohomologyClass:
    return CohomologyClass(X, 0, np.ones(X.n_cells(0), dtype=np.uint8))


def cup(alpha: CohomologyClass, beta: CohomologyClass, tri: Triangulation | None = None) -> CohomologyClass:
    if alpha.complex is not beta.complex:
        raise TopologyError("classes live on different complexes")
    X = alpha.complex
    tri = tri or alpha.tri or beta.tri or X.triangulation
    a = alpha if alpha.tri is tri or alpha.level == "cell" else None
    b = beta if beta.tri is tri or beta.level == "cell" else None
    if a is None or b is None:
        raise TopologyError("simplicial classes on different triangulations")
    ca = alpha.cochain if alpha.level == "simplex" else tri.lift(alpha.degree, alpha.cochain)
    cb = beta.cochain if beta.level == "simplex" else tri.lift(beta.degree, beta.cochain)
    rel = None
    if alpha.rel is not None or beta.rel is not None:
        ra = alpha.rel or [np.zeros(X.n_cells(q), bool) for q in range(X.dim + 1)]
        rb = beta.rel or [np.zeros(X.n_cells(q), bool) for q in range(X.dim + 1)]
        rel = union_masks(ra, rb)
    prod = tri.cup(alpha.degree, ca, beta.degree, cb)
    return CohomologyClass(X, alpha.degree + beta.degree, prod, "simplex", rel, tri)


def cup_power(lam: CohomologyClass, p: int, tri: Triangulation | None = None) -> CohomologyClass:
    if p < 1:
        raise TopologyError("cup power needs p >= 1")
    out = lam
    for _ in range(p - 1):
        out = cup(lam, out, tri)
    return out


def relative_cohomology(X: ParamComplex, A: ParamComplex, q: int) -> Basis:
    return cohomology(X, q, A.cell_masks_in(X))


def relative_class(X: ParamComplex, A: ParamComplex, q: int, cochain) -> CohomologyClass:
    rel = A.cell_masks_in(X)
    c = np.asarray(cochain, dtype=np.uint8)
    if np.any(c[rel[q]]):
        raise TopologyError("cochain does not vanish on the subcomplex")
    return CohomologyClass(X, q, c, "cell", rel)


def relative_cup(alpha: CohomologyClass, beta: CohomologyClass) -> CohomologyClass:
    return cup(alpha, beta)


def restrict_class(alpha: CohomologyClass, Y: ParamComplex) -> CohomologyClass:
    """Pullback of a cellular class along the inclusion Y -> X."""
    if alpha.level != "cell":
        raise TopologyError("restriction expects a cellular cochain")
    Yidx = alpha.complex.lookup(Y.verts[alpha.degree], Y.masks[alpha.degree], alpha.degree)
    return CohomologyClass(Y, alpha.degree, np.asarray(alpha.cochain)[Yidx].astype(np.uint8))


def evaluate(alpha: CohomologyClass, cycle) -> int:
    """Pairing of a cellular cocycle with a cellular cycle (mod 2)."""
    c = np.asarray(cycle, dtype=np.int64)
    return int(np.sum(alpha.cellular().astype(np.int64) * c) % 2)
