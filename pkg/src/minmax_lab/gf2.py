"""Sparse linear algebra over GF(2).

Vectors are Python ints used as bitsets (bit i set <=> coordinate i is 1).
Column reduction follows the standard persistence scheme: a column's pivot
is its highest set bit and each pivot is owned by at most one column.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


def columns_to_bits(M: sp.spmatrix) -> list[int]:
    """Sparse 0/1 matrix (mod 2) to a list of bitset columns."""
    M = sp.csc_matrix(M)
    out = []
    for j in range(M.shape[1]):
        rows = M.indices[M.indptr[j]:M.indptr[j + 1]]
        vals = M.data[M.indptr[j]:M.indptr[j + 1]] % 2
        b = 0
        for r in rows[vals == 1].tolist():
            b ^= 1 << r
        out.append(b)
    return out


def vector_to_bits(v) -> int:
    b = 0
    for i in np.flatnonzero(np.asarray(v) % 2).tolist():
        b |= 1 << i
    return b


def bits_to_vector(b: int, length: int) -> np.ndarray:
    out = np.zeros(length, dtype=np.uint8)
    i = 0
    while b:
        if b & 1:
            out[i] = 1
        b >>= 1
        i += 1
        if i > length:
            raise ValueError("bitset longer than the requested length")
    return out


def bit_indices(b: int) -> list[int]:
    out = []
    while b:
        low = b & -b
        out.append(low.bit_length() - 1)
        b ^= low
    return out


@dataclass
class Reduction:
    """Reduced column basis with a pivot table.

    ``pivots`` maps pivot row -> reduced column; ``sources`` maps pivot row
    -> the combination of input columns that produced it (bitset over input
    indices) when tracking was requested.
    """

    pivots: dict = field(default_factory=dict)
    sources: dict = field(default_factory=dict)
    kernel: list = field(default_factory=list)

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def reduce(self, v: int) -> int:
        """Residue of ``v`` modulo the span of the reduced columns."""
        piv = self.pivots
        while v:
            low = v.bit_length() - 1
            col = piv.get(low)
            if col is None:
                return v
            v ^= col
        return 0

    def reduce_tracked(self, v: int) -> tuple[int, int]:
        """Residue and the combination of input columns that was subtracted."""
        piv, src = self.pivots, self.sources
        combo = 0
        while v:
            low = v.bit_length() - 1
            col = piv.get(low)
            if col is None:
                break
            v ^= col
            combo ^= src[low]
        return v, combo

    def contains(self, v: int) -> bool:
        return self.reduce(v) == 0

    def certificate(self) -> list[int]:
        return sorted(self.pivots)


def reduce_columns(cols, track: bool = False, base: Reduction | None = None) -> Reduction:
    """Column-reduce ``cols``; with ``track`` also record kernel combinations."""
    red = base if base is not None else Reduction()
    piv, src = red.pivots, red.sources
    for j, c in enumerate(cols):
        combo = (1 << j) if track else 0
        while c:
            low = c.bit_length() - 1
            other = piv.get(low)
            if other is None:
                break
            c ^= other
            if track:
                combo ^= src[low]
        if c:
            piv[c.bit_length() - 1] = c
            if track:
                src[c.bit_length() - 1] = combo
        elif track:
            red.kernel.append(combo)
    return red


def rank(cols) -> int:
    return reduce_columns(cols).rank


def in_span(cols, v: int) -> bool:
    return reduce_columns(cols).contains(v)


def quotient_basis(vectors, modulo: Reduction) -> tuple[list[int], list[int]]:
    """Select vectors independent modulo ``modulo``.

    Returns the chosen original vectors and their pivot rows (the certificate:
    after reduction by ``modulo`` and the earlier choices, each chosen vector
    has a distinct leading bit).
    """
    red = Reduction(dict(modulo.pivots))
    chosen, pivots = [], []
    for v in vectors:
        r = red.reduce(v)
        if r:
            red.pivots[r.bit_length() - 1] = r
            chosen.append(v)
            pivots.append(r.bit_length() - 1)
    return chosen, pivots
