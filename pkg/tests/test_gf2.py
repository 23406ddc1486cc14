import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from minmax_lab import gf2

matrices = arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=st.integers(0, 1))


def dense_rank(M):
    """Row reduction on a dense copy; independent of the bitset code."""
    M = M.copy() % 2
    r = 0
    for c in range(M.shape[1]):
        rows = np.flatnonzero(M[r:, c]) + r
        if len(rows) == 0:
            continue
        M[[r, rows[0]]] = M[[rows[0], r]]
        for i in np.flatnonzero(M[:, c]):
            if i != r:
                M[i] ^= M[r]
        r += 1
        if r == M.shape[0]:
            break
    return r


@given(M=matrices)
def test_rank_matches_dense_elimination(M):
    assert gf2.rank(gf2.columns_to_bits(sp.csc_matrix(M))) == dense_rank(M)


@given(M=matrices)
def test_tracked_kernel_combinations_vanish(M):
    cols = gf2.columns_to_bits(sp.csc_matrix(M))
    red = gf2.reduce_columns(cols, track=True)
    assert red.rank + len(red.kernel) == len(cols)
    for combo in red.kernel:
        acc = 0
        for j in gf2.bit_indices(combo):
            acc ^= cols[j]
        assert acc == 0 and combo != 0


@given(M=matrices, data=st.data())
def test_span_membership(M, data):
    cols = gf2.columns_to_bits(sp.csc_matrix(M))
    pick = data.draw(st.lists(st.integers(0, len(cols) - 1), max_size=5))
    v = 0
    for j in pick:
        v ^= cols[j]
    assert gf2.in_span(cols, v)
    red = gf2.reduce_columns(cols)
    r, _ = gf2.reduce_columns(cols, track=True).reduce_tracked(v)
    assert r == 0 and red.reduce(v) == 0


@given(v=arrays(np.uint8, st.integers(1, 70), elements=st.integers(0, 1)))
def test_bit_round_trip(v):
    b = gf2.vector_to_bits(v)
    np.testing.assert_array_equal(gf2.bits_to_vector(b, len(v)), v)
    assert gf2.bit_indices(b) == np.flatnonzero(v).tolist()


def test_bits_to_vector_rejects_overflow():
    with pytest.raises(ValueError):
        gf2.bits_to_vector(1 << 10, 4)


def test_quotient_basis_picks_independent_classes():
    modulo = gf2.reduce_columns([0b0011])
    chosen, pivots = gf2.quotient_basis([0b0001, 0b0010, 0b0100, 0b0110], modulo)
    # 0b0010 = 0b0001 mod 0b0011, and 0b0110 = 0b0100 + 0b0010
    assert chosen == [0b0001, 0b0100]
    assert len(set(pivots)) == 2
