import numpy as np
import pytest
from hypothesis import given, strategies as st

from minmax_lab import param as pt


@pytest.mark.parametrize("X,betti", [
    (pt.circle(1), [1, 1]),
    (pt.circle(2), [1, 1]),
    (pt.torus2(1), [1, 2, 1]),
    (pt.cube(2, 1), [1, 0, 0]),
    (pt.cube(3, 1), [1, 0, 0, 0]),
    (pt.build_rp(1)[0], [1, 1]),
    (pt.build_rp(2)[0], [1, 1, 1]),
    (pt.build_rp(3)[0], [1, 1, 1, 1]),
    (pt.build_rp(2, 2)[0], [1, 1, 1]),
])
def test_mod2_betti_numbers(X, betti):
    assert pt.betti(X) == betti
    assert X.euler_characteristic() == sum((-1) ** q * b for q, b in enumerate(betti))


@pytest.mark.parametrize("X", [pt.torus2(1), pt.build_rp(2)[0], pt.build_rp(3)[0], pt.cube(2, 1)])
def test_boundary_squares_to_zero(X):
    for q in range(2, X.dim + 1):
        assert not np.any((X._boundary(q - 1) @ X._boundary(q)).toarray() % 2)


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_generator_loop_pairs_with_lambda(p):
    X, loop = pt.build_rp(p)
    lam = pt.cohomology_classes(X, 1)[0]
    assert pt.evaluate(lam, pt.loop_chain(X, loop)) == 1


@pytest.mark.parametrize("p", [1, 2, 3])
def test_cup_powers_of_lambda(p):
    X, _ = pt.build_rp(p)
    lam = pt.cohomology_classes(X, 1)[0]
    assert not pt.cup_power(lam, p).is_zero()
    assert pt.cup_power(lam, p + 1).is_zero()


def test_torus_cup_products():
    T = pt.torus2(1)
    a, b = pt.cohomology_classes(T, 1)
    assert not pt.cup(a, b).is_zero()
    assert pt.cup(a, a).is_zero() and pt.cup(b, b).is_zero()
    # graded commutativity holds mod 2 without signs
    assert pt.cup(a, b) == pt.cup(b, a)


def test_unit_class_is_identity_for_cup():
    X, _ = pt.build_rp(2)
    lam = pt.cohomology_classes(X, 1)[0]
    assert pt.cup(pt.unit_class(X), lam) == lam


@given(seed=st.integers(0, 2**31 - 1))
def test_coboundary_is_zero_in_cohomology(seed):
    X, _ = pt.build_rp(2)
    rng = np.random.default_rng(seed)
    f = rng.integers(0, 2, X.n_cells(0)).astype(np.uint8)
    df = pt.coboundary(X, 0, f)
    assert not np.any(pt.coboundary(X, 1, df))
    assert pt.is_coboundary(X, 1, df)
    lam = pt.cohomology_classes(X, 1)[0]
    shifted = pt.CohomologyClass(X, 1, lam.cochain ^ df)
    assert shifted == lam and not shifted.is_zero()


@pytest.mark.parametrize("X", [pt.torus2(1), pt.build_rp(2)[0]])
def test_subdivision_preserves_betti(X):
    assert pt.betti(pt.subdivide(X, 1)) == pt.betti(X)


def test_subdivide_rejects_negative():
    with pytest.raises(pt.TopologyError):
        pt.subdivide(pt.circle(1), -1)


@given(i=st.integers(1, 4), d=st.integers(0, 3), v=st.integers(0, 3**4))
def test_nearest_vertex_map_rounds(i, d, v):
    j = max(i - d, 0)
    v = v % (3**i + 1)
    got = int(pt.nearest_vertex_map(i, j)(np.array([v]))[0])
    f = 3 ** (i - j)
    assert abs(got * f - v) <= f // 2


def test_nearest_vertex_map_rejects_refinement():
    with pytest.raises(pt.TopologyError):
        pt.nearest_vertex_map(1, 2)


def test_subcomplex_and_closure_complement_cover():
    X, _ = pt.build_rp(2)
    Y = pt.subcomplex_where(X, lambda x: x[:, 0] < 0.5)
    Z = pt.closure_complement(X, Y)
    ym, zm = Y.cell_masks_in(X), Z.cell_masks_in(X)
    for q in range(X.dim + 1):
        assert np.all(ym[q] | zm[q])
    assert Y.n_cells(0) < X.n_cells(0)


def test_restriction_to_a_disc_kills_lambda():
    X, _ = pt.build_rp(2)
    lam = pt.cohomology_classes(X, 1)[0]
    # an open chart around an interior point of one face is contractible
    disc = pt.subcomplex_where(X, lambda x: (x[:, 0] == 0) & (np.abs(x[:, 1:] - 0.5).max(axis=1) < 0.4))
    assert disc.n_cells(0) > 0
    assert pt.restrict_class(lam, disc).is_zero()


def test_relative_cohomology_of_cube():
    X = pt.cube(2, 1)
    A = pt.subcomplex_where(X, lambda x: np.any((x == 0) | (x == 1), axis=1))
    ranks = [pt.relative_cohomology(X, A, q).rank for q in range(3)]
    assert ranks == [0, 0, 1]


def test_json_round_trip():
    X, _ = pt.build_rp(2)
    Y = pt.ParamComplex.from_json(X.to_json())
    assert Y.counts == X.counts
    assert pt.betti(Y) == pt.betti(X)


def test_build_rp_rejects_bad_input():
    with pytest.raises(pt.TopologyError):
        pt.build_rp(0)
