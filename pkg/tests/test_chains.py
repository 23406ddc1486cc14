import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from minmax_lab import chains as ch
from minmax_lab import models as md

SMALL = {
    "octahedron": md.build_octahedron,
    "icosahedron": md.build_icosahedron,
    "torus3": lambda: md.build_torus(1, 3),
    "torus4": lambda: md.build_torus(1, 4),
}
CX = {k: f() for k, f in SMALL.items()}


def _weighted(cx, seed):
    rng = np.random.default_rng(seed)
    return ch.reweighted(cx, {d: rng.uniform(0.5, 2.0, cx.n_cells(d)) for d in (cx.n, cx.dim)})


@pytest.mark.parametrize("name", sorted(CX))
def test_complex_is_closed_and_consistent(name):
    cx = CX[name]
    cx.check()
    assert cx.cofaces.shape == (cx.n_cells(cx.n), 2)


@pytest.mark.parametrize("name", sorted(CX))
@given(seed=st.integers(0, 2**31 - 1))
def test_boundary_of_boundary_vanishes(name, seed):
    cx = CX[name]
    rng = np.random.default_rng(seed)
    for d in range(2, cx.dim + 1):
        c = ch.Mod2Chain.from_mask(cx, d, rng.random(cx.n_cells(d)) < 0.5)
        assert ch.boundary(ch.boundary(c)).is_empty()


def test_add_is_symmetric_difference():
    cx = CX["octahedron"]
    a, b = cx.chain(1, [0, 1, 2]), cx.chain(1, [2, 3])
    assert ch.add(a, b) == cx.chain(1, [0, 1, 3])
    assert ch.add(a, a).is_empty()


def test_foreign_and_mismatched_chains_rejected():
    a = CX["octahedron"].chain(1, [0])
    with pytest.raises(ch.ChainError):
        ch.add(a, CX["icosahedron"].chain(1, [0]))
    with pytest.raises(ch.ChainError):
        ch.add(a, CX["octahedron"].chain(2, [0]))


def test_octahedron_equator_flat_norm():
    cx = CX["octahedron"]
    z = np.asarray(cx.centers[1])[:, 2]
    eq = cx.chain(1, np.flatnonzero(np.abs(z) < 1e-12))
    assert len(eq) == 4
    # a hemisphere (4 faces of area sqrt(3)/2) beats the 4 edges of length sqrt(2)
    assert math.isclose(ch.mass(eq), 4 * math.sqrt(2), rel_tol=1e-12)
    assert math.isclose(ch.flat_norm(eq).cost, 2 * math.sqrt(3), rel_tol=1e-12)


@pytest.mark.parametrize("name", sorted(CX))
@pytest.mark.parametrize("weighted", [False, True])
@settings(max_examples=12)
@given(seed=st.integers(0, 2**31 - 1))
def test_flat_norm_matches_exhaustive(name, weighted, seed):
    cx = _weighted(CX[name], seed) if weighted else CX[name]
    rng = np.random.default_rng(seed)
    t = ch.boundary(ch.Mod2Chain.from_mask(cx, cx.dim, rng.random(cx.n_cells(cx.dim)) < rng.random()))
    fast, slow = ch.flat_norm(t), ch.flat_norm_exhaustive(t)
    assert math.isclose(fast.cost, slow.cost, rel_tol=1e-12, abs_tol=1e-12)
    # the returned decomposition realizes the cost
    assert ch.add(t, ch.boundary(fast.chain)) == fast.defect
    assert math.isclose(ch.mass(fast.chain) + ch.mass(fast.defect), fast.cost, rel_tol=1e-12)


@given(seed=st.integers(0, 2**31 - 1))
def test_flat_norm_bounded_by_mass_and_filling(seed):
    cx = md.build_torus(1, 9)
    rng = np.random.default_rng(seed)
    A = ch.Mod2Chain.from_mask(cx, cx.dim, rng.random(cx.n_cells(cx.dim)) < 0.3)
    t = ch.boundary(A)
    fn = ch.flat_norm(t).cost
    assert fn <= ch.mass(t) + 1e-12
    assert fn <= min(ch.mass(A), cx.total_volume - ch.mass(A)) + 1e-12


def test_flat_norm_rejects_non_cycle():
    cx = CX["octahedron"]
    with pytest.raises(ch.NotACycleError):
        ch.flat_norm(cx.chain(1, [0]))


def test_essential_cycle_has_no_filling():
    cx = md.build_torus(1, 4)
    # a vertical grid line on the torus is not a boundary
    x = np.asarray(cx.centers[1])
    vertical = np.flatnonzero((np.abs(x[:, 0] - 0.0) < 1e-9) | (np.abs(x[:, 0] - 1.0) < 1e-9))
    line = cx.chain(1, vertical)
    assert ch.is_cycle(line) and len(line) == 4
    with pytest.raises(ch.EssentialCycleError):
        ch.filling_of(line)


@given(seed=st.integers(0, 2**31 - 1))
def test_isoperimetric_choice_is_the_lighter_filling(seed):
    cx = md.build_torus(1, 6)
    rng = np.random.default_rng(seed)
    A = rng.random(cx.n_cells(cx.dim)) < 0.3
    s = cx.chain(cx.n, ch.boundary(ch.Mod2Chain.from_mask(cx, cx.dim, rng.random(len(A)) < 0.5)).cells)
    t = cx.chain(cx.n, ch.add(s, ch.boundary(ch.Mod2Chain.from_mask(cx, cx.dim, A))).cells)
    m = A.sum() / len(A)
    if math.isclose(m, 0.5):
        with pytest.raises(ch.FillingTieError):
            ch.isoperimetric_choice(s, t)
        return
    got = ch.isoperimetric_choice(s, t)
    want = A if m < 0.5 else ~A
    assert got == ch.Mod2Chain.from_mask(cx, cx.dim, want)


def test_flat_distance_is_symmetric_and_zero_on_diagonal():
    cx = md.build_torus(1, 6)
    rng = np.random.default_rng(3)
    s = ch.boundary(ch.Mod2Chain.from_mask(cx, 2, rng.random(36) < 0.4))
    t = ch.boundary(ch.Mod2Chain.from_mask(cx, 2, rng.random(36) < 0.4))
    assert ch.flat_distance(s, s) == 0.0
    assert math.isclose(ch.flat_distance(s, t), ch.flat_distance(t, s))


def test_complex_json_round_trip():
    cx = _weighted(CX["torus3"], 1)
    back = ch.AmbientComplex.from_json(cx.to_json())
    assert back.name == cx.name
    for d in range(cx.dim + 1):
        np.testing.assert_allclose(back.weights[d], cx.weights[d])
    for d in range(1, cx.dim + 1):
        assert (back.boundary_matrix(d) != cx.boundary_matrix(d)).nnz == 0


@pytest.mark.parametrize("center", [(0.5, 0.5), (0.1, 0.93)])
def test_cut_mass_profile_matches_direct_slices(center):
    cx = md.build_torus(1, 27)
    f = md.morse_direction(cx, 0)
    q = md.sublevel_region(f, md.volume_quantile(f, 0.4))
    radii = np.linspace(0.0, 0.49, 25)
    prof = ch.cut_mass_profile(q, np.array(center), radii)
    direct = [ch.mass(ch.slice_cut(q, np.array(center), r)) for r in radii]
    np.testing.assert_allclose(prof, direct, atol=1e-12)


def test_slice_radius_is_the_lightest_in_range():
    cx = md.build_torus(1, 27)
    f = md.morse_direction(cx, 0)
    q = md.sublevel_region(f, md.volume_quantile(f, 0.5))
    c, r = np.array([0.3, 0.6]), 0.2
    s = ch.slice_radius(q, c, r)
    assert r / 2 <= s <= r
    grid = np.linspace(r / 2, r, 200)
    assert ch.mass(ch.slice_cut(q, c, s)) <= min(ch.mass(ch.slice_cut(q, c, x)) for x in grid) + 1e-12
    with pytest.raises(ch.ChainError):
        ch.slice_radius(q, c, 0.6)
