import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from minmax_lab import crofton as cr

BASIS = cr.harmonic_basis()


def test_great_circles_are_orthonormal_frames():
    u, w = cr.great_circles(1000, 0)
    np.testing.assert_allclose(np.linalg.norm(u, axis=1), 1, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(w, axis=1), 1, atol=1e-12)
    np.testing.assert_allclose(np.sum(u * w, axis=1), 0, atol=1e-12)


def test_great_circles_roughly_isotropic():
    u, _ = cr.great_circles(20000, 1)
    np.testing.assert_allclose(u.T @ u / len(u), np.eye(4) / 4, atol=0.01)


def test_basis_is_fourteen_independent_harmonics():
    assert len(BASIS) == 14
    H = np.array([np.concatenate([h.Q.ravel(), h.b, [h.c]]) for h in BASIS])
    assert np.linalg.matrix_rank(H) == 14
    # quadratic members are traceless, hence harmonic
    for h in BASIS:
        assert abs(np.trace(h.Q)) < 1e-15


@pytest.mark.parametrize("i", range(1, 5))
def test_coordinate_great_sphere_area(i):
    m, top = cr.crofton_mass(BASIS[i], 20000, 3)
    # a great sphere meets every great circle in exactly two points
    assert m == pytest.approx(4 * math.pi, rel=1e-12)
    assert top == 2


def test_clifford_torus_area():
    m, top = cr.crofton_mass(BASIS[5], 50000, 4)
    assert m == pytest.approx(2 * math.pi**2, rel=0.02)
    assert top <= 4


def test_lineset_matches_direct_counts():
    ls = cr.LineSet(500, 7, 256)
    rng = np.random.default_rng(0)
    h = cr.combine(BASIS, rng.standard_normal(14))
    direct = cr.crossing_counts(h, ls.u, ls.w, 256)
    np.testing.assert_array_equal(ls.counts(h), direct)


@given(seed=st.integers(0, 2**31 - 1))
def test_trig_restriction_is_exact(seed):
    rng = np.random.default_rng(seed)
    ls = cr.LineSet(20, seed % 1000, 64)
    h = cr.combine(BASIS, rng.standard_normal(14))
    C = ls.coefficients(h)
    pts = np.cos(ls.t)[None, :, None] * ls.u[:, None] + np.sin(ls.t)[None, :, None] * ls.w[:, None]
    direct = h(pts.reshape(-1, 4)).reshape(20, 64)
    np.testing.assert_allclose(C @ ls.trig, direct, atol=1e-10)


@given(seed=st.integers(0, 2**31 - 1))
def test_batch_counts_match_single(seed):
    rng = np.random.default_rng(seed)
    ls = cr.LineSet(200, 5, 128)
    A = rng.standard_normal((5, 14))
    batch = ls.batch_counts(BASIS, A, chunk=2)
    for row, a in zip(batch, A):
        np.testing.assert_array_equal(row, ls.counts(cr.combine(BASIS, a)))


@given(seed=st.integers(0, 2**31 - 1))
def test_sampled_counts_agree_with_exact_roots(seed):
    rng = np.random.default_rng(seed)
    ls = cr.LineSet(50, seed % 997, 2048)
    h = cr.combine(BASIS, rng.standard_normal(14))
    exact = cr.exact_trig_roots(ls.coefficients(h))
    sampled = ls.counts(h)
    # a degree 2 trig polynomial has at most 4 zeros; fine sampling only misses near-tangent pairs
    assert exact.max() <= 4 and sampled.max() <= 4
    assert np.mean(exact == sampled) >= 0.96
    assert np.all((exact - sampled) % 2 == 0)


def test_combine_rejects_bad_vectors():
    with pytest.raises(ValueError):
        cr.combine(BASIS, np.zeros(14))
    with pytest.raises(ValueError):
        cr.combine(BASIS, np.ones(3))


def test_crofton_mass_needs_lines():
    with pytest.raises(ValueError):
        cr.crofton_mass(BASIS[1], 0, 0)


def test_nonfinite_field_rejected():
    u, w = cr.great_circles(4, 0)
    with pytest.raises(ValueError):
        cr.crossing_counts(lambda x: np.full(len(x), np.nan), u, w, 16)
