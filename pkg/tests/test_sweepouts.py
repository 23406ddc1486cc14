import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from hypothesis.extra.numpy import arrays

from minmax_lab import almgren as am
from minmax_lab import chains as ch
from minmax_lab import models as md
from minmax_lab import sweepouts as sw

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


@pytest.fixture(scope="module")
def torus81():
    cx = md.build_torus(1, 81)
    f = md.morse_direction(cx, 0)
    return f, am.calibrate_threshold(f)["threshold"]


@given(vals=arrays(float, 12, elements=finite), roots=arrays(float, 3, elements=finite))
def test_roots_rule_matches_poly_rule(vals, roots):
    assume(np.min(np.abs(vals[:, None] - roots[None, :])) > 1e-6)
    a = sw.roots_to_coeffs(roots, 3)
    np.testing.assert_array_equal(sw.roots_rule(vals, roots[None])[0], sw.poly_rule(vals, a[None])[0])


@given(coef=arrays(float, 4, elements=finite), t=finite)
def test_poly_values_is_horner(coef, t):
    want = sum(c * t**i for i, c in enumerate(coef))
    assert sw.poly_values(np.array([t]), coef[None])[0, 0] == pytest.approx(want, abs=1e-9)


def test_poly_rule_rejects_zero_at_center():
    with pytest.raises(ch.ChainError):
        sw.poly_rule(np.array([0.0, 1.0]), np.array([[0.0, 1.0]]))


@given(roots=arrays(float, 2, elements=finite))
def test_roots_to_coeffs_is_unit_and_padded(roots):
    a = sw.roots_to_coeffs(roots, 4)
    assert a.shape == (5,) and np.linalg.norm(a) == pytest.approx(1.0)
    assert np.all(a[3:] == 0)


@given(t=st.floats(-1, 2))
def test_smoothstep_cutoff(t):
    v = float(sw.smoothstep_cutoff(t))
    assert 0 <= v <= 1
    if t <= 0.5:
        assert v == 1
    if t >= 1:
        assert v == 0


def test_smoothstep_is_monotone_and_c1():
    t = np.linspace(0.4, 1.1, 2001)
    v = sw.smoothstep_cutoff(t)
    assert np.all(np.diff(v) <= 1e-15)
    d = np.diff(v) / np.diff(t)
    assert abs(d[0]) < 1e-2 and abs(d[-1]) < 1e-2


def test_sphere_param_lands_on_sphere():
    x = np.random.default_rng(0).random((50, 3))
    np.testing.assert_allclose(np.linalg.norm(sw.sphere_param(x), axis=1), 1.0)
    with pytest.raises(ch.ChainError):
        sw.sphere_param(np.full((1, 3), 0.5))


@pytest.mark.parametrize("p", [1, 2, 4])
def test_rp_generator_closes_up_to_sign(p):
    g = sw.rp_generator(p)
    np.testing.assert_allclose(g(1.0), -g(0.0), atol=1e-15)


def test_level_roots_inside_field_range(torus81):
    f, _ = torus81
    fam = sw.guth_family(f, 3)
    lo, hi = f.center_values.min(), f.center_values.max()
    r = sw.level_roots(fam, sw.roots_to_coeffs([lo - 1, 0.5 * (lo + hi), hi + 1], 3))
    np.testing.assert_allclose(r, [0.5 * (lo + hi)])


def test_guth_member_mass_counts_level_sets(torus81):
    f, _ = torus81
    fam = sw.guth_family(f, 2)
    qs = (0.3, 0.7)
    ts = [md.volume_quantile(f, q) for q in qs]
    a = sw.roots_to_coeffs(ts, 2)
    want = sum(ch.mass(md.level_cycle(f, t)) for t in ts)
    assert fam.masses(a[None])[0] == pytest.approx(want)
    assert fam.masses(np.array([ts]), roots=True)[0] == pytest.approx(want)


def test_pencil_members_on_torus_are_circle_pairs():
    cx = md.build_torus(1, 27)
    rot = sw.torus_rotation_sweepout(cx)
    m = rot.masses(rot.generator(np.linspace(0, 1, 9)))
    # two vertical circles of length 1 each
    np.testing.assert_allclose(m, 2.0)


def test_pencil_needs_torus():
    with pytest.raises(md.ModelError):
        sw.torus_rotation_sweepout(md.build_sphere(2, 4))


@pytest.mark.parametrize("k", [0, 1, 2])
def test_bend_map_fixes_centers_and_skeleton(torus81, k):
    f, _ = torus81
    F = sw.bend_and_cancel(f.complex, k)
    s = F.skeleton_check(samples=2048)
    assert s["violations"] == 0 and s["checked"] > 0
    assert s["skeleton_moved"] < 1e-12 and s["center_moved"] < 1e-12


@given(seed=st.integers(0, 2**31 - 1))
def test_inner_preimage_inverts_the_bend(seed):
    cx = md.build_torus(1, 81)
    F = sw.bend_and_cancel(cx, 1)
    x = np.random.default_rng(seed).random((64, 2))
    x = x[F.skeleton_distance(x) > 1e-6]
    back = F(F.inner_preimage(x))
    np.testing.assert_allclose((back - x + 0.5) % 1 - 0.5, 0, atol=1e-9)


def test_bend_expansion_constant_is_stable_in_k(torus81):
    f, _ = torus81
    C1 = [sw.bend_and_cancel(f.complex, k).expansion(samples=1024)["C1"] for k in (0, 1, 2)]
    assert max(C1) / min(C1) < 2


@pytest.mark.parametrize("bad", [dict(k=-1), dict(k=0, eps=0.5), dict(k=0, eps=0.0)])
def test_bend_and_cancel_rejects_bad_input(torus81, bad):
    with pytest.raises(md.ModelError):
        sw.bend_and_cancel(torus81[0].complex, **bad)


def test_bend_needs_torus():
    with pytest.raises(md.ModelError):
        sw.bend_and_cancel(md.build_sphere(2, 4), 0)


@pytest.mark.parametrize("p,k", [(1, 0), (8, 0), (9, 1), (80, 1), (81, 2), (1000, 3)])
def test_choose_k_brackets_p(p, k):
    assert sw.choose_k(p, 1) == k
    assert 3**k <= p**0.5 + 1e-9 < 3 ** (k + 1)


def test_mass_budget_formula():
    # n = 1: omega_1 = 2
    assert sw.mass_budget(9, 1, 1, 2.0, 2.0) == pytest.approx(2 * 9 * 2 * 2 / 3 + 2 * 3)


def test_separating_eps_gives_disjoint_ball_images(torus81):
    f, _ = torus81
    fam = sw.bent_guth_family(f, 9)
    iv = sorted(fam.level_intervals)
    assert all(a[1] < b[0] for a, b in zip(iv, iv[1:]))


def test_pushforward_needs_refined_grid():
    cx = md.build_torus(1, 27)
    f = md.morse_direction(cx, 0)
    with pytest.raises(md.ModelError):
        sw.pushforward(sw.bend_and_cancel(cx, 3), sw.guth_family(f, 2))


def test_bent_family_keeps_detection(torus81):
    f, w = torus81
    for p in (1, 2):
        assert am.is_p_sweepout(sw.bent_guth_family(f, p, k=1), None, p, w).detected


def test_sampled_family_crossing_bound():
    fam = sw.eigenfunction_family(lines=256, seed=0, samples=256)
    assert fam.param_dim == 14 and fam.p == 13 and fam.crossing_bound == 4
    assert sw.coordinate_family(256, 0).crossing_bound == 2


def test_eigenfunction_family_validation():
    basis = sw.harmonic_basis()
    with pytest.raises(ch.ChainError):
        sw.eigenfunction_family([basis[1], basis[1]], 16)
    with pytest.raises(ch.ChainError):
        sw.eigenfunction_family([basis[1], basis[2]], 16)


def test_mass_and_max_agree_with_batch():
    fam = sw.eigenfunction_family(lines=512, seed=3, samples=256)
    a = np.random.default_rng(1).standard_normal(14)
    m, top = fam.mass_and_max(a)
    ms, tops = fam.masses_and_max(a[None])
    assert m == pytest.approx(ms[0]) and top == tops[0]
    assert m == pytest.approx(2 * math.pi * fam.lineset.counts(fam.member(a)).mean())
