import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from minmax_lab import almgren as am
from minmax_lab import chains as ch
from minmax_lab import models as md
from minmax_lab import param as pt
from minmax_lab import sweepouts as sw


@pytest.fixture(scope="module")
def torus():
    cx = md.build_torus(1, 27)
    f = md.morse_direction(cx, 0)
    return f, am.calibrate_threshold(f)["threshold"]


def test_threshold_is_below_half_volume(torus):
    f, w = torus
    cal = am.calibrate_threshold(f)
    assert 0 < w <= 0.25 * cal["total_volume"]
    assert w <= 0.5 * cal["min_gap"]


def test_threshold_at_half_volume_rejected(torus):
    f, _ = torus
    lin = sw.linear_sweepout(f)
    with pytest.raises(am.FinenessError):
        am.path_class(lin, lin.generator, 0.5 * f.complex.total_volume)


def test_discrete_level_loop_has_class_one(torus):
    f, w = torus
    cx = f.complex
    order = np.sort(f.center_values)
    levels = np.r_[order[0] - 1, 0.5 * (order[1:] + order[:-1]), order[-1] + 1]
    # empty -> everything in single-cell steps, closed up by the identification of both ends
    loop = [md.level_cycle(f, t) for t in levels[:-1]]
    assert am.loop_class(loop, w) == 1


def test_constant_loop_has_class_zero(torus):
    f, _ = torus
    c = md.level_cycle(f, md.volume_quantile(f, 0.5))
    assert am.loop_class([c, c, c]) == 0


def test_coarse_loop_rejected_by_threshold(torus):
    f, w = torus
    loop = [md.level_cycle(f, md.volume_quantile(f, q)) for q in (0.1, 0.5, 0.9)]
    with pytest.raises(am.FinenessError):
        am.loop_class(loop, w)


@pytest.mark.parametrize("shift", [0.0, 0.21, 0.5, 0.77])
def test_linear_sweepout_path_class(torus, shift):
    f, w = torus
    lin = sw.linear_sweepout(f)
    cls, stats = am.path_class(lin, lambda s: lin.generator(np.asarray(s) + shift), w)
    assert cls == 1
    assert stats.max_lighter <= w


def test_double_loop_is_trivial(torus):
    f, w = torus
    lin = sw.linear_sweepout(f)
    cls, _ = am.path_class(lin, lambda s: lin.generator(2 * np.asarray(s)), w)
    assert cls == 0


@settings(max_examples=15)
@given(a=st.floats(0.0, 1.0), b=st.floats(0.0, 1.0), c=st.floats(0.0, 1.0))
def test_path_choices_telescope(torus, a, b, c):
    """Choices along a -> b -> c add up to the choices along a -> c."""
    f, w = torus
    lin = sw.linear_sweepout(f)
    reg = lambda s: lin.region(lin.generator(np.array([s]))[0])
    ab, _ = am.path_choices(reg, f.complex, a, b, w)
    bc, _ = am.path_choices(reg, f.complex, b, c, w)
    ac, _ = am.path_choices(reg, f.complex, a, c, w)
    np.testing.assert_array_equal(ab ^ bc, ac)
    np.testing.assert_array_equal(ac, reg(a) ^ reg(c))


@pytest.mark.parametrize("p", [1, 2])
def test_batched_edge_cochain_matches_adaptive(torus, p):
    f, w = torus
    fam = sw.guth_family(f, p)
    X = fam.domain(1)
    eps, _ = am.edge_cochain(fam, X, w)
    V, M = X.verts[1], X.masks[1]
    ref = np.zeros_like(eps)
    for e in range(X.n_cells(1)):
        x0 = V[e] / X.N
        x1 = (V[e] + ((M[e] >> np.arange(X.m)) & 1)) / X.N
        reg = lambda t: fam.region(fam.to_param(((1 - t) * x0 + t * x1)[None])[0])
        tot, _ = am.path_choices(reg, f.complex, 0.0, 1.0, w)
        ref[e] = tot[0]
    np.testing.assert_array_equal(eps, ref)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_guth_family_detects_its_degree(torus, p):
    f, w = torus
    rep = am.is_p_sweepout(sw.guth_family(f, p), None, p, w)
    assert rep.detected and rep.method == "cup-power"
    assert all(rep.levels[q] for q in range(1, p + 1))
    lam, evals, _ = am.pulled_back_class(sw.guth_family(f, p), pt.build_rp(p)[0], w)
    assert lam.is_cocycle() and evals == [1]


def test_generator_certificate_for_large_p(torus):
    f, w = torus
    rep = am.is_p_sweepout(sw.guth_family(f, 6), None, 6, w)
    assert rep.method == "generator-certificate" and rep.detected


def test_guth_family_is_sweepout(torus):
    f, w = torus
    assert am.is_sweepout(sw.guth_family(f, 2), w)


def test_discretize_reports_fineness(torus):
    f, _ = torus
    phi, rep = am.discretize(sw.linear_sweepout(f), k=1, j=2, flat_samples=8)
    assert rep["vertices"] == phi.X.n_cells(0) == 27
    assert rep["fineness"] == pytest.approx(am.fineness(phi))
    assert rep["max_flat_distance"] <= rep["fineness"] + 1e-12


def test_relative_class_of_ball_sweep():
    cx = md.build_torus(1, 27)
    ball = md.geodesic_ball(cx, [0.5, 0.5], 0.2)(cx.centers[cx.dim])
    rot = sw.torus_rotation_sweepout(cx)
    assert am.relative_path_class(rot, rot.generator, ball, 0.25) == 1
    const = lambda s: np.zeros((len(np.atleast_1d(s)), 1)) + 0.3
    assert am.relative_path_class(rot, const, ball, 0.25) == 0


def test_relative_filling_rejects_non_boundary():
    cx = md.build_torus(1, 9)
    ball = np.ones(cx.n_cells(2), dtype=bool)
    x = np.asarray(cx.centers[1])
    line = np.abs(x[:, 0]) < 1e-9
    with pytest.raises(ch.EssentialCycleError):
        am.relative_filling(line, ball, cx)


def test_mass_concentration_profile_is_monotone(torus):
    f, _ = torus
    out = am.mass_concentration(sw.guth_family(f, 2), [0.05, 0.1, 0.2], samples=32, centers=8)
    assert out["monotone"]
    assert out["profile"][-1] > 0


def test_restriction_with_empty_target_is_vacuous(torus):
    f, w = torus
    fam = sw.guth_family(f, 2)
    X = fam.domain(1)
    r = am.restrict_and_detect(fam, X, [f.complex.empty(1)], 1e-9, 1, w)
    assert r["implication_holds"]
    with pytest.raises(ch.ChainError):
        am.restrict_and_detect(fam, X, [], 0.1, 1, w)
