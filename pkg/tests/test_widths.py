import numpy as np
import pytest
from hypothesis import given, strategies as st

from minmax_lab import almgren as am
from minmax_lab import models as md
from minmax_lab import sweepouts as sw
from minmax_lab import widths as wd

positive = st.floats(0.1, 100, allow_nan=False)


@pytest.fixture(scope="module")
def torus81():
    cx = md.build_torus(1, 81)
    f = md.morse_direction(cx, 0)
    return f, am.calibrate_threshold(f)["threshold"]


@given(vals=st.lists(positive, min_size=1, max_size=12))
def test_monotone_envelope_properties(vals):
    ps = list(range(1, len(vals) + 1))
    env = wd.monotone_envelope(ps, vals)
    assert all(e <= v for e, v in zip(env, vals))
    assert all(a <= b for a, b in zip(env, env[1:]))
    assert env[-1] == vals[-1]
    assert wd.monotone_envelope(ps, env) == env


def test_monotone_envelope_respects_p_order():
    assert wd.monotone_envelope([4, 1, 2], [3.0, 5.0, 2.0]) == [3.0, 2.0, 2.0]


@given(c=positive, slope=st.floats(0.1, 1.0))
def test_scaling_fit_recovers_power_law(c, slope):
    ps = np.array([1, 2, 4, 8, 16])
    fit = wd.scaling_fit(ps, c * ps**slope)
    assert fit["slope"] == pytest.approx(slope, abs=1e-9)
    assert fit["r2"] == pytest.approx(1.0)


def test_scaling_fit_half_power_gives_constant_weyl_ratio():
    ps = np.array([1, 2, 4, 8, 16, 32])
    fit = wd.scaling_fit(ps, 0.3 * np.sqrt(ps))
    np.testing.assert_allclose(fit["weyl_ratios"], 0.3)


@pytest.mark.parametrize("ps,vals", [([1, 2, 4], [1, 2, 3]), ([1, 2, 4, 8], [1, 0, 2, 3])])
def test_scaling_fit_rejects_bad_input(ps, vals):
    with pytest.raises(wd.WidthError):
        wd.scaling_fit(ps, vals)


def test_monotonicity_monitor():
    out = wd.monotonicity_and_equality([1, 2, 4], [1.0, 1.01, 2.0])
    assert out["monotone"] and out["near_equalities"][0]["p"] == 1
    with pytest.raises(wd.MonotonicityError):
        wd.monotonicity_and_equality([1, 2, 4], [1.0, 2.0, 1.5])
    # decreases within tolerance pass
    wd.monotonicity_and_equality([1, 2], [1.0, 0.99])


def test_width_report_rejects_crossed_bounds():
    wd.WidthReport(2, 1.0, {}, lower=1.01)
    with pytest.raises(wd.WidthError):
        wd.WidthReport(2, 1.0, {}, lower=1.1)


def test_upper_estimate_needs_detection(torus81):
    f, _ = torus81
    with pytest.raises(wd.WidthError):
        wd.upper_estimate(sw.guth_family(f, 2), 16, detection={"detected": False})


def test_upper_estimate_is_an_attained_mass(torus81):
    f, w = torus81
    fam = sw.guth_family(f, 2)
    det = am.is_p_sweepout(fam, None, 2, w).to_json()
    u, diag = wd.upper_estimate(fam, samples=64, polish=2, seed=1, detection=det)
    assert diag["max_at_samples"] <= diag["max_at_double"] <= diag["sampled_max"] <= u
    if diag["argmax_roots"] is not None:
        m = fam.masses(np.array([diag["argmax_roots"]]), roots=True)[0]
    else:
        m = fam.masses(np.array([diag["argmax"]]))[0]
    assert m == pytest.approx(u)


def test_upper_estimate_is_seeded(torus81):
    f, w = torus81
    fam = sw.guth_family(f, 2)
    det = am.is_p_sweepout(fam, None, 2, w).to_json()
    a = wd.upper_estimate(fam, samples=32, polish=1, seed=5, detection=det)
    b = wd.upper_estimate(fam, samples=32, polish=1, seed=5, detection=det)
    assert a[0] == b[0] and a[1]["argmax"] == b[1]["argmax"]


def test_sampled_family_upper_needs_degree_bound():
    fam = sw.eigenfunction_family(lines=64, seed=0, samples=64)
    u, diag = wd.upper_estimate(fam, samples=8, polish=0)
    assert u > 0 and diag["provenance"] == "measured"


def test_rotation_ball_mass_is_two_chords(torus81):
    f, w = torus81
    rot = sw.torus_rotation_sweepout(f.complex)
    radii = [0.05, 0.1, 0.15, 0.2]
    b = wd.ball_mass_bound(rot, [0.5, 0.5], radii, w)
    # at worst one vertical circle passes through the center: a chord of length 2r
    assert b["alpha"] == pytest.approx(2.0, rel=0.05)
    assert np.all(np.diff(b["profile"]) > 0)


def test_calibrate_alpha_takes_the_minimum(torus81):
    f, w = torus81
    rot = sw.torus_rotation_sweepout(f.complex)
    cal = wd.calibrate_alpha(rot, np.array([[0.5, 0.5], [0.2, 0.7]]), [0.05, 0.1, 0.2], w)
    assert cal["alpha"] == min(cal["alphas"])
    assert cal["spread"] >= 0


@pytest.mark.parametrize("p", [1, 2, 4, 9])
def test_packing_witness_clears_threshold(torus81, p):
    f, w = torus81
    fam = sw.bent_guth_family(f, p)
    det = am.is_p_sweepout(fam, None, p, w).to_json()
    pk = md.ball_packing(f.complex, p)
    wit, bound = wd.packing_lower_bound(fam, pk, 2.0, det)
    tau = 2.0 / 3 * pk.radius
    assert bound == pytest.approx(p * 2.0 / 6 * pk.radius)
    assert wit["threshold"] == pytest.approx(tau)
    assert min(wit["ball_masses"]) > tau and len(wit["ball_masses"]) == p
    # the witness member carries at least the bound in total
    assert wit["mass"] >= bound


def test_packing_bound_needs_matching_packing(torus81):
    f, w = torus81
    fam = sw.guth_family(f, 2)
    det = am.is_p_sweepout(fam, None, 2, w).to_json()
    with pytest.raises(wd.WidthError):
        wd.packing_lower_bound(fam, md.ball_packing(f.complex, 3), 2.0, det)
    with pytest.raises(wd.WidthError):
        wd.packing_lower_bound(fam, md.ball_packing(f.complex, 2), 2.0, None)
