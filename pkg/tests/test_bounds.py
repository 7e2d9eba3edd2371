import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cosparse.bounds import (
    Variant,
    averaged_bound_joint,
    averaged_bound_marginal,
    bound_curve,
    g_base,
    optimize_beta,
    parse_snr_grid,
    q_tail,
    snr_grid,
    theorem1_bound,
    theorem2_bound,
    zmin_prob_bound,
)
from cosparse.errors import InvalidArgument
from cosparse.metrics import DictionaryProfile

# High-precision values from mpmath (40 digits), rounded.
G6 = 0.99704543439204133
THM1_ANCHOR = 0.96797566790235207
ZMIN_ANCHOR = 0.76832272128695564
THM2_AT_6 = 0.74371769930229358
Q_VALUES = {1.0: 0.15865525393145705, 3.0: 0.0013498980316300945, 8.0: 6.2209605742717841e-16, 20.0: 2.7536241186062337e-89}


def test_q_tail_values():
    assert q_tail(0.0) == 0.5
    for t, v in Q_VALUES.items():
        assert q_tail(t) == pytest.approx(v, rel=1e-12)
        assert q_tail(t) + q_tail(-t) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("t", [0.5, 1, 2, 4, 8])
def test_q_tail_below_gaussian_upper_bound(t):
    assert q_tail(t) <= math.exp(-t * t / 2) / (t * math.sqrt(2 * math.pi))


def test_q_tail_vectorized():
    np.testing.assert_allclose(q_tail(np.array([0.0, 1.0])), [0.5, Q_VALUES[1.0]], rtol=1e-12)


def test_g_base_values():
    assert g_base(6.0) == pytest.approx(G6, abs=1e-15)
    assert g_base(6.0) == pytest.approx(0.997046, abs=1e-6)
    assert g_base(50.0) > 1 - 1e-12
    assert g_base(0.1) == 0.0
    with pytest.raises(InvalidArgument):
        g_base(0.0)


def test_anchor_components():
    assert theorem1_bound(18, 9, 2, 14, 6.0) == pytest.approx(THM1_ANCHOR, rel=1e-12)
    assert zmin_prob_bound(18, 14, 6.0, 0.01, 0.75) == pytest.approx(ZMIN_ANCHOR, rel=1e-12)
    assert theorem2_bound(18, 9, 2, 14, 0.01, 0.75, 6.0) == pytest.approx(THM2_AT_6, rel=1e-12)


def test_conditional_bound_edge_cases():
    assert theorem1_bound(18, 9, 9, 18, 0.01) == 1.0
    with pytest.raises(InvalidArgument):
        theorem1_bound(18, 9, 2, 14, -1)
    with pytest.raises(InvalidArgument):
        theorem1_bound(18, 9, 9, 19, 1.0)


def test_zmin_prob_limits():
    assert zmin_prob_bound(18, 14, 1e-9, 1e-9, 1.0) == pytest.approx(1.0, abs=1e-12)
    vals = [zmin_prob_bound(18, 14, b, 0.01, 0.75) for b in (1, 5, 10, 50)]
    assert np.all(np.diff(vals) < 0)
    with pytest.raises(InvalidArgument):
        zmin_prob_bound(18, 14, 1, 0.01, 0.0)


def test_product_bound_limits():
    assert theorem2_bound(18, 9, 2, 14, 0.01, 0.75, 0.05) == 0.0
    assert theorem2_bound(18, 9, 2, 14, 0.01, 0.75, 1e4) == 0.0
    for b in (2.0, 6.0, 20.0):
        t2 = theorem2_bound(18, 9, 2, 14, 0.01, 0.75, b)
        assert t2 <= min(theorem1_bound(18, 9, 2, 14, b), zmin_prob_bound(18, 14, b, 0.01, 0.75)) + 1e-15


def test_optimize_beta_anchor():
    pt = optimize_beta(18, 9, 2, 14, 0.01, 0.75)
    assert 5.5 <= pt.beta_star <= 6.5
    assert pt.bound == pytest.approx(0.744, abs=1e-3)
    assert pt.bound >= theorem2_bound(18, 9, 2, 14, 0.01, 0.75, 6.0) - 1e-9
    assert pt.bound == pytest.approx(theorem2_bound(18, 9, 2, 14, 0.01, 0.75, pt.beta_star), rel=1e-12)


def test_optimize_beta_beats_fine_grid():
    betas = np.linspace(0.5, 40, 20000)
    for ell, ratio, alpha in [(14, 0.01, 0.75), (8, 0.05, 0.3), (12, 0.001, 0.1)]:
        best = max(theorem2_bound(18, 9, 2, ell, ratio, alpha, b) for b in betas[::20])
        assert optimize_beta(18, 9, 2, ell, ratio, alpha).bound >= best - 1e-12


def test_optimize_beta_non_increasing_in_ratio():
    ratios = [0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5]
    vals = [optimize_beta(18, 9, 2, 14, q, 0.75).bound for q in ratios]
    assert np.all(np.diff(vals) <= 1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 100), st.floats(0.01, 100))
def test_g_base_monotone(a, b):
    lo, hi = min(a, b), max(a, b)
    assert g_base(lo) <= g_base(hi)


@settings(max_examples=50, deadline=None)
@given(st.integers(7, 17), st.floats(0.05, 1.0), st.floats(1e-4, 0.5))
def test_bounds_in_unit_interval(ell, alpha, ratio):
    pt = optimize_beta(18, 9, 2, ell, ratio, alpha)
    assert 0.0 <= pt.bound <= 1.0
    assert pt.beta_star > 0


def test_large_exponents_do_not_underflow_prematurely():
    # p - ell ~ 10^4: naive powers of 2Q would underflow long before the optimum.
    pt = optimize_beta(20000, 10000, 10, 15000, 1e-5, 0.5)
    assert 0.0 < pt.bound < 1.0


def test_marginal_point_mass_equals_optimum():
    pt = optimize_beta(18, 9, 2, 12, 0.02, 0.4)
    assert averaged_bound_marginal(18, 9, 2, 0.02, 0.4, {12: 1.0}) == pytest.approx(pt.bound, rel=1e-12)


def test_joint_single_cell_equals_optimum():
    joint = np.zeros((18, 100))
    joint[11, 40] = 1.0
    pt = optimize_beta(18, 9, 2, 12, 0.02, 0.40)
    assert averaged_bound_joint(18, 9, 2, 0.02, joint) == pytest.approx(pt.bound, rel=1e-12)


def test_joint_lowest_bin_contributes_zero():
    joint = np.zeros((18, 100))
    joint[11, 0] = 1.0
    assert averaged_bound_joint(18, 9, 2, 0.02, joint) == 0.0


def _profile(dist, alpha, joint):
    return DictionaryProfile(18, 9, 2, None, None, dist, alpha, joint)


def test_bound_curve_point_mass_matches_optimize_beta():
    joint = np.zeros((18, 100))
    joint[13, 75] = 1.0
    prof = _profile({14: 1.0}, 0.75, joint)
    curve = bound_curve(prof, Variant.JOINT, [20.0, 40.0])
    for s, v, q in zip(curve.axis, curve.values, curve.ratios):
        assert v == pytest.approx(optimize_beta(18, 9, 2, 14, q, 0.75).bound, rel=1e-12)
    rows = list(curve.rows())
    assert rows[0].keys() == {"snr_db", "ratio", "bound", "variant"}
    assert rows[0]["variant"] == "joint"


def test_snr_grid_parsing():
    np.testing.assert_allclose(parse_snr_grid("6:74:18"), np.linspace(6, 74, 18))
    assert snr_grid().size == 35
    for bad in ("6:74", "a:b:c", "10:5:3"):
        with pytest.raises(InvalidArgument):
            parse_snr_grid(bad)
