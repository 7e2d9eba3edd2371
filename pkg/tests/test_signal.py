import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cosparse.errors import DegenerateSignal, InvalidArgument
from cosparse.signal import (
    EPS0,
    CoSupport,
    add_noise,
    draw_cosupport,
    effective_cosupport,
    generate_signal,
    project_signal,
    ratio_of_snr,
    snr_of_ratio,
    zmin_of,
)
from cosparse.signal import _draw

# Exact generating-subset weighted distribution for DIF(18x9) at co-rank 7,
# from an independent matrix_rank/pinv enumeration of all C(18,7) subsets.
DIF_EXACT_DIST = {8: 3 / 504, 10: 1 / 7, 12: 0.2678571428571429, 14: 7 / 12}


def test_cosupport_validation():
    with pytest.raises(InvalidArgument):
        CoSupport((1, 1), 1)
    with pytest.raises(InvalidArgument):
        CoSupport((-1,), 0)
    with pytest.raises(InvalidArgument):
        CoSupport((1, 2), 3)
    c = CoSupport((3, 1), 2)
    assert c.indices == (1, 3) and 3 in c and len(c) == 2
    np.testing.assert_array_equal(c.complement(5), [0, 2, 4])


def test_draw_identity(ident4):
    c = draw_cosupport(ident4, 2, seed=1)
    assert len(c) == 2 and c.corank == 2


def test_draw_rand_gives_seven_rows(rand):
    for s in range(20):
        c = draw_cosupport(rand, 2, seed=s)
        assert len(c) == 7 and c.corank == 7


@pytest.mark.parametrize("method", ["uniform", "scan"])
def test_draw_dif_rejects_dependent_candidates(dif, method):
    rejected = 0
    for s in range(300):
        c, rej = _draw(dif, 2, s, method)
        assert len(c) == 7 and np.linalg.matrix_rank(dif.omega[list(c.indices)]) == 7
        rejected += rej
    assert rejected > 0


def test_draw_bad_args(dif):
    with pytest.raises(InvalidArgument):
        draw_cosupport(dif, 0)
    with pytest.raises(InvalidArgument):
        draw_cosupport(dif, 9)
    with pytest.raises(InvalidArgument):
        draw_cosupport(dif, 2, method="magic")


def test_empty_cosupport_gives_raw_gaussian(rand):
    sig = project_signal(rand, CoSupport((), 0), seed=3)
    assert sig.ell == 0 and sig.r == 9


def test_signal_invariants(desk_dict):
    for s in range(50):
        sig = generate_signal(desk_dict, 2, seed=s)
        z = np.abs(desk_dict.omega @ sig.x)
        inside = np.asarray(sig.effective_cosupport.indices)
        assert np.all(z[inside] < EPS0)
        assert np.all(np.delete(z, inside) > EPS0)
        assert sig.ell == desk_dict.p - np.count_nonzero(z >= EPS0)
        assert np.linalg.matrix_rank(desk_dict.omega[inside]) == 7
        assert set(sig.generating_subset.indices) <= set(sig.effective_cosupport.indices)


def test_dif_cosparsity_range_and_distribution(dif):
    ells = np.array([generate_signal(dif, 2, seed=s).ell for s in range(3000)])
    assert set(np.unique(ells)) <= {8, 10, 12, 14}
    emp = {k: np.mean(ells == k) for k in DIF_EXACT_DIST}
    tv = 0.5 * sum(abs(emp[k] - DIF_EXACT_DIST[k]) for k in DIF_EXACT_DIST)
    assert tv <= 0.03


def test_rand_cosparsity_is_seven(rand):
    assert {generate_signal(rand, 2, seed=s).ell for s in range(200)} == {7}


def test_generate_is_deterministic(mix):
    a, b = generate_signal(mix, 3, seed=11), generate_signal(mix, 3, seed=11)
    np.testing.assert_array_equal(a.x, b.x)
    assert a.effective_cosupport == b.effective_cosupport


def test_add_noise(dif):
    sig = generate_signal(dif, 2, seed=0)
    np.testing.assert_array_equal(add_noise(sig, 0.0).y, sig.x)
    np.testing.assert_array_equal(add_noise(sig, 0.3, 4).e, add_noise(sig, 0.3, 4).e)
    with pytest.raises(InvalidArgument):
        add_noise(sig, -1)


def test_noise_energy_matches_d_sigma2(dif):
    sig = generate_signal(dif, 2, seed=0)
    sigma = 0.2
    e2 = np.array([np.sum(add_noise(sig, sigma, t).e ** 2) for t in range(10_000)])
    se = e2.std(ddof=1) / math.sqrt(e2.size)
    assert abs(e2.mean() - 9 * sigma**2) <= 3 * se


def test_snr_examples():
    assert snr_of_ratio(0.01, 9, 2) == pytest.approx(33.46787486224657, abs=1e-12)
    assert round(snr_of_ratio(0.01, 9, 2), 2) == 33.47
    assert snr_of_ratio(1 / math.sqrt(9 / 2), 9, 2) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(InvalidArgument):
        snr_of_ratio(0, 9, 2)


@given(st.floats(1e-6, 1e3), st.integers(2, 200), st.data())
def test_snr_roundtrip(ratio, d, data):
    r = data.draw(st.integers(1, d - 1))
    assert ratio_of_snr(snr_of_ratio(ratio, d, r), d, r) == pytest.approx(ratio, rel=1e-12)


def test_zmin_hand_example(ident4):
    from cosparse.signal import CosparseSignal
    x = np.array([0.0, 0.0, 0.0, 0.3])
    eff = CoSupport(tuple(effective_cosupport(ident4, x).tolist()), 3)
    assert zmin_of(ident4, CosparseSignal(x, eff, eff, 3, 1)) == pytest.approx(0.3)
    zero = CosparseSignal(np.zeros(4), CoSupport((0, 1, 2, 3), 4), CoSupport((0, 1, 2, 3), 4), 4, 0)
    with pytest.raises(DegenerateSignal):
        zmin_of(ident4, zero)


def test_zmin_brute_force(dif):
    for s in range(30):
        sig = generate_signal(dif, 2, seed=s)
        z = [abs(dif.omega[j] @ sig.x) for j in range(dif.p) if j not in sig.effective_cosupport.indices]
        assert zmin_of(dif, sig) == pytest.approx(min(z), rel=1e-12)
        assert zmin_of(dif, sig) > EPS0
