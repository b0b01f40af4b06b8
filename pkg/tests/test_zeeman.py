import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ensemble_qec.zeeman import (
    CS133,
    MU_B_HZ_PER_GAUSS,
    RB87,
    HyperfineSpecies,
    pair_shift_analysis,
    zeeman_curvature,
    zeeman_energy,
    zeeman_slope,
)


def test_bohr_magneton():
    assert MU_B_HZ_PER_GAUSS == pytest.approx(1.39962449e6, rel=1e-8)


def test_zero_field_splitting():
    for sp in (RB87, CS133):
        e_hi = zeeman_energy(sp, sp.f_upper, 0, 0.0)
        e_lo = zeeman_energy(sp, sp.f_lower, 0, 0.0)
        assert e_hi - e_lo == pytest.approx(sp.hyperfine_hz, rel=1e-14)


def test_weak_field_g_factors():
    # g_F = +-(g_J - g_I)/(2I+1) + g_I, up to sign convention
    b = 1e-6
    for sp in (RB87, CS133):
        for f in (sp.f_lower, sp.f_upper):
            slope = float(zeeman_slope(sp, f, 1.0, b))
            sign = 1 if f == sp.f_upper else -1
            g_f = sign * (sp.g_j - sp.g_i) / (2 * sp.nuclear_spin + 1) + sp.g_i
            assert slope == pytest.approx(g_f * MU_B_HZ_PER_GAUSS, rel=1e-6)


@given(st.floats(0.01, 50), st.sampled_from([-1.0, 0.0, 1.0]))
@settings(max_examples=40, deadline=None)
def test_slope_matches_finite_difference(b, m):
    h = 1e-2  # larger step keeps roundoff on ~7e9 Hz energies below tolerance
    for f in (RB87.f_lower, RB87.f_upper):
        fd = (zeeman_energy(RB87, f, m, b + h) - zeeman_energy(RB87, f, m, b - h)) / (2 * h)
        assert float(zeeman_slope(RB87, f, m, b)) == pytest.approx(float(fd), rel=1e-5, abs=1e-3)


def test_stretched_state_linear():
    e = zeeman_energy(RB87, 2, 2, np.array([0.0, 100.0]))
    assert (e[1] - e[0]) / 100 == pytest.approx((RB87.g_j + 3 * RB87.g_i) / 2 * MU_B_HZ_PER_GAUSS, rel=1e-12)
    assert zeeman_curvature(RB87, 2, 2) == 0.0


def test_curvature_against_numeric():
    h = 1e-2
    for f in (1, 2):
        e = zeeman_energy(RB87, f, 0, np.array([-h, 0.0, h]))
        numeric = (e[0] - 2 * e[1] + e[2]) / (2 * h * h)
        assert zeeman_curvature(RB87, f, 0) == pytest.approx(numeric, rel=1e-5)


class TestClockPair:
    def test_rb87_minus_one(self):
        res = pair_shift_analysis(RB87, -1)
        assert res.linear_low == pytest.approx(702368.95, rel=1e-7)
        assert res.linear_high == pytest.approx(699583.30, rel=1e-7)
        assert res.relative_mismatch <= res.nuclear_bound * (1 + 1e-9)
        assert res.relative_mismatch == pytest.approx(0.0019869781856, rel=1e-9)
        assert res.quadratic_coefficient == pytest.approx(431.36, rel=1e-4)
        assert res.magic_field == pytest.approx(3.22892, abs=1e-4)

    def test_m_zero_has_no_linear_shift(self):
        res = pair_shift_analysis(RB87, 0)
        assert res.linear_low == pytest.approx(0, abs=1e-6) and res.linear_high == pytest.approx(0, abs=1e-6)
        assert res.relative_mismatch == 0.0

    def test_no_magic_field_outside_range(self):
        assert pair_shift_analysis(RB87, -1, b_range=(0.0, 2.0)).magic_field is None

    def test_invalid_sublevel(self):
        with pytest.raises(ValueError):
            pair_shift_analysis(RB87, -2)
        with pytest.raises(ValueError):
            zeeman_energy(RB87, 3, 0, 0.0)


def test_species_validation():
    with pytest.raises(ValueError):
        HyperfineSpecies("bad", 1.3, 1e9, 2.0, 0.0)
    with pytest.raises(ValueError):
        HyperfineSpecies("bad", 1.5, -1.0, 2.0, 0.0)
