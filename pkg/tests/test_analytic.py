import math

import numpy as np
import pytest

from qamlab.analytic import (
    SnrSpec,
    SubRegion,
    bep_from_sep,
    f_corner,
    q1,
    q_craig,
    sep_for,
    sep_hqam,
    sep_rqam,
    sep_sqam,
    sep_star16,
    sep_subregions,
    sep_xqam,
    sep_xqam_conditional,
    sep_xqam_exact,
    star16_subregions,
)
from qamlab.constellations import gen_3psk, gen_irregular_hqam, gen_regular_hqam, gen_star_qam
from qamlab.errors import NonPositiveParams, PhiOutOfRange, RatioDegenerate, UnsupportedOrder
from qamlab.metrics import compute_metrics

# Oracle values computed outside the package (mpmath quadrature and plain
# numpy Monte Carlo with 10**7 samples, seed 20240501) and frozen here.
Q1_AT_1 = 0.158655253931457051
CRAIG_1_PI4_MC, CRAIG_1_PI4_MC_SE = 0.02518265498915622, 9.555680611270982e-06
F_CORNER_MC, F_CORNER_MC_SE = 6.981493327682872e-05, 7.118897610648179e-08
PSK3_MC = {6: (0.0136831, 3.673672926975127e-05), 10: (0.0001036, 3.218528655146634e-06)}
HQAM16_14DB_MC, HQAM16_14DB_MC_SE = 0.0337021, 5.706686293777677e-05


# ------------------------------------------------------------- SnrSpec
def test_snr_conversions():
    s = SnrSpec.db(10.0, "PerBit")
    assert s.linear == pytest.approx(10.0)
    assert s.per_symbol(4) == pytest.approx(40.0)
    assert SnrSpec.db(10.0).per_bit(5) == pytest.approx(2.0)
    assert SnrSpec(100.0, "linear").decibels == pytest.approx(20.0)


@pytest.mark.parametrize(
    "kwargs", [dict(value=1.0, unit="bel"), dict(value=1.0, convention="PerHz"), dict(value=0.0, unit="linear")]
)
def test_snr_validation(kwargs):
    with pytest.raises(ValueError):
        SnrSpec(**kwargs)


# ------------------------------------------------------------------ Q
def test_q1_values():
    assert q1(0.0) == 0.5
    assert q1(np.inf) == 0.0
    assert q1(1.0) == pytest.approx(Q1_AT_1, abs=1e-15)


@pytest.mark.parametrize("x", np.linspace(0, 8, 17))
def test_craig_at_right_angle_is_q(x):
    assert abs(q_craig(x, math.pi / 2) - q1(x)) < 1e-10


@pytest.mark.parametrize("phi", [0.0, 0.3, 1.0, math.pi / 2, 2.5, math.pi])
def test_craig_at_zero(phi):
    assert abs(q_craig(0.0, phi) - phi / math.pi) < 1e-12


def test_craig_against_monte_carlo():
    assert abs(q_craig(1.0, math.pi / 4) - CRAIG_1_PI4_MC) < 3 * CRAIG_1_PI4_MC_SE


def test_craig_angle_range():
    with pytest.raises(PhiOutOfRange):
        q_craig(1.0, -0.1)
    with pytest.raises(PhiOutOfRange):
        q_craig(1.0, math.pi + 0.1)


# ------------------------------------------------------------ f_corner
def test_f_corner_empty_interval():
    assert f_corner(2, 0.7, 0.7) == 0.0


@pytest.mark.parametrize("i,eta", [(1, 0.5), (2, 1.0), (3, 0.2)])
def test_f_corner_bound(i, eta):
    assert f_corner(i, eta, np.inf) <= q1(2 * i * eta + eta) * q1(eta) + 1e-15


def test_f_corner_against_monte_carlo():
    assert abs(f_corner(1, 1.0, np.inf) - F_CORNER_MC) < 3 * F_CORNER_MC_SE


# ---------------------------------------------------------------- XQAM
@pytest.mark.parametrize("order", [32, 128])
@pytest.mark.parametrize("db", [5, 10, 15, 20])
def test_xqam_two_forms_agree(order, db):
    gamma = SnrSpec.db(db).linear
    assert abs(sep_xqam_conditional(order, gamma) - sep_xqam_exact(order, gamma)) < 1e-9


def test_xqam_doubled_weights_disagree():
    # the staircase sums are empty at M = 32 and only matter at low SNR
    gamma = SnrSpec.db(5).linear
    assert abs(sep_xqam_conditional(128, gamma, (16, 8, 8)) - sep_xqam_exact(128, gamma)) > 1e-4


@pytest.mark.parametrize("order", [32, 128, 512])
def test_xqam_limits(order):
    assert sep_xqam(order, SnrSpec.db(80)) < 1e-12
    assert sep_xqam(order, SnrSpec(1e-9, "linear")) == pytest.approx((order - 1) / order, abs=1e-4)


def test_xqam_both_form():
    assert sep_xqam(32, SnrSpec.db(15), "both") == pytest.approx(0.1191192897, rel=1e-9)


# ---------------------------------------------------------------- HQAM
def test_hqam_without_couples_is_nn_approximation():
    snr = SnrSpec.db(12)
    k = 2 / 9
    assert sep_hqam(4, 0, k, snr) == pytest.approx(4 * q1(math.sqrt(k * snr.linear)))


def test_hqam_regular16_against_monte_carlo():
    r = compute_metrics(gen_regular_hqam(16))
    value = sep_hqam(r.tau, r.tau_c, r.k_param, SnrSpec.db(14), order=16)
    assert abs(value - HQAM16_14DB_MC) < 3 * HQAM16_14DB_MC_SE


@pytest.mark.parametrize("db", [6, 10])
def test_3psk_against_monte_carlo(db):
    mc, se = PSK3_MC[db]
    value = sep_for(gen_3psk(), SnrSpec.db(db))
    assert value == pytest.approx(sep_hqam(2, 1, 1.5, SnrSpec.db(db), order=3))
    assert abs(value - mc) < 3 * se


def test_hqam_parameter_validation():
    with pytest.raises(NonPositiveParams):
        sep_hqam(0, 1, 1, SnrSpec.db(10))
    with pytest.raises(NonPositiveParams):
        sep_hqam(3, -1, 1, SnrSpec.db(10))


def test_hqam_clipped_at_low_snr():
    r = compute_metrics(gen_irregular_hqam(64))
    assert sep_hqam(r.tau, r.tau_c, r.k_param, SnrSpec.db(-30), order=64) <= 63 / 64


# ---------------------------------------------------------------- star
def test_star16_low_snr_limit():
    assert sep_star16(2.0, SnrSpec.db(-40)) == pytest.approx(15 / 16, abs=5e-3)


def test_star16_monotone():
    values = [sep_star16(2.0, SnrSpec.db(db)) for db in range(0, 26)]
    assert all(b <= a for a, b in zip(values, values[1:]))


def test_star16_ratio_inversion():
    snr = SnrSpec.db(12)
    assert sep_star16(0.5, snr) == sep_star16(2.0, snr)


def test_star16_degenerate_ratio():
    with pytest.raises(RatioDegenerate):
        sep_star16(1.0, SnrSpec.db(10))


@pytest.mark.parametrize("ratio", [1.5, 2.0, 3.0])
def test_star16_subregions_cover_the_error_mass(ratio):
    regions = star16_subregions(ratio)
    assert all(0 < r.zeta < math.pi for r in regions)
    # at zero SNR every wedge integrand is 1: the sum is the guessing error 15/16
    assert sum(r.weight * r.zeta for r in regions) / (2 * math.pi) == pytest.approx(15 / 16)


def test_subregion_validation():
    with pytest.raises(ValueError):
        SubRegion(0.5, 0.0, 0.1, 1.0)
    assert sep_subregions([], 3.0) == 0.0


def test_star16_via_dispatch():
    c = gen_star_qam(16, [1.0, 2.5])
    assert sep_for(c, SnrSpec.db(10)) == sep_star16(2.5, SnrSpec.db(10))


def test_star32_has_no_closed_form():
    with pytest.raises(UnsupportedOrder):
        sep_for(gen_star_qam(32, [1, 2, 3, 4]), SnrSpec.db(10))


# --------------------------------------------------------- square, rect
def test_sqam4_qpsk_limit():
    snr = SnrSpec.db(14)
    q = q1(math.sqrt(snr.linear))
    assert sep_sqam(4, snr) == pytest.approx(2 * q - q * q)
    assert sep_sqam(4, SnrSpec.db(20)) == pytest.approx(2 * q1(10.0), rel=1e-6)


@pytest.mark.parametrize("order", [4, 16, 64, 256])
def test_sqam_low_snr_limit(order):
    assert sep_sqam(order, SnrSpec(1e-12, "linear")) == pytest.approx((order - 1) / order, abs=1e-5)


def test_sqam_is_rqam_special_case():
    snr = SnrSpec.db(17)
    assert sep_rqam(8, 8, snr) == pytest.approx(sep_sqam(64, snr))


def test_sqam_rejects_odd_powers():
    with pytest.raises(UnsupportedOrder):
        sep_sqam(32, SnrSpec.db(10))


# ----------------------------------------------------------------- BEP
def test_bep():
    assert bep_from_sep(0.0, 1, 16) == 0.0
    assert bep_from_sep(0.2, 1, 16) == pytest.approx(0.05)
    assert bep_from_sep(0.9, 3, 4) == 1.0
    with pytest.raises(ValueError):
        bep_from_sep(1.5, 1, 4)
