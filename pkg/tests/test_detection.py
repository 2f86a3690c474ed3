import math

import numpy as np
import pytest

from qamlab.constellations import (
    Family,
    gen_3psk,
    gen_irregular_hqam,
    gen_regular_hqam,
    gen_rqam,
    gen_sqam,
    gen_star_qam,
    gen_xqam,
    generate,
)
from qamlab.detection import (
    RegionTable,
    distance_gap,
    fast_detect,
    hex_lattice_detect,
    hqam_region_detect,
    irregular64_table,
    ml_detect,
    read_samples_csv,
    square_detect,
    star_coherent_detect,
    star_differential_detect,
    star_differential_modulate,
    write_indices_csv,
    xqam_detect,
)
from qamlab.errors import WrongConstellation, WrongFamily, ZeroMagnitudeSample

# Printed boundary coefficients (c, s) of the ninth strip, boundary
# y = (c + s*x)/sqrt(3), top to bottom.  The last printed entry has the wrong
# sign: the bisector of the two bottom symbols mirrors the first boundary.
PRINTED_R9 = [(11, -1), (7, 1), (5, -1), (1, 1), (-1, -1), (-5, 1), (-7, -1), (11, -1)]


def noisy(c, db, n, seed):
    rng = np.random.default_rng(seed)
    sent = rng.integers(0, c.order, n)
    sigma = math.sqrt(np.mean(c.energies()) / 10 ** (db / 10) / 2)
    return c.as_complex()[sent] + sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def disagreements(c, detector, z):
    got, ref = np.asarray(detector(c, z)), np.asarray(ml_detect(c, z))
    bad = got != ref
    # ties within 1e-9 may go either way
    return int(np.sum(bad & (distance_gap(c, z) > 1e-9)))


# ------------------------------------------------------------------ ML
def test_ml_picks_nearest_point():
    c = gen_sqam(4)
    k = ml_detect(c, complex(0.2, -3.0))
    assert tuple(c.points[k]) == (1, -1)


def test_ml_vector_shape_and_ties():
    c = gen_sqam(4)
    z = np.array([[0.0 + 0.0j, 5 + 5j], [-1 - 1j, 0.9 + 1.1j]])
    out = ml_detect(c, z)
    assert out.shape == (2, 2)
    # the origin is equidistant from all four points: lowest index wins
    assert out[0, 0] == 0


def test_ml_is_scale_equivariant():
    c = gen_irregular_hqam(16)
    z = noisy(c, 8, 2000, 3)
    scaled = c.__class__(c.family, c.order, c.points * 3.5, c.params)
    np.testing.assert_array_equal(ml_detect(c, z), ml_detect(scaled, 3.5 * z))


# --------------------------------------------------------- region table
def test_region_table_shape():
    t = irregular64_table()
    assert t.n_strips == 18
    assert len(t.candidates[9]) == 9
    np.testing.assert_array_equal(t.breakpoints, [-9, -7, -6, -5, -4, -3, -2, -1, 0, 1, 2, 3, 4, 5, 6, 7, 9])


def test_printed_strip_coefficients():
    got = [(round(float(a), 9), round(float(b), 9)) for a, b in irregular64_table().boundary_coefficients(9)]
    assert got[:7] == PRINTED_R9[:7]
    assert got[7] == (-PRINTED_R9[7][0], -PRINTED_R9[7][1])


def test_boundaries_pass_through_midpoints_of_stacked_symbols():
    c = gen_irregular_hqam(64)
    t = irregular64_table()
    for s, cand in enumerate(t.candidates):
        for k, (upper, lower) in enumerate(zip(cand[:-1], cand[1:])):
            mid = 0.5 * (c.points[upper] + c.points[lower])
            assert t.intercept[s, k] + t.slope[s, k] * mid[0] == pytest.approx(mid[1])


@pytest.mark.parametrize("db", [5, 10, 15, 20])
def test_region_detector_matches_ml(db):
    c = gen_irregular_hqam(64)
    assert disagreements(c, hqam_region_detect, noisy(c, db, 10**5, db)) == 0


def test_region_table_is_generic():
    c = gen_regular_hqam(16)
    t = RegionTable.from_constellation(c)
    z = noisy(c, 6, 20000, 11)
    np.testing.assert_array_equal(t.detect(z), ml_detect(c, z))


def test_region_detector_only_for_irregular64():
    with pytest.raises(WrongConstellation):
        hqam_region_detect(gen_regular_hqam(64), 0j)


# ---------------------------------------------------------------- XQAM
def test_xqam_interior_and_outside():
    c = gen_xqam(32)
    k = xqam_detect(c, complex(0.4, 2.2))
    assert tuple(c.points[k]) == (1, 3)
    # far outside the removed corner: the nearest arm point
    k = xqam_detect(c, complex(40.0, 30.0))
    assert tuple(c.points[k]) == tuple(c.points[ml_detect(c, complex(40.0, 30.0))])


@pytest.mark.parametrize("order", [32, 128, 512])
@pytest.mark.parametrize("db", [5, 10, 15, 20])
def test_xqam_detector_matches_ml(order, db):
    c = gen_xqam(order)
    assert disagreements(c, xqam_detect, noisy(c, db, 10**5 if order < 512 else 2 * 10**4, db)) == 0


def test_xqam_detector_family_check():
    with pytest.raises(WrongFamily):
        xqam_detect(gen_sqam(16), 0j)


# ---------------------------------------------------- square and hex
@pytest.mark.parametrize("c", [gen_sqam(16), gen_sqam(256), gen_rqam(32), gen_rqam(32, "WideQ")], ids=str)
def test_square_detector_matches_ml(c):
    z = noisy(c, 10, 20000, 5)
    np.testing.assert_array_equal(square_detect(c, z), ml_detect(c, z))


@pytest.mark.parametrize(
    "c",
    [gen_3psk()]
    + [gen_regular_hqam(m) for m in (4, 8, 32, 128)]
    + [gen_irregular_hqam(m) for m in (8, 16, 64, 256)],
    ids=lambda c: f"{c.family.value}-{c.order}",
)
def test_hex_detector_matches_ml(c):
    z = noisy(c, 8, 20000, 7)
    assert disagreements(c, hex_lattice_detect, z) == 0


def test_fast_detect_dispatch():
    c = gen_star_qam(16, [1, 2])
    z = noisy(c, 10, 1000, 1)
    np.testing.assert_array_equal(fast_detect(c, z), ml_detect(c, z))


# ----------------------------------------------------------------- star
def test_star_coherent_noiseless():
    c = gen_star_qam(32, [1, 2, 3, 4])
    np.testing.assert_array_equal(star_coherent_detect(c, c.as_complex()), np.arange(32))


def test_star_differential_inner_to_outer():
    c = gen_star_qam(16, [1, 2])
    z = c.as_complex()
    assert star_differential_detect(c, z[0], z[8]) == 0b1000
    assert star_differential_detect(c, z[3], z[3]) == 0


def test_star_differential_all_pairs():
    c = gen_star_qam(16, [1, 2])
    z = c.as_complex()
    for a in range(16):
        words = np.arange(16)
        nxt = np.array([star_differential_modulate(c, [w], start=a)[0] for w in words])
        np.testing.assert_array_equal(star_differential_detect(c, np.full(16, z[a]), z[nxt]), words)


@pytest.mark.parametrize("order,rings", [(16, 2), (32, 4), (64, 4)])
def test_star_differential_round_trip(order, rings):
    c = generate(Family.STAR, order)
    assert c.params["rings"] == rings
    words = np.random.default_rng(order).integers(0, order, 500)
    stream = np.concatenate([[0], star_differential_modulate(c, words)])
    z = c.as_complex()[stream]
    np.testing.assert_array_equal(star_differential_detect(c, z[:-1], z[1:]), words)


def test_star_differential_zero_sample():
    c = gen_star_qam(16, [1, 2])
    with pytest.raises(ZeroMagnitudeSample):
        star_differential_detect(c, 0j, 1 + 0j)


# ------------------------------------------------------------------ I/O
def test_samples_csv():
    z = read_samples_csv("re,im\n# comment\n1.5,-2\n0,0.25\n")
    np.testing.assert_array_equal(z, [1.5 - 2j, 0.25j])


def test_indices_csv():
    text = write_indices_csv([2, 0], labels=np.array([0, 1, 3, 2]), width=2)
    assert text == "index,bits\n2,11\n0,00\n"
