"""Acceptance suite: one test, and one summary line, per criterion.

Printed table cells are compared at their printed precision: a cell matches
when the computed value, rounded *or* truncated to the printed number of
decimals, equals the printed number.  Printed fractions are compared as
exact rationals; a fraction with a decimal denominator (``2/289.06``) is
compared through that denominator at its printed precision.
"""

import functools
import math
import time
from decimal import ROUND_DOWN, ROUND_HALF_UP, Decimal
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from qamlab.analytic import SnrSpec, bep_from_sep, q1, q_craig, sep_for
from qamlab.bitmap import gray_penalty, map_gray_square, mapping_for
from qamlab.cli import comparison_rows, main
from qamlab.constellations import HQAM_ORDERS, Family, gen_irregular_hqam, gen_xqam, generate
from qamlab.detection import distance_gap, hqam_region_detect, ml_detect, xqam_detect
from qamlab.metrics import compute_metrics, exact_energy, hqam_params_closed_form
from qamlab.simulate import SimConfig, run_awgn

# ----------------------------------------------------------- reference cells
# (K, tau, tau_c, E_s/d^2, PAPR) as printed, regular then irregular.
TABLE_HQAM = {
    4: (("1", "5/2", "3/2", "2", "1.5"), ("1", "5/2", "3/2", "2", "1.5")),
    8: (("2/6", "7/2", "21/8", "6", "2.16"), ("32/69", "7/2", "21/8", "4.3125", "2.130")),
    16: (("2/9", "33/8", "27/8", "9", "2.11"), ("8/35", "33/8", "27/8", "8.75", "1.742")),
    32: (("8/71", "75/16", "33/8", "17.75", "2.084"), ("512/4503", "75/16", "33/8", "17.59", "1.8792")),
    64: (("2/37", "161/32", "147/32", "37", "2.51"), ("8/141", "163/32", "75/16", "35.25", "1.90")),
    128: (("2/72", "339/64", "159/32", "72", "2.347"), ("2/70.56", "343/64", "81/16", "70.562", "1.96")),
    256: (("2/149", "705/128", "675/128", "149", "2.74"), ("2/141", "711/128", "171/32", "141", "2.03")),
    512: (
        ("2/289.06", "2895/512", "5619/1024", "289.06", "2.535"),
        ("200/28217", "2911/512", "5667/1024", "282.17", "2.01"),
    ),
    1024: (
        ("2/597", "2945/512", "2883/512", "597", "2.86"),
        ("100/28227", "2955/512", "1449/256", "564.54", "1.99"),
    ),
}

# (E_s/d^2, PAPR) per family; missing cells are blank in the printed table.
TABLE_COMPARE = {
    4: {Family.SQAM: ("2", "1"), Family.REGULAR_HQAM: ("2", "1.5"), Family.IRREGULAR_HQAM: ("2", "1.5")},
    8: {Family.RQAM: ("6", "1.666"), Family.REGULAR_HQAM: ("4.5", "1.55"), Family.IRREGULAR_HQAM: ("4.312", "2.13")},
    16: {Family.SQAM: ("10", "1.80"), Family.REGULAR_HQAM: ("9", "2.11"), Family.IRREGULAR_HQAM: ("8.75", "1.742")},
    32: {
        Family.RQAM: ("26", "2.23"),
        Family.XQAM: ("20", "1.70"),
        Family.REGULAR_HQAM: ("17.75", "2.084"),
        Family.IRREGULAR_HQAM: ("17.59", "1.879"),
    },
    64: {Family.SQAM: ("42", "2.333"), Family.REGULAR_HQAM: ("37", "2.51"), Family.IRREGULAR_HQAM: ("35.25", "1.90")},
    128: {
        Family.RQAM: ("106", "2.584"),
        Family.XQAM: ("82", "2.073"),
        Family.REGULAR_HQAM: ("72", "2.347"),
        Family.IRREGULAR_HQAM: ("70.56", "1.96"),
    },
    256: {
        Family.SQAM: ("170", "2.647"),
        Family.REGULAR_HQAM: ("149", "2.74"),
        Family.IRREGULAR_HQAM: ("141.023", "2.03"),
    },
    512: {
        Family.RQAM: ("426", "2.784"),
        Family.XQAM: ("330", "2.28"),
        Family.REGULAR_HQAM: ("290", "2.494"),
        Family.IRREGULAR_HQAM: ("282.17", "2.01"),
    },
    1024: {Family.SQAM: ("682", "2.81"), Family.REGULAR_HQAM: ("597", "2.86"), Family.IRREGULAR_HQAM: ("564.54", "1.99")},
}

MC_CASES = [
    (Family.SQAM, 16),
    (Family.SQAM, 64),
    (Family.XQAM, 32),
    (Family.XQAM, 128),
    (Family.REGULAR_HQAM, 16),
    (Family.REGULAR_HQAM, 64),
    (Family.IRREGULAR_HQAM, 16),
    (Family.IRREGULAR_HQAM, 64),
    (Family.STAR, 16),
]
MC_SYMBOLS = 10**7
MC_SEED = 20240601
MC_GRID_DB = range(0, 40, 2)


def decimal_matches(value, printed: str) -> bool:
    """``value`` rounded or truncated to the decimals of ``printed`` equals it."""
    target = Decimal(printed)
    quantum = Decimal(1).scaleb(target.as_tuple().exponent)
    v = Decimal(repr(float(value))) if not isinstance(value, Fraction) else Decimal(value.numerator) / value.denominator
    return v.quantize(quantum, ROUND_HALF_UP) == target or v.quantize(quantum, ROUND_DOWN) == target


def cell_matches(value, printed: str) -> bool:
    if "/" not in printed:
        return decimal_matches(value, printed)
    num, den = printed.split("/")
    if "." in den:
        return decimal_matches(Fraction(num) / Fraction(value), den)
    return Fraction(value) == Fraction(int(num), int(den))


def test_cell_matching_rule():
    assert cell_matches(Fraction(5, 3), "1.666")
    assert cell_matches(Fraction(5, 3), "1.667")
    assert cell_matches(Fraction(5, 3), "1.67")
    assert not cell_matches(Fraction(5, 3), "1.68")
    assert cell_matches(Fraction(577805, 4096), "141")
    assert cell_matches(Fraction(1, 3), "2/6")
    assert cell_matches(Fraction(32, 1129), "2/70.56")
    assert not cell_matches(Fraction(2, 289), "2/289.06")


# ------------------------------------------------------------- criterion 1
def test_criterion_01_hqam_table(criterion_report):
    start = time.perf_counter()
    misses = []
    names = ("K", "tau", "tau_c", "Es/d2", "PAPR")
    for order, variants in TABLE_HQAM.items():
        for family, printed in zip((Family.REGULAR_HQAM, Family.IRREGULAR_HQAM), variants):
            r = compute_metrics(generate(family, order))
            values = (r.k_param, r.tau, r.tau_c, r.e_avg_exact, r.papr)
            for name, value, cell in zip(names, values, printed):
                if not cell_matches(value, cell):
                    shown = value if isinstance(value, Fraction) and value.denominator < 10**4 else f"{float(value):.5g}"
                    misses.append(f"{family.value}-{order} {name}: {shown} vs {cell}")
    elapsed = time.perf_counter() - start
    ok = not misses and elapsed < 1.0
    total = sum(len(v[0]) + len(v[1]) for v in TABLE_HQAM.values())
    criterion_report(1, ok, f"{total - len(misses)}/{total} cells, {elapsed:.2f}s; " + "; ".join(misses))
    assert not misses, misses
    assert elapsed < 1.0


# ------------------------------------------------------------- criterion 2
def test_criterion_02_comparison_table(criterion_report):
    start = time.perf_counter()
    rows = {r["M"]: r for r in comparison_rows()}
    elapsed = time.perf_counter() - start
    misses, total = [], 0
    for order, cells in TABLE_COMPARE.items():
        for family, (energy, papr) in cells.items():
            e = compute_metrics(generate(family, order)).e_avg_exact
            assert float(e) == pytest.approx(rows[order][f"{family.value}_Es_d2"])
            for name, value, cell in (("Es/d2", e, energy), ("PAPR", rows[order][f"{family.value}_PAPR"], papr)):
                total += 1
                if not cell_matches(value, cell):
                    misses.append(f"{family.value}-{order} {name}: {float(value):.5g} vs {cell}")
        blank = [f for f in (Family.SQAM, Family.RQAM, Family.XQAM) if f not in cells]
        assert all(rows[order][f"{f.value}_Es_d2"] is None for f in blank)
    ok = not misses and elapsed < 1.0
    criterion_report(2, ok, f"{total - len(misses)}/{total} cells, {elapsed:.2f}s; " + "; ".join(misses))
    assert not misses, misses
    assert elapsed < 1.0


# ------------------------------------------------------------- criterion 3
def test_criterion_03_xqam_energy_law(criterion_report):
    results = {m: exact_energy(gen_xqam(m).points) for m in (32, 128, 512, 2048)}
    brute = {m: Fraction(sum(int(x) ** 2 + int(y) ** 2 for x, y in gen_xqam(m).points), m) for m in results}
    ok = all(results[m] == brute[m] == Fraction(31 * m - 32, 48) for m in results)
    criterion_report(3, ok, ", ".join(f"{m}: {results[m]}" for m in results))
    assert ok


# ------------------------------------------------------------- criterion 4
def test_criterion_04_gray_penalties(criterion_report):
    x32 = gen_xqam(32)
    g_x = gray_penalty(x32, mapping_for(x32)).g_p
    h64 = gen_irregular_hqam(64)
    g_h = gray_penalty(h64, mapping_for(h64)).g_p
    squares = [generate(Family.SQAM, m) for m in (4, 16, 64, 256, 1024)]
    squares += [generate(Family.RQAM, m) for m in (8, 32, 128, 512)]
    unit = all(gray_penalty(c, map_gray_square(c)).g_p == 1 for c in squares)
    ok = abs(g_x - Fraction(1166, 1000)) <= Fraction(1, 1000) and abs(g_h - Fraction(1351, 1000)) <= Fraction(1, 1000)
    ok = ok and unit
    criterion_report(4, ok, f"32-XQAM {float(g_x):.4f}, irregular 64-HQAM {float(g_h):.4f}, square/rect all 1: {unit}")
    assert ok


# ------------------------------------------------------------- criterion 5
def test_criterion_05_detectors_match_ml(criterion_report):
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    cases = [(gen_irregular_hqam(64), hqam_region_detect), (gen_xqam(32), xqam_detect), (gen_xqam(128), xqam_detect)]
    bad = {}
    for c, detector in cases:
        for db in (5, 10, 15, 20):
            sent = rng.integers(0, c.order, 10**5)
            sigma = math.sqrt(np.mean(c.energies()) / 10 ** (db / 10) / 2)
            z = c.as_complex()[sent] + sigma * (rng.standard_normal(10**5) + 1j * rng.standard_normal(10**5))
            differ = np.asarray(detector(c, z)) != np.asarray(ml_detect(c, z))
            key = f"{c.order}-{c.family.value}@{db}dB"
            bad[key] = int(np.sum(differ & (distance_gap(c, z) > 1e-9)))
    elapsed = time.perf_counter() - start
    ok = not any(bad.values()) and elapsed < 10
    criterion_report(5, ok, f"{len(bad)} runs x 1e5 samples, disagreements {sum(bad.values())}, {elapsed:.1f}s")
    assert not any(bad.values()), bad
    assert elapsed < 10


# --------------------------------------------------------- criteria 6 and 7
@functools.lru_cache(maxsize=None)
def mc_point(family: Family, order: int, db: float):
    c = generate(family, order)
    m = mapping_for(c)
    detector = "star" if family is Family.STAR else "fast"
    return run_awgn(c, m, detector, SimConfig(MC_SEED, MC_SYMBOLS, SnrSpec.db(db)))


def analytic_points(family: Family, order: int):
    """Grid points whose closed-form SEP is large enough for 100 errors to be plausible."""
    c = generate(family, order)
    for db in MC_GRID_DB:
        sep = sep_for(c, SnrSpec.db(db))
        if sep * MC_SYMBOLS >= 10:
            yield c, float(db), sep


@pytest.mark.slow
def test_criterion_06_sep_against_monte_carlo(criterion_report):
    failures, checked, worst = [], 0, 0.0
    for family, order in MC_CASES:
        for c, db, sep in analytic_points(family, order):
            count = mc_point(family, order, db)
            if count.symbol_errors < 100:
                continue
            checked += 1
            se = math.sqrt(sep * (1 - sep) / MC_SYMBOLS)
            z = (count.ser - sep) / se
            worst = max(worst, abs(z))
            if abs(z) > 3:
                failures.append(f"{order}-{family.value}@{db:g}dB z={z:+.1f}")
    criterion_report(6, not failures, f"{checked} points, {len(failures)} outside 3 SE (max |z| {worst:.1f}); " + "; ".join(failures))
    assert not failures, failures


@pytest.mark.slow
def test_criterion_07_bep_approximation(criterion_report):
    failures, checked, worst = [], 0, 0.0
    for family, order in MC_CASES:
        c = generate(family, order)
        g_p = gray_penalty(c, mapping_for(c)).g_p
        for _, db, sep in analytic_points(family, order):
            if not 1e-4 <= sep <= 1e-1:
                continue
            checked += 1
            bep = bep_from_sep(sep, g_p, order)
            ber = mc_point(family, order, db).ber
            rel = abs(ber - bep) / bep
            worst = max(worst, rel)
            if rel > 0.2:
                failures.append(f"{order}-{family.value}@{db:g}dB {100 * rel:.0f}%")
    criterion_report(7, not failures, f"{checked} points, max deviation {100 * worst:.1f}%; " + "; ".join(failures))
    assert not failures, failures


# ------------------------------------------------------------- criterion 8
def test_criterion_08_hqam_fits(criterion_report):
    tau_err, k_err = {}, {}
    for order in HQAM_ORDERS:
        r = compute_metrics(gen_irregular_hqam(order))
        k_fit, tau_fit, _ = hqam_params_closed_form(order, "IrregularApprox")
        assert k_fit == pytest.approx(7 / (2 * order - 1))
        if order >= 16:
            tau_err[order] = abs(tau_fit - float(r.tau)) / float(r.tau)
        if order >= 32:
            k_err[order] = abs(k_fit - float(r.k_param)) / float(r.k_param)
    ok = max(tau_err.values()) <= 0.03 and max(k_err.values()) <= 0.05
    criterion_report(
        8, ok, f"max tau error {100 * max(tau_err.values()):.2f}%, max K error {100 * max(k_err.values()):.2f}%"
    )
    assert ok, (tau_err, k_err)


# ------------------------------------------------------------- criterion 9
def test_criterion_09_special_functions(criterion_report):
    xs = np.linspace(0.0, 8.0, 801)
    right = max(abs(q_craig(x, math.pi / 2) - q1(x)) for x in xs)
    zero = max(abs(q_craig(0.0, phi) - phi / math.pi) for phi in np.linspace(0.0, math.pi, 181))
    ok = right <= 1e-10 and zero <= 1e-12
    criterion_report(9, ok, f"max |q_craig(x,pi/2)-Q(x)| {right:.1e}, max |q_craig(0,phi)-phi/pi| {zero:.1e}")
    assert ok


# ------------------------------------------------------------ criterion 10
def test_criterion_10_determinism(tmp_path, capsys, criterion_report):
    base = ["simulate", "--family", "irregularhqam", "--order", "64", "--snr-sweep", "10:20:5"]
    base += ["--seed", "31337", "--symbols", "400000", "--chunk", "50000"]
    artifacts = {}
    for workers in (1, 4, 8):
        for attempt in (0, 1):
            out = tmp_path / f"w{workers}_{attempt}.csv"
            assert main(base + ["--workers", str(workers), "--out", str(out)]) == 0
            artifacts[(workers, attempt)] = out.read_bytes() + Path(f"{out}.manifest.json").read_bytes()
    capsys.readouterr()
    ok = len(set(artifacts.values())) == 1
    criterion_report(10, ok, f"{len(artifacts)} runs over workers 1/4/8, distinct artifacts: {len(set(artifacts.values()))}")
    assert ok

