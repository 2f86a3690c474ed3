"""Closed-form symbol and bit error probabilities over AWGN.

All functions take the signal-to-noise ratio as an explicit :class:`SnrSpec`
so that per-symbol and per-bit conventions are never confused.  Noise is
complex Gaussian with per-component variance ``N0/2``.

Numerical building blocks:

* :func:`q1` -- Gaussian tail via :func:`scipy.special.ndtr`.
* :func:`q_craig` -- finite-angle Craig integral, adaptive Gauss-Kronrod
  (:func:`scipy.integrate.quad`).
* :func:`f_corner` -- the corner integral ``int Q(2 i eta + x) phi(x) dx``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate, special

from .errors import NonPositiveParams, PhiOutOfRange, RatioDegenerate, UnsupportedOrder

#: Absolute tolerance requested from the adaptive quadrature.
QUAD_EPSABS = 1e-13


# ------------------------------------------------------------------- SNR
@dataclass(frozen=True)
class SnrSpec:
    """A signal-to-noise ratio with explicit unit and energy convention.

    Parameters
    ----------
    value : float
        Numerical value, in dB or linear according to ``unit``.
    unit : {"dB", "linear"}
    convention : {"PerSymbol", "PerBit"}
        ``PerSymbol`` means ``Es/N0``; ``PerBit`` means ``Eb/N0``.

    Examples
    --------
    >>> SnrSpec(10.0).linear
    10.0
    >>> round(SnrSpec(6.0, convention="PerBit").per_symbol(4), 4)
    15.9243
    """

    value: float
    unit: str = "dB"
    convention: str = "PerSymbol"

    def __post_init__(self):
        if self.unit not in ("dB", "linear"):
            raise ValueError(f"unit must be 'dB' or 'linear', got {self.unit!r}")
        if self.convention not in ("PerSymbol", "PerBit"):
            raise ValueError(f"convention must be 'PerSymbol' or 'PerBit', got {self.convention!r}")
        if self.unit == "linear" and not self.value > 0:
            raise ValueError("linear SNR must be positive")

    @classmethod
    def db(cls, value: float, convention: str = "PerSymbol") -> "SnrSpec":
        return cls(float(value), "dB", convention)

    @property
    def linear(self) -> float:
        return 10.0 ** (self.value / 10.0) if self.unit == "dB" else float(self.value)

    @property
    def decibels(self) -> float:
        return float(self.value) if self.unit == "dB" else 10.0 * math.log10(self.value)

    def per_symbol(self, bits_per_symbol: float) -> float:
        """Linear ``Es/N0``."""
        return self.linear * bits_per_symbol if self.convention == "PerBit" else self.linear

    def per_bit(self, bits_per_symbol: float) -> float:
        """Linear ``Eb/N0``."""
        return self.linear / bits_per_symbol if self.convention == "PerSymbol" else self.linear


# ---------------------------------------------------- special functions
def q1(x):
    """Gaussian tail probability ``Q(x) = P(N(0,1) > x)``."""
    return special.ndtr(-np.asarray(x, dtype=float))


def _craig_scalar(x: float, phi: float) -> float:
    if phi == 0.0:
        return 0.0
    if x == 0.0:
        return phi / math.pi

    def integrand(theta):
        s = math.sin(theta)
        if s <= 0:
            return 0.0
        # x/s first: s*s underflows for tiny angles
        r = x / s
        return math.exp(-0.5 * r * r)

    # for small x the integrand climbs from 0 to ~1 around theta ~ x; tell quad
    points = [x] if x < 0.5 * phi else None
    value, _ = integrate.quad(integrand, 0.0, phi, epsabs=QUAD_EPSABS, epsrel=1e-12, limit=200, points=points)
    return value / math.pi


def q_craig(x, phi):
    """Craig-form Gaussian probability ``(1/pi) int_0^phi exp(-x^2 / (2 sin^2 t)) dt``.

    ``q_craig(x, pi/2) = Q(x)`` and ``q_craig(x, pi/4) = Q(x)**2``.

    Raises
    ------
    PhiOutOfRange
        If any ``phi`` lies outside ``[0, pi]``.
    """
    x_arr, phi_arr = np.broadcast_arrays(np.asarray(x, float), np.asarray(phi, float))
    if np.any(phi_arr < 0) or np.any(phi_arr > math.pi):
        raise PhiOutOfRange("phi must lie in [0, pi]")
    out = np.array([_craig_scalar(abs(float(a)), float(b)) for a, b in zip(x_arr.ravel(), phi_arr.ravel())])
    out = out.reshape(x_arr.shape)
    return float(out) if out.ndim == 0 else out


def normal_pdf(x):
    return np.exp(-0.5 * np.square(x)) / math.sqrt(2 * math.pi)


def f_corner(i: int, eta: float, upper: float, lower: float | None = None) -> float:
    """Corner integral ``int_lower^upper Q(2 i eta + x) phi(x) dx``.

    ``phi`` is the standard normal density.  By default the lower limit is
    ``eta`` itself (so ``f_corner(i, eta, eta) == 0``); the cross-QAM
    error probabilities use ``lower = -eta``, see :func:`sep_xqam`.
    """
    lo = eta if lower is None else lower
    if upper == lo:
        return 0.0

    def integrand(x):
        return float(q1(2 * i * eta + x)) * math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)

    value, _ = integrate.quad(integrand, lo, upper, epsabs=QUAD_EPSABS, epsrel=1e-12, limit=200)
    return value


# ------------------------------------------------------------ cross QAM
def _xqam_steps(order: int) -> int:
    m = int(round(math.log2(order))) if order > 0 else 0
    if 2**m != order or m % 2 == 0 or m < 5:
        raise UnsupportedOrder(f"cross QAM needs M = 2**(2n+1), n >= 2; got {order}")
    return math.isqrt(order // 32)


def xqam_lambda(order: int) -> float:
    """``lambda = 48 / (31M - 32)``, the reciprocal of the cross QAM energy in ``d**2``."""
    return 48.0 / (31 * order - 32)


def sep_xqam_conditional(order: int, gamma: float, sum_weights: Sequence[float] = (8.0, 4.0, 4.0)) -> float:
    """Cross QAM SEP written with one- and two-dimensional Gaussian Q functions.

    Parameters
    ----------
    order : int
        ``M = 2**(2n+1)``, ``n >= 2``.
    gamma : float
        Linear per-symbol SNR.
    sum_weights : 3 floats
        Numerators ``w`` of the ``w/M`` factors in front of the three finite
        sums over the staircase corners.  The default ``(8, 4, 4)`` is the
        value that makes this expression identical to
        :func:`sep_xqam_exact`; ``(16, 8, 8)`` reproduces an alternative,
        doubled weighting for comparison.
    """
    steps = _xqam_steps(order)
    lam = xqam_lambda(order)
    a = math.sqrt(2 * lam * gamma)
    b = math.sqrt(lam * gamma)
    g1 = 4 - 6 / math.sqrt(2 * order)
    g2 = 4 - 12 / math.sqrt(2 * order) + 12 / order
    qa = float(q1(a))
    total = g1 * qa + 4 / order * float(q1(2 * b)) - g2 * qa * qa
    w_alpha, w_beta_plus, w_beta_minus = sum_weights
    for i in range(1, steps):
        total -= w_alpha / order * q_craig(a, math.atan(1 / (2 * i + 1)))
        total -= w_beta_plus / order * q_craig(2 * i * b, math.atan(i / (i + 1)))
    for i in range(2, steps + 1):
        total += w_beta_minus / order * q_craig(2 * i * b, math.atan(i / (i - 1)))
    return total


def sep_xqam_exact(order: int, gamma: float) -> float:
    """Cross QAM SEP as a per-class sum over interior, edge and corner symbols.

    With ``eta = sqrt(2 lambda gamma)`` (the half distance over the noise
    standard deviation) and ``c = sqrt(M/32)`` staircase steps per quadrant
    corner::

        4/M [ (M - 6c) Q - (M - 12c + 2) Q^2
              + 2 F(c, eta, inf) + 2 sum_{i<c} F(i, eta, eta) ]

    where ``F(i, eta, u) = int_{-eta}^{u} Q(2 i eta + x) phi(x) dx``.
    """
    steps = _xqam_steps(order)
    eta = math.sqrt(2 * xqam_lambda(order) * gamma)
    q = float(q1(eta))
    total = (order - 6 * steps) * q - (order - 12 * steps + 2) * q * q
    total += 2 * f_corner(steps, eta, math.inf, lower=-eta)
    total += 2 * sum(f_corner(i, eta, eta, lower=-eta) for i in range(1, steps))
    return 4 / order * total


def sep_xqam(order: int, snr: SnrSpec, form: str = "conditional") -> float:
    """Symbol error probability of ``M``-ary cross QAM (exact, ML detection).

    Parameters
    ----------
    order : int
        ``M = 2**(2n+1)``, ``n >= 2``.
    snr : SnrSpec
        Converted to per-symbol SNR internally.
    form : {"conditional", "exact", "both"}
        ``conditional`` uses Q-function / Craig terms, ``exact`` the per-class
        integral form; ``both`` evaluates the two and raises ``ArithmeticError``
        if they differ by more than ``1e-9``.
    """
    gamma = snr.per_symbol(math.log2(order))
    if form == "conditional":
        return sep_xqam_conditional(order, gamma)
    if form == "exact":
        return sep_xqam_exact(order, gamma)
    if form == "both":
        a, b = sep_xqam_conditional(order, gamma), sep_xqam_exact(order, gamma)
        if abs(a - b) > 1e-9:
            raise ArithmeticError(f"cross QAM SEP forms disagree: {a!r} vs {b!r}")
        return a
    raise ValueError(f"form must be 'conditional', 'exact' or 'both', got {form!r}")


# ---------------------------------------------------------- hexagonal QAM
def sep_hqam(tau, tau_c, k_param, snr: SnrSpec, order: int | None = None) -> float:
    """Nearest-neighbour SEP approximation for hexagonal QAM.

    ``tau Q(sqrt(K g)) - 2 tau_c Q(sqrt(K g)) Q(sqrt(K g / 3)) + (2/3) tau_c Q(sqrt(2 K g / 3))**2``

    with ``g`` the per-symbol SNR and ``K = 2 d**2 / E_avg`` (so
    ``sqrt(K g) = d / sigma``).  The result is clipped to ``[0, 1]``, or to
    ``[0, (M-1)/M]`` when ``order`` is given.
    """
    tau, tau_c, k_param = float(tau), float(tau_c), float(k_param)
    if tau <= 0 or k_param <= 0 or tau_c < 0:
        raise NonPositiveParams("tau and K must be positive and tau_c non-negative")
    bits = math.log2(order) if order else 1.0
    if snr.convention == "PerBit" and order is None:
        raise ValueError("a per-bit SNR needs the constellation order")
    kg = k_param * snr.per_symbol(bits)
    q_a = float(q1(math.sqrt(kg)))
    q_b = float(q1(math.sqrt(kg / 3)))
    q_c = float(q1(math.sqrt(2 * kg / 3)))
    value = tau * q_a - 2 * tau_c * q_a * q_b + (2.0 / 3.0) * tau_c * q_c * q_c
    ceiling = (order - 1) / order if order else 1.0
    return min(max(value, 0.0), ceiling)


# ---------------------------------------------------- polygonal regions
@dataclass(frozen=True)
class SubRegion:
    """One angular sub-region of a polygonal decision-region error integral.

    The region contributes ``weight/(2 pi) * int_0^zeta exp(-a L^2 sin^2(phi) / (2 N sin^2(t + phi))) dt``.
    """

    weight: float
    zeta: float
    phi: float
    a: float

    def __post_init__(self):
        if not 0 < self.zeta < math.pi:
            raise ValueError(f"zeta must lie in (0, pi), got {self.zeta}")


def sep_subregions(regions: Iterable[SubRegion], l2_over_2n: float) -> float:
    """Weighted sum of sub-region error integrals.

    Parameters
    ----------
    regions : iterable of SubRegion
    l2_over_2n : float
        ``L**2 / (2N)``, the squared reference length over twice the
        per-component noise variance.
    """
    total = 0.0
    for r in regions:
        scale = r.a * l2_over_2n * math.sin(r.phi) ** 2

        def integrand(theta, scale=scale, phi=r.phi):
            s = math.sin(theta + phi)
            return math.exp(-scale / (s * s))

        value, _ = integrate.quad(integrand, 0.0, r.zeta, epsabs=QUAD_EPSABS, epsrel=1e-12, limit=200)
        total += r.weight * value / (2 * math.pi)
    return total


def star16_subregions(ring_ratio: float) -> list[SubRegion]:
    """Sub-regions of 16-star QAM with outer/inner radius ratio ``ring_ratio > 1``.

    Regions 1-2 belong to an inner-ring symbol, 3-4 to an outer-ring symbol,
    for the sector/threshold detector of :func:`qamlab.detection.star_coherent_detect`.
    """
    big_r = float(ring_ratio)
    if big_r == 1.0:
        raise RatioDegenerate("ring ratio of 1 collapses the two rings")
    if big_r < 1.0:
        raise ValueError("ring_ratio must be outer/inner > 1")
    t = math.sqrt(2) - 1
    zeta1 = math.atan(t * (big_r + 1) / (big_r - 1))
    a_side = 0.25 * ((big_r - 1) ** 2 + t * t * (big_r + 1) ** 2)
    return [
        SubRegion(1.0, zeta1, math.pi / 2 - zeta1, a_side),
        SubRegion(1.0, math.pi - zeta1, math.pi / 8, 1.0),
        SubRegion(1.0, zeta1, math.pi / 2 - zeta1, a_side),
        SubRegion(1.0, 7 * math.pi / 8 - zeta1, math.pi / 8 + zeta1, a_side),
    ]


def sep_star16(ring_ratio: float, snr: SnrSpec) -> float:
    """Symbol error probability of coherent 16-star QAM.

    Parameters
    ----------
    ring_ratio : float
        Outer over inner ring radius.  A value below one is read as
        inner over outer and inverted.
    snr : SnrSpec
        Converted to per-bit ``Eb/N0`` (4 bits per symbol); the inner radius
        enters as ``r_i**2 / (2N) = 8 (Eb/N0) / (1 + ratio**2)``.

    Raises
    ------
    RatioDegenerate
        If the ratio is exactly one.
    """
    big_r = float(ring_ratio)
    if big_r <= 0:
        raise ValueError("ring ratio must be positive")
    if big_r == 1.0:
        raise RatioDegenerate("ring ratio of 1 collapses the two rings")
    if big_r < 1.0:
        big_r = 1.0 / big_r
    gamma_b = snr.per_bit(4)
    return sep_subregions(star16_subregions(big_r), 8.0 * gamma_b / (1 + big_r**2))


# --------------------------------------------------------- square QAM etc
def sep_sqam(order: int, snr: SnrSpec) -> float:
    """Exact SEP of Gray square QAM: ``1 - (1 - 2 (1 - 1/sqrt(M)) Q(sqrt(3 g/(M-1))))**2``."""
    root = math.isqrt(order)
    if order < 4 or root * root != order or order & (order - 1):
        raise UnsupportedOrder(f"square QAM needs M = 4**k, got {order}")
    gamma = snr.per_symbol(math.log2(order))
    p = 2 * (1 - 1 / root) * float(q1(math.sqrt(3 * gamma / (order - 1))))
    return 2 * p - p * p


def sep_rqam(columns: int, rows: int, snr: SnrSpec) -> float:
    """Exact SEP of a ``columns x rows`` rectangular QAM on the odd grid."""
    order = columns * rows
    gamma = snr.per_symbol(math.log2(order))
    energy = (columns**2 - 1 + rows**2 - 1) / 3.0
    q = float(q1(math.sqrt(2 * gamma / energy)))
    err_c = 2 * (1 - 1 / columns) * q
    err_r = 2 * (1 - 1 / rows) * q
    return err_c + err_r - err_c * err_r


def bep_from_sep(sep: float, g_p, order: int) -> float:
    """``P_b = G_p * P_s / log2(M)``, clipped to ``[0, 1]``."""
    if not 0 <= sep <= 1:
        raise ValueError("sep must be a probability")
    value = float(g_p) * float(sep) / math.log2(order)
    return min(max(value, 0.0), 1.0)


# ------------------------------------------------------------- dispatch
def sep_for(c, snr: SnrSpec) -> float:
    """Analytic SEP for a constellation of any supported family."""
    from .constellations import Family
    from .metrics import compute_metrics

    fam = c.family
    if fam is Family.SQAM:
        return sep_sqam(c.order, snr)
    if fam is Family.RQAM:
        return sep_rqam(int(c.params["columns"]), int(c.params["rows"]), snr)
    if fam is Family.XQAM:
        return sep_xqam(c.order, snr)
    if fam in (Family.REGULAR_HQAM, Family.IRREGULAR_HQAM, Family.PSK3):
        r = compute_metrics(c)
        return sep_hqam(r.tau, r.tau_c, r.k_param, snr, order=c.order)
    if fam is Family.STAR and c.order == 16:
        return sep_star16(float(c.params["ring_ratio"]), snr)
    raise UnsupportedOrder(f"no closed-form SEP for {fam.value} with M={c.order}")


def analytic_curve_csv(snr_db: Sequence[float], sep: Sequence[float], ber: Sequence[float] | None = None) -> str:
    """CSV with columns ``snr_db, sep_analytic[, ber_analytic]``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["snr_db", "sep_analytic"] + (["ber_analytic"] if ber is not None else [])
    writer.writerow(header)
    for k, s in enumerate(snr_db):
        row = [f"{s:.6g}", f"{sep[k]:.12e}"]
        if ber is not None:
            row.append(f"{ber[k]:.12e}")
        writer.writerow(row)
    return buf.getvalue()


__all__ = [
    "SnrSpec",
    "SubRegion",
    "analytic_curve_csv",
    "bep_from_sep",
    "f_corner",
    "normal_pdf",
    "q1",
    "q_craig",
    "sep_for",
    "sep_hqam",
    "sep_rqam",
    "sep_sqam",
    "sep_star16",
    "sep_subregions",
    "sep_xqam",
    "sep_xqam_conditional",
    "sep_xqam_exact",
    "star16_subregions",
    "xqam_lambda",
]
