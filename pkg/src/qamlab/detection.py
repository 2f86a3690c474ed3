"""Symbol detectors: exhaustive ML, strip/region HQAM, cross QAM and star QAM.

Every fast detector here is an exact re-implementation of maximum-likelihood
(minimum-distance) detection for its constellation, except on measure-zero
decision boundaries, and is tested against :func:`ml_detect`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.spatial import Voronoi, cKDTree

from .bitmap import gray
from .constellations import Constellation, Family, gen_irregular_hqam, xqam_geometry
from .errors import WrongConstellation, WrongFamily, ZeroMagnitudeSample

#: Samples processed per block by the exhaustive detector.
ML_BLOCK = 8192


def _as_complex(z) -> np.ndarray:
    return np.atleast_1d(np.asarray(z, dtype=complex))


def _maybe_scalar(z, out):
    return int(out[0]) if np.ndim(z) == 0 else out


# -------------------------------------------------------------------- ML
def ml_detect(c: Constellation, z):
    """Index of the nearest constellation point (exhaustive search).

    Ties go to the lowest index.  ``z`` may be a complex scalar or array.
    """
    zz = _as_complex(z)
    pts = c.as_complex()
    out = np.empty(zz.shape, dtype=np.int64)
    flat, res = zz.ravel(), out.reshape(-1)
    for start in range(0, flat.size, ML_BLOCK):
        block = flat[start:start + ML_BLOCK]
        dist = np.abs(block[:, None] - pts[None, :]) ** 2
        res[start:start + ML_BLOCK] = np.argmin(dist, axis=1)
    return _maybe_scalar(z, out)


def nearest_point(c: Constellation, z) -> np.ndarray:
    """k-d tree nearest-point search (fast ML for large batches)."""
    zz = _as_complex(z)
    _, idx = cKDTree(c.points).query(np.column_stack([zz.real.ravel(), zz.imag.ravel()]))
    return idx.reshape(zz.shape)


def distance_gap(c: Constellation, z) -> np.ndarray:
    """Difference between the second-smallest and smallest point distance per sample."""
    zz = _as_complex(z).ravel()
    dist, _ = cKDTree(c.points).query(np.column_stack([zz.real, zz.imag]), k=2)
    return dist[:, 1] - dist[:, 0]


# -------------------------------------------------------- region tables
@dataclass(frozen=True)
class RegionTable:
    """Vertical-strip decision table.

    The plane is cut into strips at ``breakpoints`` (strip ``s`` covers
    ``breakpoints[s-1] <= x < breakpoints[s]``, with unbounded outer strips).
    Inside strip ``s`` the candidate symbols ``candidates[s]`` are ordered
    from top to bottom, and the boundary between candidates ``k`` and
    ``k+1`` is the line ``y = intercept[s, k] + slope[s, k] * x``.
    """

    breakpoints: np.ndarray
    candidates: tuple
    intercept: np.ndarray
    slope: np.ndarray

    @property
    def n_strips(self) -> int:
        return len(self.candidates)

    def boundary_coefficients(self, strip: int) -> list[tuple[float, float]]:
        """``(c, s)`` pairs with boundary ``y = (c + s*x) / sqrt(3)`` for one strip."""
        n = len(self.candidates[strip]) - 1
        r3 = math.sqrt(3)
        return [(self.intercept[strip, k] * r3, self.slope[strip, k] * r3) for k in range(n)]

    @classmethod
    def from_constellation(cls, c: Constellation) -> "RegionTable":
        """Build the table from the Voronoi geometry of ``c``.

        Strip edges sit at the distinct x-coordinates of the Voronoi
        vertices, so no two cell boundaries cross inside a strip and every
        boundary is a single straight line there; beyond the outermost
        vertices the cell edges are non-crossing rays.  The cells met by a vertical line are therefore the same across a
        strip; they are read off one probe line per strip, ordered top to
        bottom, and consecutive candidates are separated by their
        perpendicular bisector.
        """
        pts = c.points
        breakpoints = np.unique(np.round(Voronoi(pts).vertices[:, 0], 9))
        probes = np.concatenate(
            [[breakpoints[0] - 1], 0.5 * (breakpoints[1:] + breakpoints[:-1]), [breakpoints[-1] + 1]]
        )
        cands, rows_c, rows_s = [], [], []
        for x0 in probes:
            found = []
            for k in range(c.order):
                span = _cell_span_on_vertical(pts, k, x0)
                if span is not None:
                    found.append((-span[1], k))
            found.sort()
            order = [k for _, k in found]
            ic, sl = [], []
            for upper, lower in zip(order[:-1], order[1:]):
                p, q = pts[upper], pts[lower]
                # |z-p|^2 = |z-q|^2  ->  y = (|p|^2-|q|^2)/(2(py-qy)) - x (px-qx)/(py-qy)
                dy = p[1] - q[1]
                ic.append((p @ p - q @ q) / (2 * dy))
                sl.append(-(p[0] - q[0]) / dy)
            cands.append(tuple(order))
            rows_c.append(ic)
            rows_s.append(sl)
        width = max(len(r) for r in rows_c)
        intercept = np.full((len(cands), width), -np.inf)
        slope = np.zeros((len(cands), width))
        for s, (ic, sl) in enumerate(zip(rows_c, rows_s)):
            intercept[s, : len(ic)] = ic
            slope[s, : len(sl)] = sl
        return cls(breakpoints, tuple(cands), intercept, slope)

    def detect(self, z):
        """Strip lookup followed by boundary comparisons."""
        zz = _as_complex(z).ravel()
        x, y = zz.real, zz.imag
        strip = np.searchsorted(self.breakpoints, x, side="right")
        bounds = self.intercept[strip] + self.slope[strip] * x[:, None]
        position = np.sum(y[:, None] < bounds, axis=1)
        lookup = np.full((self.n_strips, self.intercept.shape[1] + 1), -1, dtype=np.int64)
        for s, cand in enumerate(self.candidates):
            lookup[s, : len(cand)] = cand
        out = lookup[strip, position].reshape(np.shape(_as_complex(z)))
        return _maybe_scalar(z, out)


def _cell_span_on_vertical(pts, k, x0):
    """``(y_low, y_high)`` of the Voronoi cell of point ``k`` on the line ``x = x0``, or ``None``."""
    p = pts[k]
    others = np.delete(pts, k, axis=0)
    diff = others - p
    rhs = 0.5 * (np.sum(others**2, axis=1) - p @ p) - diff[:, 0] * x0
    # diff_y * y <= rhs for every other point
    vertical = np.abs(diff[:, 1]) < 1e-12
    if np.any(vertical & (rhs < -1e-12)):
        return None
    up, down = diff[:, 1] > 1e-12, diff[:, 1] < -1e-12
    high = np.min(rhs[up] / diff[up, 1]) if np.any(up) else np.inf
    low = np.max(rhs[down] / diff[down, 1]) if np.any(down) else -np.inf
    return (low, high) if high - low > 1e-9 else None


@lru_cache(maxsize=1)
def irregular64_table() -> RegionTable:
    """Region table of the 64-point irregular hexagonal constellation."""
    return RegionTable.from_constellation(gen_irregular_hqam(64))


def hqam_region_detect(c: Constellation, z):
    """Strip-based detector for the 64-point irregular hexagonal QAM.

    The constellation is cut into vertical strips one ``d`` wide between
    ``x = -7`` and ``x = 7``, plus ``[-9, -7]``, ``[7, 9]`` and the two
    unbounded ends; within a strip the received ordinate is compared with at
    most eight straight lines to pick one of at most nine symbols.

    Raises
    ------
    WrongConstellation
        If ``c`` is not the layout produced by ``gen_irregular_hqam(64)``.
    """
    reference = gen_irregular_hqam(64)
    if c.family is not Family.IRREGULAR_HQAM or c.order != 64 or not np.allclose(c.points, reference.points):
        raise WrongConstellation("the region table is defined for gen_irregular_hqam(64) only")
    return irregular64_table().detect(z)


def region_detect(c: Constellation, z):
    """Region-table detection for any hexagonal layout; falls back to ML otherwise."""
    if c.family is Family.IRREGULAR_HQAM and c.order == 64:
        return hqam_region_detect(c, z)
    return ml_detect(c, z)


# ------------------------------------------------------------ cross QAM
def xqam_detect(c: Constellation, z):
    """Cross QAM detector: per-axis slicing plus a 45-degree rule in the cut corners.

    Each coordinate is sliced to the nearest odd integer inside the bounding
    square.  If the result falls in a removed corner, the symbol is moved
    onto the nearer arm: the row is clamped to the arm edge when
    ``|x| > |y|`` and the column otherwise.
    """
    if c.family is not Family.XQAM:
        raise WrongFamily(f"xqam_detect needs XQAM, got {c.family.value}")
    geo = xqam_geometry(c.order)
    side, cut = geo["side"], geo["corner_cut"]
    edge = side - 1
    arm = side - 1 - 2 * cut
    zz = _as_complex(z).ravel()
    x, y = zz.real, zz.imag

    def slice_axis(v):
        return np.clip(2 * np.floor(v / 2) + 1, -edge, edge)

    qx, qy = slice_axis(x), slice_axis(y)
    corner = (np.abs(qx) > arm) & (np.abs(qy) > arm)
    wide = np.abs(x) > np.abs(y)
    qy = np.where(corner & wide, np.sign(qy) * arm, qy)
    qx = np.where(corner & ~wide, np.sign(qx) * arm, qx)
    lookup = np.full((side, side), -1, dtype=np.int64)
    cols = np.rint((c.points[:, 0] + edge) / 2).astype(int)
    rows = np.rint((c.points[:, 1] + edge) / 2).astype(int)
    lookup[cols, rows] = np.arange(c.order)
    out = lookup[((qx + edge) / 2).astype(int), ((qy + edge) / 2).astype(int)]
    return _maybe_scalar(z, out.reshape(np.shape(_as_complex(z))))


def square_detect(c: Constellation, z):
    """Per-axis slicer for square and rectangular QAM."""
    if c.family not in (Family.SQAM, Family.RQAM):
        raise WrongFamily(f"square_detect needs SQAM or RQAM, got {c.family.value}")
    zz = _as_complex(z).ravel()
    xs = np.unique(c.points[:, 0])
    ys = np.unique(c.points[:, 1])
    ix = np.clip(np.floor((zz.real - xs[0]) / 2 + 0.5), 0, len(xs) - 1).astype(int)
    iy = np.clip(np.floor((zz.imag - ys[0]) / 2 + 0.5), 0, len(ys) - 1).astype(int)
    lookup = np.full((len(xs), len(ys)), -1, dtype=np.int64)
    lookup[np.searchsorted(xs, c.points[:, 0]), np.searchsorted(ys, c.points[:, 1])] = np.arange(c.order)
    return _maybe_scalar(z, lookup[ix, iy].reshape(np.shape(_as_complex(z))))


# ------------------------------------------------------------- star QAM
def _star_layout(c: Constellation):
    if c.family is not Family.STAR:
        raise WrongFamily(f"star detection needs StarQAM, got {c.family.value}")
    return np.asarray(c.params["ring_radii"], float), int(c.params["points_per_ring"])


def star_coherent_detect(c: Constellation, z):
    """Coherent sector/threshold detector for star QAM.

    The phase picks one of ``P`` sectors of width ``2*pi/P`` centred on the
    constellation phases; the projection onto the sector centre line is then
    compared with the mid-points between adjacent ring radii.
    """
    radii, per_ring = _star_layout(c)
    zz = _as_complex(z).ravel()
    step = 2 * np.pi / per_ring
    sector = np.mod(np.rint(np.angle(zz) / step), per_ring).astype(np.int64)
    proj = (zz * np.exp(-1j * sector * step)).real
    ring = np.searchsorted(0.5 * (radii[1:] + radii[:-1]), proj, side="right")
    return _maybe_scalar(z, (ring * per_ring + sector).reshape(np.shape(_as_complex(z))))


def _gray_inverse(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=np.int64).copy()
    out = g.copy()
    shift = g >> 1
    while np.any(shift):
        out ^= shift
        shift >>= 1
    return out


def star_word_bits(c: Constellation) -> tuple[int, int]:
    """``(amplitude_bits, phase_bits)`` of a star QAM differential word."""
    radii, per_ring = _star_layout(c)
    return int(math.log2(len(radii))), int(math.log2(per_ring))


def star_differential_modulate(c: Constellation, words, start: int = 0) -> np.ndarray:
    """Differentially encode words into a symbol-index stream.

    The high (amplitude) bits, Gray-decoded, give the ring step
    ``(ring + step) mod rings`` -- for two rings a 1 toggles the ring; the
    low (phase) bits, Gray-decoded, give the phase advance in units of
    ``2*pi/P``.  The stream starts from symbol ``start`` (not included).
    """
    radii, per_ring = _star_layout(c)
    amp_bits, phase_bits = star_word_bits(c)
    w = np.asarray(words, dtype=np.int64)
    ring_step = _gray_inverse(w >> phase_bits)
    phase_step = _gray_inverse(w & (per_ring - 1))
    ring = np.mod(start // per_ring + np.cumsum(ring_step), len(radii))
    phase = np.mod(start % per_ring + np.cumsum(phase_step), per_ring)
    return ring * per_ring + phase


def star_differential_detect(c: Constellation, z_prev, z_curr):
    """Recover differential words from consecutive received samples.

    Amplitude: with radii scaled so the inner radius is 1, a two-ring
    constellation flags a ring change when ``|z_curr|/|z_prev|`` exceeds
    ``(r_i + r_o)/2`` or falls below ``2/(r_i + r_o)``.  With more rings the
    previous ring is taken as the nearest ring to ``|z_prev|`` and the
    current ring is the one whose ratio to it is closest to the received
    ratio on a log scale (thresholds at geometric means of adjacent ratios).

    Phase: ``(arg z_curr - arg z_prev) mod 2 pi`` rounded to the nearest
    multiple of ``2*pi/P`` and Gray encoded.

    Raises
    ------
    ZeroMagnitudeSample
        If any sample has zero magnitude.
    """
    radii, per_ring = _star_layout(c)
    amp_bits, phase_bits = star_word_bits(c)
    zp, zc = _as_complex(z_prev).ravel(), _as_complex(z_curr).ravel()
    mag_p, mag_c = np.abs(zp), np.abs(zc)
    if np.any(mag_p == 0) or np.any(mag_c == 0):
        raise ZeroMagnitudeSample("differential detection needs non-zero samples")
    ratio = mag_c / mag_p
    rings = len(radii)
    if rings == 2:
        scaled = radii / radii[0]
        mid = 0.5 * (scaled[0] + scaled[1])
        step = ((ratio > mid) | (ratio < 1 / mid)).astype(np.int64)
    else:
        log_r = np.log(radii)
        ring_prev = np.searchsorted(0.5 * (log_r[1:] + log_r[:-1]), np.log(mag_p), side="right")
        # candidate log-ratios r_j / r_prev, sorted by j; thresholds at their midpoints
        cand = log_r[None, :] - log_r[ring_prev][:, None]
        mids = 0.5 * (cand[:, 1:] + cand[:, :-1])
        ring_curr = np.sum(np.log(ratio)[:, None] > mids, axis=1)
        step = np.mod(ring_curr - ring_prev, rings)
    dtheta = np.mod(np.angle(zc) - np.angle(zp), 2 * np.pi)
    phase = np.mod(np.rint(dtheta / (2 * np.pi / per_ring)), per_ring).astype(np.int64)
    words = (gray(step) << phase_bits) | gray(phase)
    shape = np.broadcast_shapes(np.shape(z_prev), np.shape(z_curr))
    return int(words[0]) if shape == () else words.reshape(shape)


# ---------------------------------------------------------- hex lattice
SQRT3 = math.sqrt(3.0)


def _hex_coordinates(c: Constellation):
    """Integer lattice coordinates ``(i, j)`` of every point, with origin ``points[0]``.

    The lattice is ``origin + i*(2, 0) + j*(1, sqrt(3))``.  Returns ``None``
    when ``c`` is not a subset of such a lattice.
    """
    origin = c.points[0]
    rel = c.points - origin
    j = rel[:, 1] / SQRT3
    i = (rel[:, 0] - j) / 2
    ij = np.rint(np.column_stack([i, j]))
    if np.max(np.abs(np.column_stack([i, j]) - ij)) > 1e-6:
        return None
    return origin, ij.astype(np.int64)


def hex_lattice_detect(c: Constellation, z):
    """ML detection for constellations drawn from the hexagonal lattice.

    The nearest lattice point lies in one of the two lattice rows that
    bracket the sample, so it is found by rounding in each row.  When that
    lattice point belongs to the constellation it is the ML decision;
    the remaining samples (outside the constellation's hull) fall back to a
    k-d tree search.
    """
    coords = _hex_coordinates(c)
    if coords is None:
        return nearest_point(c, z)
    origin, ij = coords
    zz = _as_complex(z).ravel()
    x, y = zz.real - origin[0], zz.imag - origin[1]
    j_low = np.floor(y / SQRT3)
    best_i = best_j = best_d = None
    for j in (j_low, j_low + 1):
        i = np.rint((x - j) / 2)
        d = (x - 2 * i - j) ** 2 + (y - SQRT3 * j) ** 2
        if best_d is None:
            best_i, best_j, best_d = i, j, d
        else:
            closer = d < best_d
            best_i = np.where(closer, i, best_i)
            best_j = np.where(closer, j, best_j)
            best_d = np.where(closer, d, best_d)
    lo = ij.min(axis=0)
    span = ij.max(axis=0) - lo + 1
    table = np.full(tuple(span), -1, dtype=np.int64)
    table[ij[:, 0] - lo[0], ij[:, 1] - lo[1]] = np.arange(c.order)
    ci = best_i.astype(np.int64) - lo[0]
    cj = best_j.astype(np.int64) - lo[1]
    inside = (ci >= 0) & (ci < span[0]) & (cj >= 0) & (cj < span[1])
    out = np.full(zz.shape, -1, dtype=np.int64)
    out[inside] = table[ci[inside], cj[inside]]
    missing = out < 0
    if np.any(missing):
        out[missing] = nearest_point(c, zz[missing])
    return _maybe_scalar(z, out.reshape(np.shape(_as_complex(z))))


# --------------------------------------------------------------- dispatch
def fast_detect(c: Constellation, z) -> np.ndarray:
    """Fastest exact ML detector available for ``c``."""
    if c.family in (Family.SQAM, Family.RQAM):
        return square_detect(c, z)
    if c.family is Family.XQAM:
        return xqam_detect(c, z)
    if c.family in (Family.REGULAR_HQAM, Family.IRREGULAR_HQAM, Family.PSK3):
        return hex_lattice_detect(c, z)
    return nearest_point(c, z)


DETECTORS = {
    "ml": ml_detect,
    "fast": fast_detect,
    "region": region_detect,
    "xqam": xqam_detect,
    "square": square_detect,
    "hex": hex_lattice_detect,
    "star": star_coherent_detect,
}


# -------------------------------------------------------------------- I/O
def read_samples_csv(text: str) -> np.ndarray:
    """Parse ``re,im`` lines (optional header, ``#`` comments) into a complex array."""
    values = []
    for row in csv.reader(io.StringIO(text)):
        if not row or row[0].lstrip().startswith("#"):
            continue
        try:
            values.append(complex(float(row[0]), float(row[1])))
        except ValueError:
            if values:
                raise
    return np.array(values, dtype=complex)


def write_indices_csv(indices, labels=None, width: int | None = None) -> str:
    """CSV with column ``index`` (and ``bits`` when labels are given)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index"] + (["bits"] if labels is not None else []))
    for k in np.asarray(indices).ravel():
        row = [int(k)]
        if labels is not None:
            row.append(format(int(labels[k]), f"0{width}b"))
        writer.writerow(row)
    return buf.getvalue()
