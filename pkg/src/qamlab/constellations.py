"""Constellation generators for square, rectangular, cross, star and hexagonal QAM.

Every lattice family is expressed in one coordinate convention: ``d = 1``
(half the minimum Euclidean distance), so neighbouring points sit exactly 2
apart, and the point set is centred on its centroid.  Energies computed from
these coordinates are therefore energies in units of ``d**2``.

Examples
--------
>>> c = gen_sqam(16)
>>> c.order, c.points.shape
(16, (16, 2))
>>> float(np.mean(np.sum(c.points ** 2, axis=1)))
10.0
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import (
    NotPowerOfFour,
    RadiiNotIncreasing,
    UnsupportedOrder,
)

SQRT3 = math.sqrt(3.0)

#: Rounding applied to squared distances before comparing them for ties.
ENERGY_DECIMALS = 9


class Family(str, Enum):
    """Constellation family tag."""

    SQAM = "SQAM"
    RQAM = "RQAM"
    XQAM = "XQAM"
    STAR = "StarQAM"
    REGULAR_HQAM = "RegularHQAM"
    IRREGULAR_HQAM = "IrregularHQAM"
    PSK3 = "PSK3"


LATTICE_FAMILIES = frozenset(
    {Family.SQAM, Family.RQAM, Family.XQAM, Family.REGULAR_HQAM, Family.IRREGULAR_HQAM, Family.PSK3}
)


@dataclass(frozen=True)
class Constellation:
    """An ordered, immutable set of 2-D signal points.

    Parameters
    ----------
    family : Family
        Family tag.
    order : int
        Number of points ``M``.
    points : numpy.ndarray
        ``(M, 2)`` array of coordinates in units of ``d``.  Stored read-only.
    params : dict
        Family-specific geometry record (ring radii, grid size, ...).
    """

    family: Family
    order: int
    points: np.ndarray
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"points must have shape (M, 2), got {pts.shape}")
        if pts.shape[0] != self.order:
            raise ValueError(f"expected {self.order} points, got {pts.shape[0]}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if len(np.unique(np.round(pts, 9), axis=0)) != self.order:
            raise ValueError("points must be distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "params", dict(self.params))

    @property
    def bits_per_symbol(self) -> int:
        """``log2(M)`` rounded down (exact for power-of-two orders)."""
        return int(math.log2(self.order))

    def as_complex(self) -> np.ndarray:
        """Points as a complex vector ``x + iy``."""
        return self.points[:, 0] + 1j * self.points[:, 1]

    def energies(self) -> np.ndarray:
        """Per-point energy ``|s_k|**2`` in units of ``d**2``."""
        return np.sum(self.points**2, axis=1)

    def digest(self) -> str:
        """SHA-256 over family, order and the little-endian float64 coordinates."""
        h = hashlib.sha256()
        h.update(f"{self.family.value}:{self.order}:".encode())
        h.update(np.ascontiguousarray(self.points, dtype="<f8").tobytes())
        return h.hexdigest()

    # ------------------------------------------------------------------ I/O
    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "M": self.order,
            "d": 1,
            "points": [[float(x), float(y)] for x, y in self.points],
            "params": _jsonable(self.params),
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Constellation":
        return cls(Family(data["family"]), int(data["M"]), np.asarray(data["points"], float), data.get("params", {}))

    @classmethod
    def from_json(cls, text: str) -> "Constellation":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# family={self.family.value}, M={self.order}\n")
        buf.write(f"# params={json.dumps(_jsonable(self.params))}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "y"])
        for x, y in self.points:
            writer.writerow([repr(float(x)), repr(float(y))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Constellation":
        family, order, params = None, None, {}
        rows = []
        for line in text.splitlines():
            if line.startswith("# family="):
                head = dict(part.strip().split("=", 1) for part in line[2:].split(","))
                family, order = head["family"], int(head["M"])
            elif line.startswith("# params="):
                params = json.loads(line[len("# params="):])
            elif line and not line.startswith("#") and line != "x,y":
                rows.append([float(v) for v in line.split(",")])
        if family is None:
            raise ValueError("CSV constellation is missing the '# family=..., M=...' header")
        return cls(Family(family), order, np.array(rows), params)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _centre(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    centred = points - points.mean(axis=0)
    centred[np.abs(centred) < 1e-12] = 0.0
    return centred


def _log2_exact(order: int) -> int:
    if order < 2 or order & (order - 1):
        raise UnsupportedOrder(f"order {order} is not a power of two")
    return order.bit_length() - 1


def odd_grid(count: int) -> np.ndarray:
    """Odd-integer coordinates ``-(count-1), ..., -1, 1, ..., count-1`` (or 0 for count 1)."""
    return 2.0 * np.arange(count) - (count - 1)


# ---------------------------------------------------------------- SQAM/RQAM
def gen_sqam(order: int) -> Constellation:
    """Square QAM on the odd-integer grid.

    Points are stored column-major: index ``k = i * side + j`` with ``i`` the
    in-phase column and ``j`` the quadrature row.

    Raises
    ------
    NotPowerOfFour
        If ``order`` is not one of 4, 16, 64, 256, 1024, 4096.
    """
    if order not in (4, 16, 64, 256, 1024, 4096):
        raise NotPowerOfFour(f"square QAM needs M = 4**k (4..4096), got {order}")
    side = math.isqrt(order)
    xs = odd_grid(side)
    pts = np.array([(x, y) for x in xs for y in xs])
    return Constellation(Family.SQAM, order, pts, {"columns": side, "rows": side})


def gen_rqam(order: int, orientation: str = "WideI") -> Constellation:
    """Rectangular QAM ``2**(n+1) x 2**n`` for ``M = 2**(2n+1)``.

    Parameters
    ----------
    order : int
        One of 8, 32, 128, 512, 2048.
    orientation : {"WideI", "WideQ"}
        ``WideI`` puts the long side along the in-phase axis; ``WideQ`` swaps axes.
    """
    if order not in (8, 32, 128, 512, 2048):
        raise UnsupportedOrder(f"rectangular QAM needs an odd power of two in 8..2048, got {order}")
    if orientation not in ("WideI", "WideQ"):
        raise ValueError(f"orientation must be 'WideI' or 'WideQ', got {orientation!r}")
    n = (_log2_exact(order) - 1) // 2
    columns, rows = 2 ** (n + 1), 2**n
    pts = np.array([(x, y) for x in odd_grid(columns) for y in odd_grid(rows)])
    if orientation == "WideQ":
        pts = pts[:, ::-1]
        columns, rows = rows, columns
    return Constellation(Family.RQAM, order, pts, {"columns": columns, "rows": rows, "orientation": orientation})


# --------------------------------------------------------------------- XQAM
def xqam_geometry(order: int) -> dict:
    """Cross-shape parameters for ``M = 2**(2n+1)``, ``n >= 2``.

    Returns
    -------
    dict
        ``n``; ``side`` (points per side of the bounding square, ``3 * 2**(n-1)``);
        ``corner_cut`` (points removed along each corner edge, ``2**(n-2)``);
        ``corner_steps`` (``sqrt(M/32)``, equal to ``corner_cut``); and the
        per-quadrant interior/edge/corner counts.
    """
    m = _log2_exact(order)
    if m % 2 == 0 or m < 5:
        raise UnsupportedOrder(f"cross QAM needs M = 2**(2n+1) with n >= 2, got {order}")
    n = (m - 1) // 2
    side = 3 * 2 ** (n - 1)
    cut = 2 ** (n - 2)
    steps = cut
    return {
        "n": n,
        "side": side,
        "corner_cut": cut,
        "corner_steps": steps,
        "interior_per_quadrant": (2 * steps) ** 2 + 2 * (steps - 1) * (2 * steps - 1),
        "edge_per_quadrant": 2 * (2 * steps - 1),
        "corner_per_quadrant": 2 * steps,
    }


def gen_xqam(order: int) -> Constellation:
    """Cross QAM: a ``side x side`` odd grid with ``corner_cut x corner_cut`` corners removed.

    The average energy is ``(31M - 32) / 48`` in units of ``d**2``.
    """
    geo = xqam_geometry(order)
    side, cut = geo["side"], geo["corner_cut"]
    inner = side - 1 - 2 * cut  # largest coordinate still present on a full row/column
    xs = odd_grid(side)
    pts = np.array([(x, y) for x in xs for y in xs if not (abs(x) > inner and abs(y) > inner)])
    return Constellation(Family.XQAM, order, pts, geo)


# --------------------------------------------------------------------- star
def star_points_per_ring(order: int) -> int:
    if order in (16, 32):
        return 8
    if order == 64:
        return 16
    raise UnsupportedOrder(f"star QAM supports M in {{16, 32, 64}}, got {order}")


def gen_star_qam(order: int, ring_radii: Sequence[float]) -> Constellation:
    """Star QAM: concentric, phase-aligned PSK rings.

    Parameters
    ----------
    order : int
        16 or 32 (8 points per ring) or 64 (16 points per ring).
    ring_radii : sequence of float
        One strictly increasing positive radius per ring; ``M / points_per_ring`` entries.

    Notes
    -----
    Point ``k`` lies on ring ``k // P`` at phase ``(k % P) * 2*pi / P``.
    Unlike the lattice families the minimum distance is not normalised.
    """
    per_ring = star_points_per_ring(order)
    rings = order // per_ring
    radii = np.asarray(ring_radii, dtype=float)
    if radii.shape != (rings,):
        raise UnsupportedOrder(f"{order}-star QAM needs {rings} ring radii, got {radii.size}")
    if np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise RadiiNotIncreasing(f"ring radii must be positive and strictly increasing: {radii.tolist()}")
    phases = 2 * np.pi * np.arange(per_ring) / per_ring
    pts = np.array([(r * np.cos(p), r * np.sin(p)) for r in radii for p in phases])
    pts[np.abs(pts) < 1e-15] = 0.0
    params = {"ring_radii": radii.tolist(), "points_per_ring": per_ring, "rings": rings}
    if rings == 2:
        params["ring_ratio"] = float(radii[1] / radii[0])
    return Constellation(Family.STAR, order, pts, params)


# -------------------------------------------------------------------- HQAM
HQAM_ORDERS = (4, 8, 16, 32, 64, 128, 256, 512, 1024)


def _hex_rows(row_lengths: Sequence[int], row_masks=None) -> np.ndarray:
    """Stack rows of a hexagonal lattice; even rows shift right by d, odd rows left."""
    pts = []
    rows = len(row_lengths)
    for j, width in enumerate(row_lengths):
        y = (j - (rows - 1) / 2) * SQRT3
        offset = 0.5 if j % 2 == 0 else -0.5
        for i, x in enumerate(odd_grid(width)):
            if row_masks is not None and not row_masks[j][i]:
                continue
            pts.append((x + offset, y))
    return np.array(pts)


def gen_regular_hqam(order: int) -> Constellation:
    """Regular hexagonal QAM with a square (even power) or cross (odd power) footprint.

    The footprint of the square / rectangular / cross QAM of the same order is
    laid onto hexagonal rows: rows are ``sqrt(3)`` apart and alternate rows are
    offset by ``+d`` and ``-d``.  ``M = 8`` uses the 4 x 2 rectangle; odd
    powers from 32 use the cross of :func:`gen_xqam`.

    Points are stored row by row, bottom row first.
    """
    if order not in HQAM_ORDERS:
        raise UnsupportedOrder(f"regular HQAM supports M in {HQAM_ORDERS}, got {order}")
    m = _log2_exact(order)
    if m % 2 == 0:
        side = 2 ** (m // 2)
        pts = _hex_rows([side] * side)
        params = {"footprint": "square", "columns": side, "rows": side}
    elif order == 8:
        pts = _hex_rows([4, 4])
        params = {"footprint": "rectangle", "columns": 4, "rows": 2}
    else:
        geo = xqam_geometry(order)
        side, cut = geo["side"], geo["corner_cut"]
        masks = [
            [not (min(i, side - 1 - i) < cut and min(j, side - 1 - j) < cut) for i in range(side)]
            for j in range(side)
        ]
        pts = _hex_rows([side] * side, masks)
        params = {"footprint": "cross", "side": side, "corner_cut": cut}
    return Constellation(Family.REGULAR_HQAM, order, _centre(pts), params)


#: Selection centre (in lattice coordinates) used by the minimum-energy search.
#: The lattice has rows ``y = j*sqrt(3)`` with points at ``x = 2i + (j mod 2)``.
IRREGULAR_CENTRES = {
    4: (1.0, 0.0),
    8: (0.0, SQRT3 / 4),
    16: (0.5, 0.0),
    32: (0.0, 0.0),
    64: (1.0, 0.0),
    128: (1.0, 0.0),
    256: (0.5, 0.0),
    512: (0.0, 0.0),
    1024: (0.0, SQRT3 / 4),
}


def hex_lattice(radius_steps: int) -> np.ndarray:
    """Hexagonal lattice points ``(2i + (j mod 2), j*sqrt(3))`` for ``|i|, |j| <= radius_steps``."""
    r = np.arange(-radius_steps, radius_steps + 1)
    i, j = np.meshgrid(r, r, indexing="xy")
    i, j = i.ravel(), j.ravel()
    return np.column_stack([2.0 * i + (j % 2), j * SQRT3])


def select_min_energy(
    candidates: np.ndarray, centre: Sequence[float], count: int
) -> tuple[np.ndarray, bool]:
    """Pick the ``count`` candidates closest to ``centre``.

    Ties on the outermost selected shell are resolved deterministically:
    mirror-image pairs about ``centre`` are taken together while both fit,
    remaining ties go by angle from the +x axis (measured about ``centre``,
    in ``[0, 2*pi)``) and then by smaller x.

    Returns
    -------
    indices : numpy.ndarray
        Indices into ``candidates`` of the selected points.
    ties_broken : bool
        Whether the outermost shell had more candidates than free slots.
    """
    c = np.asarray(centre, dtype=float)
    rel = candidates - c
    dist2 = np.round(np.sum(rel**2, axis=1), ENERGY_DECIMALS)
    angle = np.mod(np.arctan2(rel[:, 1], rel[:, 0]), 2 * np.pi)
    order = np.lexsort((candidates[:, 0], np.round(angle, 12), dist2))
    shell_energy = dist2[order[count - 1]]
    inner = [k for k in order if dist2[k] < shell_energy]
    shell = [k for k in order if dist2[k] == shell_energy]
    need = count - len(inner)
    ties = len(shell) > need
    chosen: list[int] = []
    lookup = {tuple(np.round(candidates[k], 6)): k for k in shell}
    for k in shell:
        if len(chosen) >= need:
            break
        if k in chosen:
            continue
        mirror = lookup.get(tuple(np.round(2 * c - candidates[k], 6)))
        if mirror is not None and mirror != k and mirror not in chosen and len(chosen) + 2 <= need:
            chosen += [k, mirror]
        else:
            chosen.append(k)
    return np.array(inner + chosen[:need]), ties


def gen_irregular_hqam(order: int) -> Constellation:
    """Irregular (minimum-energy) hexagonal QAM.

    Builds a hexagonal lattice large enough to contain the result, measures
    every candidate's energy about the order-specific selection centre
    (:data:`IRREGULAR_CENTRES`), keeps the ``M`` lowest-energy candidates and
    re-centres the result on its centroid.

    Raises
    ------
    UnsupportedOrder
        If ``order`` is not a power of two in 4..1024.
    """
    if order not in HQAM_ORDERS:
        raise UnsupportedOrder(f"irregular HQAM supports M in {HQAM_ORDERS}, got {order}")
    steps = math.ceil(math.sqrt(2 * order)) + 2
    lattice = hex_lattice(steps)
    centre = IRREGULAR_CENTRES[order]
    idx, ties = select_min_energy(lattice, centre, order)
    chosen = lattice[idx]
    # the selection must sit strictly inside the candidate window
    reach = np.max(np.hypot(*(chosen - centre).T))
    window = min(2 * steps, steps * SQRT3)
    if reach >= window - 2:
        raise RuntimeError("candidate lattice too small for the requested order")
    row_on_axis = bool(np.isclose(centre[1], 0.0))
    params = {
        "selection_centre": [float(centre[0]), float(centre[1])],
        "row_on_x_axis": row_on_axis,
        "ties_broken": bool(ties),
        "centroid_shift": [float(v) for v in chosen.mean(axis=0) - centre],
    }
    return Constellation(Family.IRREGULAR_HQAM, order, _centre(chosen), params)


def gen_3psk() -> Constellation:
    """Equilateral triangle with side 2, centred on its centroid."""
    radius = 2 / SQRT3
    angles = np.pi / 2 + 2 * np.pi * np.arange(3) / 3
    pts = np.column_stack([radius * np.cos(angles), radius * np.sin(angles)])
    pts[np.abs(pts) < 1e-15] = 0.0
    return Constellation(Family.PSK3, 3, pts, {})


def generate(family: str | Family, order: int, **kwargs) -> Constellation:
    """Dispatch to the generator for ``family``."""
    fam = Family(family)
    if fam is Family.SQAM:
        return gen_sqam(order)
    if fam is Family.RQAM:
        return gen_rqam(order, kwargs.get("orientation", "WideI"))
    if fam is Family.XQAM:
        return gen_xqam(order)
    if fam is Family.STAR:
        radii = kwargs.get("ring_radii")
        if radii is None:
            ratio = kwargs.get("ring_ratio", 2.0)
            rings = order // star_points_per_ring(order)
            radii = [ratio**k for k in range(rings)]
        return gen_star_qam(order, radii)
    if fam is Family.REGULAR_HQAM:
        return gen_regular_hqam(order)
    if fam is Family.IRREGULAR_HQAM:
        return gen_irregular_hqam(order)
    if order != 3:
        raise UnsupportedOrder("3-PSK has exactly 3 points")
    return gen_3psk()
