"""Energy, PAPR and nearest-neighbour statistics of a constellation.

Counting quantities (``tau``, ``tau_c``, ``K``) are returned as exact
:class:`fractions.Fraction` values.  For lattice families the average energy
is also recovered exactly: every coordinate of a centred lattice constellation
is an integer multiple of ``1/(12M)`` (x, and y on square lattices) or of
``sqrt(3)/(12M)`` (y on hexagonal lattices), so the energy sum can be carried
out in integers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.spatial import cKDTree

from .constellations import Constellation
from .errors import UnsupportedOrder

#: Absolute tolerance on the distance-2 neighbour test.
NEIGHBOUR_TOL = 1e-9


@dataclass(frozen=True)
class MetricsReport:
    """Geometric figures of merit for one constellation.

    Attributes
    ----------
    e_avg, e_peak : float
        Average and peak symbol energy in units of ``d**2``.
    papr : float
        ``e_peak / e_avg``.
    tau : Fraction
        Average number of neighbours at distance exactly 2.
    tau_c : Fraction
        ``3T/M``, with ``T`` the number of side-2 equilateral triangles.
    k_param : Fraction
        ``2 / e_avg``.
    n_triangles : int
        ``T``.
    e_avg_exact : Fraction or None
        Exact average energy when the coordinates admit it (lattice families).
    well_connected : bool
        Whether ``tau == 2 * (tau_c/3 + 1 - 1/M)`` holds exactly.
    """

    order: int
    e_avg: float
    e_peak: float
    papr: float
    tau: Fraction
    tau_c: Fraction
    k_param: Fraction
    n_triangles: int
    e_avg_exact: Fraction | None
    well_connected: bool

    def as_row(self) -> dict:
        """Row in the column order K, tau, tau_c, E_s/d^2, PAPR."""
        return {
            "M": self.order,
            "K": self.k_param,
            "tau": self.tau,
            "tau_c": self.tau_c,
            "Es_d2": self.e_avg,
            "PAPR": self.papr,
        }


def neighbour_pairs(points: np.ndarray, distance: float = 2.0, tol: float = NEIGHBOUR_TOL) -> np.ndarray:
    """All index pairs ``(a, b)``, ``a < b``, whose separation is ``distance +- tol``.

    Returns
    -------
    numpy.ndarray
        ``(P, 2)`` integer array sorted lexicographically.
    """
    tree = cKDTree(points)
    pairs = tree.query_pairs(distance + tol, output_type="ndarray")
    if len(pairs) == 0:
        return np.zeros((0, 2), dtype=int)
    sep = np.linalg.norm(points[pairs[:, 0]] - points[pairs[:, 1]], axis=1)
    pairs = pairs[np.abs(sep - distance) <= tol]
    pairs = np.sort(pairs, axis=1)
    return pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]


def neighbour_lists(order: int, pairs: np.ndarray) -> list[list[int]]:
    """Adjacency lists (sorted) from a pair array."""
    adj: list[list[int]] = [[] for _ in range(order)]
    for a, b in pairs:
        adj[a].append(int(b))
        adj[b].append(int(a))
    return [sorted(n) for n in adj]


def count_triangles(order: int, pairs: np.ndarray) -> int:
    """Number of 3-cliques in the neighbour graph (equilateral side-2 triangles)."""
    adj = [set(n) for n in neighbour_lists(order, pairs)]
    return sum(len(adj[a] & adj[b]) for a, b in pairs) // 3


def exact_energies(points: np.ndarray) -> list[Fraction] | None:
    """Exact per-point energies for coordinates on a ``1/(12M)`` grid.

    Accepts ``x = a/(12M)`` with ``y = b/(12M)`` (square lattices) or
    ``y = b*sqrt(3)/(12M)`` (hexagonal lattices), ``a``, ``b`` integers.
    Returns ``None`` for any other layout (e.g. star QAM).
    """
    order = len(points)
    scale = 12 * order
    xs = points[:, 0] * scale
    xi = np.rint(xs)
    if np.max(np.abs(xs - xi), initial=0) > 1e-6:
        return None
    for y_factor in (1, 3):
        ys = points[:, 1] / math.sqrt(y_factor) * scale
        yi = np.rint(ys)
        if np.max(np.abs(ys - yi), initial=0) <= 1e-6:
            denom = scale * scale
            return [Fraction(int(a) ** 2 + y_factor * int(b) ** 2, denom) for a, b in zip(xi, yi)]
    return None


def exact_energy(points: np.ndarray) -> Fraction | None:
    """Exact average energy (see :func:`exact_energies`), or ``None``."""
    per_point = exact_energies(points)
    return None if per_point is None else sum(per_point, Fraction(0)) / len(per_point)


def compute_metrics(c: Constellation) -> MetricsReport:
    """Energy, PAPR, ``tau``, ``tau_c``, ``K`` and triangle count for ``c``.

    Examples
    --------
    >>> from qamlab.constellations import gen_sqam
    >>> r = compute_metrics(gen_sqam(16))
    >>> r.e_avg, r.e_peak, str(r.tau)
    (10.0, 18.0, '3')
    """
    pts = c.points
    energies = np.sum(pts**2, axis=1)
    per_point = exact_energies(pts)
    if per_point is not None:
        exact = sum(per_point, Fraction(0)) / c.order
        peak = max(per_point)
        e_avg, e_peak, papr = float(exact), float(peak), float(peak / exact)
    else:
        exact = None
        e_avg, e_peak = float(energies.mean()), float(energies.max())
        papr = e_peak / e_avg
    pairs = neighbour_pairs(pts)
    tri = count_triangles(c.order, pairs)
    tau = Fraction(2 * len(pairs), c.order)
    tau_c = Fraction(3 * tri, c.order)
    k_param = Fraction(2) / exact if exact is not None else Fraction(2 / e_avg).limit_denominator(10**12)
    well_connected = tau == 2 * (tau_c / 3 + 1 - Fraction(1, c.order))
    return MetricsReport(c.order, e_avg, e_peak, papr, tau, tau_c, k_param, tri, exact, well_connected)


def hqam_params_closed_form(order: int, kind: str) -> tuple:
    """Closed-form or fitted ``(K, tau, tau_c)`` for hexagonal QAM.

    Parameters
    ----------
    order : int
        Constellation order ``M``.
    kind : {"RegularEven", "IrregularApprox"}
        ``RegularEven`` gives the exact expressions for square-footprint
        regular HQAM (``M`` an even power of two) as Fractions;
        ``IrregularApprox`` gives the fitted values for irregular HQAM as floats.

    Raises
    ------
    UnsupportedOrder
        ``RegularEven`` with an order that is not an even power of two.
    """
    if order < 2 or order & (order - 1):
        raise UnsupportedOrder(f"order must be a power of two, got {order}")
    if kind == "RegularEven":
        root = math.isqrt(order)
        if root * root != order:
            raise UnsupportedOrder(f"RegularEven needs an even power of two, got {order}")
        k_param = Fraction(24, 7 * order - 4)
        tau = 2 * (3 - Fraction(4, root) + Fraction(1, order))
        tau_c = 6 * (1 - Fraction(1, root)) ** 2
        return k_param, tau, tau_c
    if kind == "IrregularApprox":
        k_param = 7.0 / (2 * order - 1)
        tau = 6.07 - 6.733 * order ** (-0.456)
        tau_c = 3.0 * (tau / 2 - 1 + 1.0 / order)
        return k_param, tau, tau_c
    raise ValueError(f"kind must be 'RegularEven' or 'IrregularApprox', got {kind!r}")
