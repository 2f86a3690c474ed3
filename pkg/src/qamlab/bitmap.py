"""Bit labelling of constellations and the Gray code penalty.

A :class:`BitMapping` stores one integer label per constellation point
(index-aligned with ``Constellation.points``).  The Gray code penalty is the
average, over symbols, of the mean number of bits by which a symbol's label
differs from the labels of its nearest neighbours.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .constellations import Constellation, Family, gen_regular_hqam, odd_grid, xqam_geometry
from .errors import MappingMismatch, WrongFamily
from .metrics import neighbour_lists, neighbour_pairs


class Scheme(str, Enum):
    GRAY_SQUARE = "GraySquare"
    PSEUDO_GRAY_XQAM = "PseudoGrayXQAM"
    STAR_DIFFERENTIAL = "StarDifferential"
    SUBOPT_HQAM = "SubOptHQAM"
    CUSTOM = "Custom"


def gray(k):
    """Reflected binary Gray code of ``k`` (works elementwise on integer arrays)."""
    return k ^ (k >> 1)


def popcount(values: np.ndarray) -> np.ndarray:
    """Number of set bits per element of a non-negative integer array."""
    values = np.asarray(values, dtype=np.uint64)
    bits = np.unpackbits(values.view(np.uint8).reshape(*values.shape, 8), axis=-1)
    return bits.sum(axis=-1).astype(int)


@dataclass(frozen=True)
class BitMapping:
    """Per-point bit labels.

    Parameters
    ----------
    labels : array_like of int
        ``labels[k]`` is the integer label of point ``k``; all distinct,
        each in ``[0, 2**width)``.
    width : int
        Label length in bits (``log2 M``).
    scheme : Scheme
        How the labels were produced.
    """

    labels: np.ndarray
    width: int
    scheme: Scheme = Scheme.CUSTOM
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        lab = np.array(self.labels, dtype=np.int64, copy=True)
        if lab.ndim != 1:
            raise MappingMismatch("labels must be one-dimensional")
        if np.any(lab < 0) or np.any(lab >= 2**self.width):
            raise MappingMismatch(f"labels must lie in [0, 2**{self.width})")
        if len(np.unique(lab)) != len(lab):
            raise MappingMismatch("labels must be distinct")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "scheme", Scheme(self.scheme))

    @property
    def order(self) -> int:
        return len(self.labels)

    def bitstrings(self) -> list[str]:
        return [format(int(v), f"0{self.width}b") for v in self.labels]

    def bits(self) -> np.ndarray:
        """``(M, width)`` 0/1 array, most significant bit first."""
        shifts = np.arange(self.width - 1, -1, -1)
        return ((self.labels[:, None] >> shifts) & 1).astype(np.uint8)

    def check(self, c: Constellation) -> None:
        """Raise :class:`MappingMismatch` unless this mapping fits ``c``."""
        if self.order != c.order:
            raise MappingMismatch(f"mapping has {self.order} labels, constellation has {c.order} points")
        if 2**self.width < c.order:
            raise MappingMismatch("label width too small for the constellation")

    def to_json(self) -> str:
        return json.dumps({"M": self.order, "scheme": self.scheme.value, "labels": self.bitstrings()}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "BitMapping":
        data = json.loads(text)
        strings = data["labels"]
        width = len(strings[0]) if strings else 0
        if any(len(s) != width for s in strings) or len(strings) != int(data["M"]):
            raise MappingMismatch("mapping file labels must all have the same length and number M")
        return cls(np.array([int(s, 2) for s in strings]), width, data.get("scheme", "Custom"))


@dataclass(frozen=True)
class GrayPenaltyReport:
    """Result of :func:`gray_penalty`.

    Attributes
    ----------
    g_p : Fraction
        Average per-symbol penalty.
    per_symbol : list of Fraction
        Mean bit difference between each symbol and its neighbours.
    nn_counts : list of int
        Number of nearest neighbours of each symbol.
    bit_diffs : numpy.ndarray
        ``(P, 3)`` rows ``(a, b, bits differing)`` over neighbour pairs ``a < b``.
    """

    g_p: Fraction
    per_symbol: list
    nn_counts: list
    bit_diffs: np.ndarray


def min_distance(points: np.ndarray) -> float:
    dist, _ = cKDTree(points).query(points, k=2)
    return float(dist[:, 1].min())


def gray_penalty(c: Constellation, m: BitMapping) -> GrayPenaltyReport:
    """Gray code penalty of mapping ``m`` on constellation ``c``.

    Neighbours are pairs at the constellation's minimum distance (2 for the
    lattice families).  Symbols without any neighbour are left out of the
    average.
    """
    m.check(c)
    dmin = 2.0 if c.family is not Family.STAR else min_distance(c.points)
    pairs = neighbour_pairs(c.points, dmin)
    diffs = popcount(m.labels[pairs[:, 0]] ^ m.labels[pairs[:, 1]]) if len(pairs) else np.zeros(0, int)
    adj = neighbour_lists(c.order, pairs)
    per_pair = {(int(a), int(b)): int(dv) for (a, b), dv in zip(pairs, diffs)}
    per_symbol = []
    for k, nbrs in enumerate(adj):
        if nbrs:
            total = sum(per_pair[(min(k, j), max(k, j))] for j in nbrs)
            per_symbol.append(Fraction(total, len(nbrs)))
        else:
            per_symbol.append(None)
    present = [v for v in per_symbol if v is not None]
    g_p = sum(present, Fraction(0)) / len(present) if present else Fraction(0)
    table = np.column_stack([pairs, diffs]) if len(pairs) else np.zeros((0, 3), int)
    return GrayPenaltyReport(g_p, per_symbol, [len(n) for n in adj], table)


# ----------------------------------------------------------- Gray families
def _axis_index(values: np.ndarray) -> tuple[np.ndarray, int]:
    levels = np.unique(np.round(values, 9))
    return np.searchsorted(levels, np.round(values, 9)), len(levels)


def map_gray_square(c: Constellation) -> BitMapping:
    """Per-axis reflected Gray labels for square and rectangular QAM.

    The column (in-phase) Gray index occupies the upper bits and the row
    (quadrature) Gray index the lower bits.
    """
    if c.family not in (Family.SQAM, Family.RQAM):
        raise WrongFamily(f"map_gray_square needs SQAM or RQAM, got {c.family.value}")
    col, n_cols = _axis_index(c.points[:, 0])
    row, n_rows = _axis_index(c.points[:, 1])
    row_bits = int(np.log2(n_rows))
    labels = (gray(col) << row_bits) | gray(row)
    return BitMapping(labels, c.bits_per_symbol, Scheme.GRAY_SQUARE)


def pseudo_gray_cross_labels(order: int) -> dict:
    """Pseudo-Gray labels of the cross grid keyed by odd-integer coordinates.

    The ``2**(n+1) x 2**n`` rectangle is Gray-labelled (columns high,
    rows low); the points of its outer columns are then folded onto the
    top and bottom arms of the cross: a point at ``(x, y)`` with
    ``|x| > side - 1`` moves to ``(sign(x)*|y|, sign(y)*(|x| - 2**(n-1)))``.
    """
    geo = xqam_geometry(order)
    n, side = geo["n"], geo["side"]
    width, height = 2 ** (n + 1), 2**n
    out = {}
    for i, x in enumerate(odd_grid(width)):
        for j, y in enumerate(odd_grid(height)):
            label = (gray(i) << n) | gray(j)
            if abs(x) > side - 1:
                x_new, y_new = np.sign(x) * abs(y), np.sign(y) * (abs(x) - height // 2)
            else:
                x_new, y_new = x, y
            out[(int(x_new), int(y_new))] = int(label)
    return out


def map_pseudo_gray_xqam(c: Constellation) -> BitMapping:
    """Pseudo-Gray labels for cross QAM (rectangle labelling folded into the arms)."""
    if c.family is not Family.XQAM:
        raise WrongFamily(f"map_pseudo_gray_xqam needs XQAM, got {c.family.value}")
    table = pseudo_gray_cross_labels(c.order)
    keys = [(int(round(x)), int(round(y))) for x, y in c.points]
    return BitMapping(np.array([table[k] for k in keys]), c.bits_per_symbol, Scheme.PSEUDO_GRAY_XQAM)


def map_star(c: Constellation) -> BitMapping:
    """Star QAM labels: Gray ring index in the high bits, Gray phase index in the low bits."""
    if c.family is not Family.STAR:
        raise WrongFamily(f"map_star needs StarQAM, got {c.family.value}")
    per_ring = int(c.params["points_per_ring"])
    phase_bits = int(np.log2(per_ring))
    k = np.arange(c.order)
    labels = (gray(k // per_ring) << phase_bits) | gray(k % per_ring)
    return BitMapping(labels, c.bits_per_symbol, Scheme.STAR_DIFFERENTIAL)


# ---------------------------------------------------------------- HQAM
def map_gray_regular_hqam(c: Constellation) -> BitMapping:
    """Square/rectangle-style Gray labels for regular HQAM.

    Square and rectangular footprints use column-high / row-low Gray labels
    exactly as square QAM; cross footprints reuse the cross QAM pseudo-Gray
    labels of the corresponding grid position.
    """
    if c.family is not Family.REGULAR_HQAM:
        raise WrongFamily(f"map_gray_regular_hqam needs RegularHQAM, got {c.family.value}")
    row, n_rows = _axis_index(c.points[:, 1])
    # undo the +-d row offset to recover the column index
    offset = np.where(row % 2 == 0, 0.5, -0.5)
    col, n_cols = _axis_index(c.points[:, 0] - offset)
    if c.params.get("footprint") == "cross":
        table = pseudo_gray_cross_labels(c.order)
        labels = [table[(int(2 * i - (n_cols - 1)), int(2 * j - (n_rows - 1)))] for i, j in zip(col, row)]
        return BitMapping(np.array(labels), c.bits_per_symbol, Scheme.GRAY_SQUARE)
    row_bits = int(np.log2(n_rows))
    return BitMapping((gray(col) << row_bits) | gray(row), c.bits_per_symbol, Scheme.GRAY_SQUARE)


def best_translation(
    source: np.ndarray, target: np.ndarray, tol: float = 1e-6, max_shift: float = 4.0
) -> tuple[np.ndarray, np.ndarray]:
    """Translation of ``source`` that lands the most points exactly on ``target``.

    Candidate shifts are the differences ``target[b] - source[a]`` no longer
    than ``max_shift`` (both layouts are centred, so long shifts only lose
    overlap); ties prefer the shortest shift, then the lexicographically
    smallest.

    Returns
    -------
    shift : numpy.ndarray
        The chosen translation.
    match : numpy.ndarray
        ``match[k]`` is the index in ``target`` hit by ``source[k] + shift``,
        or ``-1``.
    """
    tree = cKDTree(target)
    shifts = (target[None, :, :] - source[:, None, :]).reshape(-1, 2)
    shifts = shifts[np.hypot(shifts[:, 0], shifts[:, 1]) <= max_shift + tol]
    shifts = np.unique(np.round(shifts, 9), axis=0)
    best_key, best = None, None
    for shift in shifts:
        dist, idx = tree.query(source + shift)
        hits = int(np.sum(dist < tol))
        key = (-hits, round(float(np.hypot(*shift)), 9), round(float(shift[0]), 9), round(float(shift[1]), 9))
        if best_key is None or key < best_key:
            best_key, best = key, (shift, np.where(dist < tol, idx, -1))
    return best


#: Up to this many unlabelled points, step 3 of :func:`map_subopt_hqam` is solved exactly.
EXACT_FILL_LIMIT = 10


def hex_symmetries() -> list[tuple[tuple[int, int], np.ndarray]]:
    """The 12 point symmetries of the hexagonal lattice as ``((reflect, rotation), matrix)``.

    ``reflect = -1`` mirrors ``y`` before rotating by ``rotation * 60`` degrees.
    """
    out = []
    for reflect in (1, -1):
        for rotation in range(6):
            a = rotation * np.pi / 3
            rot = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
            out.append(((reflect, rotation), rot @ np.diag([1.0, reflect])))
    return out


def _edge_weights(order: int, adj: list[list[int]]) -> dict:
    """Weight of each neighbour pair in the penalty sum: ``1/N(a) + 1/N(b)``."""
    return {(a, b): 1.0 / len(adj[a]) + 1.0 / len(adj[b]) for a in range(order) for b in adj[a]}


def _fill_greedy(labels, free_labels, adj, visit_order):
    labels = labels.copy()
    free = list(free_labels)
    for k in visit_order:
        if labels[k] >= 0:
            continue
        known = labels[[j for j in adj[k] if labels[j] >= 0]]
        cost = [int(popcount(np.bitwise_xor(known, lab)).sum()) if len(known) else 0 for lab in free]
        pick = free[int(np.argmin(cost))]
        labels[k] = pick
        free.remove(pick)
    return labels


def _fill_exact(labels, free_labels, adj, weights):
    """Assign ``free_labels`` to the unlabelled points minimising the penalty (branch and bound)."""
    labels = labels.copy()
    points = [k for k in range(len(labels)) if labels[k] < 0]
    points.sort(key=lambda k: (-sum(labels[j] >= 0 for j in adj[k]), k))
    best_cost, best = [np.inf], [None]

    def step_cost(k, lab):
        return sum(bin(int(lab) ^ int(labels[j])).count("1") * weights[(k, j)] for j in adj[k] if labels[j] >= 0)

    def search(depth, acc, remaining):
        if acc >= best_cost[0] - 1e-12:
            return
        if depth == len(points):
            best_cost[0], best[0] = acc, labels.copy()
            return
        k = points[depth]
        options = sorted((step_cost(k, lab), lab) for lab in remaining)
        for cost, lab in options:
            labels[k] = lab
            search(depth + 1, acc + cost, [v for v in remaining if v != lab])
            labels[k] = -1

    search(0, 0.0, list(free_labels))
    return best[0]


def map_subopt_hqam(c: Constellation, ref: BitMapping | None = None) -> BitMapping:
    """Three-step sub-optimum labelling of hexagonal QAM.

    1. Label the regular HQAM of the same order with square-QAM style Gray
       labels (``ref``; computed with :func:`map_gray_regular_hqam` if omitted).
    2. Move the irregular layout onto the regular one -- any of the 12
       hexagonal lattice symmetries followed by a translation -- so that the
       largest number of points coincide, and copy those points' labels.
    3. Give the remaining points the remaining labels so that their bit
       differences to their neighbours are as small as possible: an exact
       search when at most :data:`EXACT_FILL_LIMIT` points are left,
       otherwise a greedy pass by increasing energy, then angle (each point
       takes the free label with the smallest total bit difference to its
       already-labelled neighbours; ties go to the smallest label).

    When several symmetries reach the same number of coinciding points the
    one giving the smallest Gray penalty is kept.  A regular HQAM input
    returns the step-1 labels.
    """
    if c.family not in (Family.REGULAR_HQAM, Family.IRREGULAR_HQAM):
        raise WrongFamily(f"map_subopt_hqam needs a hexagonal QAM, got {c.family.value}")
    regular = gen_regular_hqam(c.order)
    ref = ref if ref is not None else map_gray_regular_hqam(regular)
    ref.check(regular)
    if c.family is Family.REGULAR_HQAM:
        return BitMapping(ref.labels, ref.width, Scheme.SUBOPT_HQAM, {"matched": c.order})

    adj = neighbour_lists(c.order, neighbour_pairs(c.points))
    weights = _edge_weights(c.order, adj)
    energy = np.round(c.energies(), 9)
    angle = np.round(np.mod(np.arctan2(c.points[:, 1], c.points[:, 0]), 2 * np.pi), 12)
    visit = np.lexsort((angle, energy))

    candidates = []
    for key, transform in hex_symmetries():
        shift, match = best_translation(np.round(c.points @ transform.T, 12), regular.points)
        candidates.append((int(np.sum(match >= 0)), key, shift, match))
    most = max(cand[0] for cand in candidates)

    best = None
    for matched, key, shift, match in candidates:
        if matched != most:
            continue
        labels = np.full(c.order, -1, dtype=np.int64)
        labels[match >= 0] = ref.labels[match[match >= 0]]
        free = sorted(set(range(2**ref.width)) - set(labels[labels >= 0].tolist()))
        if len(free) <= EXACT_FILL_LIMIT:
            labels = _fill_exact(labels, free, adj, weights)
        else:
            labels = _fill_greedy(labels, free, adj, visit)
        score = sum(bin(int(labels[a]) ^ int(labels[b])).count("1") * w for (a, b), w in weights.items() if a < b)
        if best is None or score < best[0] - 1e-12:
            info = {"matched": matched, "symmetry": list(key), "shift": [float(v) + 0.0 for v in shift]}
            best = (score, labels, info)
    return BitMapping(best[1], ref.width, Scheme.SUBOPT_HQAM, best[2])


def mapping_for(c: Constellation) -> BitMapping:
    """Default labelling for any supported family."""
    if c.family in (Family.SQAM, Family.RQAM):
        return map_gray_square(c)
    if c.family is Family.XQAM:
        return map_pseudo_gray_xqam(c)
    if c.family is Family.STAR:
        return map_star(c)
    if c.family in (Family.REGULAR_HQAM, Family.IRREGULAR_HQAM):
        return map_subopt_hqam(c)
    raise WrongFamily(f"no default mapping for {c.family.value}")


def labels_from_bitstrings(strings: Sequence[str]) -> np.ndarray:
    return np.array([int(s, 2) for s in strings], dtype=np.int64)
