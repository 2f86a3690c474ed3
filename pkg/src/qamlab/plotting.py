"""Matplotlib figures written straight to files (non-interactive Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .bitmap import BitMapping  # noqa: E402
from .constellations import Constellation  # noqa: E402


def plot_constellation(c: Constellation, path, m: BitMapping | None = None, annotate: bool | None = None) -> None:
    """Scatter plot of the points, with bit labels when a mapping is given.

    Labels are drawn by default up to 128 points.
    """
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.scatter(c.points[:, 0], c.points[:, 1], s=18, color="tab:blue", zorder=3)
    if annotate is None:
        annotate = m is not None and c.order <= 128
    if annotate and m is not None:
        size = 7 if c.order <= 32 else 5
        for (x, y), text in zip(c.points, m.bitstrings()):
            ax.annotate(text, (x, y), textcoords="offset points", xytext=(0, 5), ha="center", fontsize=size)
    ax.axhline(0, color="0.7", lw=0.6)
    ax.axvline(0, color="0.7", lw=0.6)
    ax.set_aspect("equal")
    ax.set_xlabel("in-phase (units of d)")
    ax.set_ylabel("quadrature (units of d)")
    ax.set_title(f"{c.order}-{c.family.value}")
    ax.grid(True, lw=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_error_curves(curves: dict, path, title: str = "", ylabel: str = "symbol error rate") -> None:
    """Semilog plot of Monte Carlo (markers) and analytic (lines) error rates.

    Parameters
    ----------
    curves : dict
        ``name -> rows``, rows as produced by :func:`qamlab.simulate.simulate_curve`.
    """
    fig, ax = plt.subplots(figsize=(7, 5))
    for k, (name, rows) in enumerate(curves.items()):
        colour = f"C{k % 10}"
        snr = np.array([r["snr_db"] for r in rows])
        mc = np.array([r["ser_mc"] for r in rows], dtype=float)
        shown = mc > 0
        ax.semilogy(snr[shown], mc[shown], "o", color=colour, ms=4, label=f"{name} MC")
        sep = [r["sep_analytic"] for r in rows]
        if all(v is not None for v in sep):
            ax.semilogy(snr, sep, "-", color=colour, lw=1, label=f"{name} analytic")
    ax.set_xlabel("Es/N0 (dB)")
    ax.set_ylabel(ylabel)
    ax.set_ylim(bottom=1e-6)
    ax.grid(True, which="both", lw=0.3)
    ax.legend(fontsize=7)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
