"""Reproducible AWGN Monte Carlo: modulate, add noise, detect, count errors.

Randomness
----------
Work is split into chunks of ``SimConfig.chunk`` symbols.  Chunk ``k`` draws
from its own Philox (counter-based) generator seeded with
``SeedSequence(seed, spawn_key=(k,))``, so the result depends only on
``(seed, chunk)`` and never on how many worker processes share the chunks.
Per-chunk counts are integers and are summed in chunk order.

Gaussian samples come from :meth:`numpy.random.Generator.standard_normal`
(ziggurat method -- an exact sampler, no truncation or approximation); the
method is recorded in every manifest as :data:`GAUSSIAN_METHOD`.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .analytic import SnrSpec, bep_from_sep, sep_for
from .bitmap import BitMapping, gray_penalty, popcount
from .constellations import Constellation, Family
from .detection import DETECTORS, star_differential_detect, star_differential_modulate
from .errors import QamError, UnsupportedOrder, WrongFamily
from .metrics import compute_metrics

GAUSSIAN_METHOD = "numpy.random.Generator.standard_normal (ziggurat, exact)"
BIT_GENERATOR = "Philox4x64 via SeedSequence(seed, spawn_key=(chunk,))"
DEFAULT_CHUNK = 1 << 20


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo run parameters.

    ``snr`` with an infinite dB value switches the noise off.
    """

    seed: int
    n_symbols: int
    snr: SnrSpec
    chunk: int = DEFAULT_CHUNK

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if int(self.n_symbols) < 1:
            raise ValueError("n_symbols must be at least 1")
        if int(self.chunk) < 1:
            raise ValueError("chunk must be at least 1")

    def chunks(self) -> list[tuple[int, int]]:
        """``(chunk_index, symbols_in_chunk)`` for the whole run."""
        full, rest = divmod(int(self.n_symbols), int(self.chunk))
        out = [(k, int(self.chunk)) for k in range(full)]
        if rest:
            out.append((full, rest))
        return out

    def to_dict(self) -> dict:
        return {
            "seed": int(self.seed),
            "n_symbols": int(self.n_symbols),
            "chunk": int(self.chunk),
            "snr": {"value": _json_float(self.snr.value), "unit": self.snr.unit, "convention": self.snr.convention},
        }


@dataclass(frozen=True)
class ErrorCount:
    """Error tallies of a Monte Carlo run."""

    symbols_sent: int
    symbol_errors: int
    bit_errors: int
    bits_per_symbol: int

    def __post_init__(self):
        if not 0 <= self.symbol_errors <= self.symbols_sent:
            raise ValueError("symbol_errors must lie in [0, symbols_sent]")
        if not 0 <= self.bit_errors <= self.symbols_sent * self.bits_per_symbol:
            raise ValueError("bit_errors out of range")

    def __add__(self, other: "ErrorCount") -> "ErrorCount":
        if self.bits_per_symbol != other.bits_per_symbol:
            raise ValueError("cannot add counts with different bits per symbol")
        return ErrorCount(
            self.symbols_sent + other.symbols_sent,
            self.symbol_errors + other.symbol_errors,
            self.bit_errors + other.bit_errors,
            self.bits_per_symbol,
        )

    @property
    def ser(self) -> float:
        return self.symbol_errors / self.symbols_sent

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.symbols_sent * self.bits_per_symbol)

    @property
    def ser_std(self) -> float:
        """Binomial standard error of ``ser``."""
        p = self.ser
        return math.sqrt(p * (1 - p) / self.symbols_sent)

    @property
    def ci95_ser(self) -> float:
        """Half-width of the Wald 95% interval on ``ser``."""
        return 1.959963984540054 * self.ser_std

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(ser=self.ser, ber=self.ber, ci95_ser=self.ci95_ser)
        return out


def chunk_generator(seed: int, chunk_index: int) -> np.random.Generator:
    """Independent generator for one chunk."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(chunk_index),))))


def noise_sigma(e_avg: float, snr: SnrSpec, bits_per_symbol: int) -> float:
    """Per-component noise standard deviation ``sqrt(N0/2)`` with ``N0 = E_avg / (Es/N0)``."""
    gamma = snr.per_symbol(bits_per_symbol)
    if math.isinf(gamma):
        return 0.0
    return math.sqrt(e_avg / gamma / 2.0)


# ------------------------------------------------------------ AWGN runs
def _awgn_chunk(job) -> tuple[int, int, int]:
    c, labels, detector, seed, sigma, (index, count) = job
    rng = chunk_generator(seed, index)
    sent = rng.integers(0, c.order, size=count)
    noise = rng.standard_normal((2, count))
    z = c.as_complex()[sent] + sigma * (noise[0] + 1j * noise[1])
    got = np.asarray(DETECTORS[detector](c, z))
    wrong = got != sent
    bit_errors = int(popcount(labels[sent[wrong]] ^ labels[got[wrong]]).sum())
    return count, int(wrong.sum()), bit_errors


def _run_chunks(func, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [func(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, jobs))


def run_awgn(c: Constellation, m: BitMapping, detector: str, cfg: SimConfig, workers: int = 1) -> ErrorCount:
    """Monte Carlo symbol and bit error counts over AWGN.

    Parameters
    ----------
    c, m : Constellation, BitMapping
        Geometry and labels; ``m`` must fit ``c``.
    detector : str
        Key of :data:`qamlab.detection.DETECTORS` (``"fast"`` is exact ML).
    cfg : SimConfig
    workers : int
        Worker processes; does not affect the result.

    Raises
    ------
    MappingMismatch
        If ``m`` does not fit ``c``.
    """
    m.check(c)
    if detector not in DETECTORS:
        raise ValueError(f"unknown detector {detector!r}; choose from {sorted(DETECTORS)}")
    sigma = noise_sigma(float(np.mean(c.energies())), cfg.snr, c.bits_per_symbol)
    labels = np.asarray(m.labels, dtype=np.uint64)
    jobs = [(c, labels, detector, cfg.seed, sigma, ch) for ch in cfg.chunks()]
    total = ErrorCount(0, 0, 0, c.bits_per_symbol)
    for sent, sym, bits in _run_chunks(_awgn_chunk, jobs, workers):
        total = total + ErrorCount(sent, sym, bits, c.bits_per_symbol)
    return total


def _differential_chunk(job) -> tuple[int, int, int]:
    c, seed, sigma, (index, count) = job
    rng = chunk_generator(seed, index)
    words = rng.integers(0, c.order, size=count)
    stream = np.concatenate([[0], star_differential_modulate(c, words, start=0)])
    noise = rng.standard_normal((2, count + 1))
    z = c.as_complex()[stream] + sigma * (noise[0] + 1j * noise[1])
    z = np.where(z == 0, np.finfo(float).tiny, z)
    got = np.asarray(star_differential_detect(c, z[:-1], z[1:]))
    wrong = got != words
    return count, int(wrong.sum()), int(popcount((words ^ got).astype(np.uint64)).sum())


def run_star_differential(c: Constellation, cfg: SimConfig, workers: int = 1) -> ErrorCount:
    """Differentially encoded star QAM over AWGN, detected differentially.

    Every chunk starts from a known reference symbol (index 0) that is not
    counted.  A noisy symbol corrupts the two words that use it, so errors
    arrive in adjacent pairs; they are counted as they occur.

    Raises
    ------
    WrongFamily
        If ``c`` is not star QAM.
    UnsupportedOrder
        If ``c`` has fewer than 16 points.
    """
    if c.family is not Family.STAR:
        raise WrongFamily(f"differential simulation needs StarQAM, got {c.family.value}")
    if c.order < 16:
        raise UnsupportedOrder("differential star QAM needs M >= 16")
    sigma = noise_sigma(float(np.mean(c.energies())), cfg.snr, c.bits_per_symbol)
    jobs = [(c, cfg.seed, sigma, ch) for ch in cfg.chunks()]
    total = ErrorCount(0, 0, 0, c.bits_per_symbol)
    for sent, sym, bits in _run_chunks(_differential_chunk, jobs, workers):
        total = total + ErrorCount(sent, sym, bits, c.bits_per_symbol)
    return total


def _noise_chunk(job) -> tuple[float, float, int]:
    seed, (index, count) = job
    noise = chunk_generator(seed, index).standard_normal((2, count))
    return float(np.sum(noise[0] ** 2)), float(np.sum(noise[1] ** 2)), count


def noise_variance_check(seed: int, n_samples: int = 10**7, n0: float = 1.0) -> tuple[float, float]:
    """Empirical per-component variances of the generated noise, for target ``N0/2``."""
    cfg = SimConfig(seed, n_samples, SnrSpec.db(0.0))
    sums = [_noise_chunk((seed, ch)) for ch in cfg.chunks()]
    scale = n0 / 2.0
    return (
        scale * sum(s[0] for s in sums) / n_samples,
        scale * sum(s[1] for s in sums) / n_samples,
    )


# ---------------------------------------------------------------- curves
CURVE_COLUMNS = ("snr_db", "ser_mc", "ser_ci95", "ber_mc", "sep_analytic", "bep_analytic")


def simulate_curve(
    c: Constellation,
    m: BitMapping,
    snr_db,
    seed: int,
    n_symbols: int,
    detector: str = "fast",
    convention: str = "PerSymbol",
    chunk: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> list[dict]:
    """Monte Carlo and analytic error rates over an SNR sweep.

    Every SNR point reuses the same seed (common random numbers).  Analytic
    columns are ``None`` for families without a closed form.
    """
    g_p = gray_penalty(c, m).g_p
    rows = []
    for value in snr_db:
        snr = SnrSpec.db(float(value), convention)
        count = run_awgn(c, m, detector, SimConfig(seed, n_symbols, snr, chunk), workers)
        try:
            sep = sep_for(c, snr)
            bep = bep_from_sep(sep, g_p, c.order)
        except QamError:
            sep = bep = None
        rows.append(
            {
                "snr_db": float(value),
                "ser_mc": count.ser,
                "ser_ci95": count.ci95_ser,
                "ber_mc": count.ber,
                "sep_analytic": sep,
                "bep_analytic": bep,
                "symbol_errors": count.symbol_errors,
                "bit_errors": count.bit_errors,
                "symbols_sent": count.symbols_sent,
            }
        )
    return rows


def curve_csv(rows: list[dict]) -> str:
    """CSV with the columns of :data:`CURVE_COLUMNS`; missing analytic values are empty."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CURVE_COLUMNS)
    for row in rows:
        out = [f"{row['snr_db']:.6g}"]
        for key in CURVE_COLUMNS[1:]:
            out.append("" if row[key] is None else f"{row[key]:.12e}")
        writer.writerow(out)
    return buf.getvalue()


# -------------------------------------------------------------- manifest
def _json_float(value):
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def constellation_summary(c: Constellation) -> dict:
    report = compute_metrics(c)
    return {
        "family": c.family.value,
        "M": c.order,
        "sha256": c.digest(),
        "metrics": {
            "e_avg": report.e_avg,
            "e_peak": report.e_peak,
            "papr": report.papr,
            "tau": str(report.tau),
            "tau_c": str(report.tau_c),
            "K": str(report.k_param),
        },
    }


def manifest(c: Constellation, m: BitMapping | None, settings: dict, results) -> dict:
    """Everything needed to reproduce a run.

    Worker counts and wall-clock times are deliberately left out so the
    manifest is byte-identical however the run was parallelised.
    """
    return {
        "tool": "qamlab",
        "version": __version__,
        "numpy": np.__version__,
        "gaussian": GAUSSIAN_METHOD,
        "bit_generator": BIT_GENERATOR,
        "constellation": constellation_summary(c),
        "mapping": None
        if m is None
        else {"scheme": m.scheme.value, "labels": m.bitstrings()},
        "settings": settings,
        "results": results,
    }


def manifest_json(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return str(obj)
