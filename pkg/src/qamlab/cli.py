"""Command-line interface: ``qamlab <subcommand> [flags]``.

Exit codes: 0 success, 2 flag error, 3 unsupported configuration,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import SnrSpec, bep_from_sep, sep_for
from .bitmap import BitMapping, gray_penalty, mapping_for
from .constellations import HQAM_ORDERS, Constellation, Family, generate
from .detection import DETECTORS, read_samples_csv, write_indices_csv
from .errors import (
    MappingMismatch,
    NotPowerOfFour,
    QamError,
    UnsupportedOrder,
    UnsupportedPair,
    WrongConstellation,
    WrongFamily,
)
from .metrics import compute_metrics
from .simulate import (
    DEFAULT_CHUNK,
    SimConfig,
    curve_csv,
    manifest,
    manifest_json,
    run_star_differential,
    simulate_curve,
)

EXIT_OK, EXIT_FLAGS, EXIT_UNSUPPORTED, EXIT_NUMERIC = 0, 2, 3, 4

FAMILY_NAMES = {f.value.lower(): f for f in Family}
COMPARE_FAMILIES = (Family.SQAM, Family.RQAM, Family.XQAM, Family.REGULAR_HQAM, Family.IRREGULAR_HQAM)
COMPARE_ORDERS = (4, 8, 16, 32, 64, 128, 256, 512, 1024)


class FlagError(Exception):
    """Invalid flag value or combination (exit code 2)."""


# ------------------------------------------------------------- parsing
def parse_family(text: str) -> Family:
    try:
        return FAMILY_NAMES[text.lower()]
    except KeyError:
        raise argparse.ArgumentTypeError(f"unknown family {text!r}; choose from {', '.join(f.value for f in Family)}")


def parse_sweep(text: str) -> list[float]:
    """``start:stop:step`` in dB, stop included when it falls on the grid."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("sweep must look like start:stop:step")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"sweep values must be numbers, got {text!r}")
    if step == 0 or not all(math.isfinite(v) for v in (start, stop, step)):
        raise argparse.ArgumentTypeError("sweep step must be finite and non-zero")
    if (stop - start) * step < 0:
        raise argparse.ArgumentTypeError("sweep step points away from stop")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 10) for k in range(count)]


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def parse_family_list(text: str) -> list[Family]:
    return [parse_family(v) for v in text.split(",") if v]


def _common(p: argparse.ArgumentParser, snr: bool = False, sim: bool = False) -> None:
    p.add_argument("--family", type=parse_family, help="constellation family")
    p.add_argument("--order", type=int, help="constellation order M")
    p.add_argument("--out", default="-", help="output file, '-' for standard output")
    p.add_argument("--format", choices=("csv", "json", "md"), default="csv")
    p.add_argument("--ring-ratio", type=float, default=2.0, help="star QAM ring ratio")
    if snr:
        group = p.add_mutually_exclusive_group()
        group.add_argument("--snr-db", type=float, help="single SNR point in dB")
        group.add_argument("--snr-sweep", type=parse_sweep, help="start:stop:step in dB")
        p.add_argument("--convention", choices=("PerSymbol", "PerBit"), default="PerSymbol")
    if sim:
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--symbols", type=int, default=10**5)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--chunk", type=int, default=DEFAULT_CHUNK)
        p.add_argument("--detector", choices=sorted(DETECTORS), default="fast")
        p.add_argument("--figure", help="also write an error-rate plot to this file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qamlab", description="QAM constellation toolkit")
    parser.add_argument("--version", action="version", version=f"qamlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="constellation points")
    _common(p)
    p.add_argument("--orientation", choices=("WideI", "WideQ"), default="WideI")
    p.add_argument("--figure", help="also write a scatter plot to this file")

    p = sub.add_parser("metrics", help="energy, PAPR, tau, tau_c, K, G_p")
    _common(p)
    p.add_argument("--orders", type=parse_int_list, help="comma-separated orders (HQAM table when omitted)")

    p = sub.add_parser("map", help="bit mapping and Gray penalty")
    _common(p)
    p.add_argument("--figure", help="also write a labelled scatter plot to this file")

    p = sub.add_parser("detect", help="detect received samples read from a CSV file")
    _common(p)
    p.add_argument("--input", required=True, help="CSV of re,im samples ('-' for standard input)")
    p.add_argument("--detector", choices=sorted(DETECTORS), default="ml")

    p = sub.add_parser("sep", help="closed-form SEP/BEP")
    _common(p, snr=True)

    p = sub.add_parser("simulate", help="Monte Carlo SER/BER curve with analytic columns")
    _common(p, snr=True, sim=True)
    p.add_argument("--differential", action="store_true", help="star QAM differential detection")

    p = sub.add_parser("compare", help="energy/PAPR comparison table across families")
    _common(p)
    p.add_argument("--orders", type=parse_int_list, default=list(COMPARE_ORDERS))
    p.add_argument("--families", type=parse_family_list, default=list(COMPARE_FAMILIES))

    p = sub.add_parser("report", help="tables, curves and figures into a directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--symbols", type=int, default=10**5)
    p.add_argument("--workers", type=int, default=1)
    return parser


def _require(args, *names: str) -> None:
    for name in names:
        if getattr(args, name, None) is None:
            raise FlagError(f"--{name.replace('_', '-')} is required for {args.command}")


def _validate(args) -> None:
    """Per-subcommand flag checks, run before any computation."""
    cmd = args.command
    if cmd in ("generate", "map", "detect", "sep", "simulate"):
        _require(args, "family", "order")
    if cmd == "metrics" and args.order is not None and args.orders is not None:
        raise FlagError("give either --order or --orders")
    if cmd in ("sep", "simulate") and args.snr_db is None and args.snr_sweep is None:
        raise FlagError(f"{cmd} needs --snr-db or --snr-sweep")
    if cmd in ("simulate", "report"):
        if args.symbols < 1:
            raise FlagError("--symbols must be positive")
        if args.workers < 1:
            raise FlagError("--workers must be positive")
        if not 0 <= args.seed < 2**64:
            raise FlagError("--seed must fit in 64 bits")
    if cmd == "simulate":
        if args.chunk < 1:
            raise FlagError("--chunk must be positive")
        if args.differential and args.family is not Family.STAR:
            raise FlagError("--differential applies to StarQAM only")
    if cmd == "detect" and args.format == "md":
        raise FlagError("detect writes csv or json")


# --------------------------------------------------------------- output
def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def render_rows(rows: list[dict], fmt: str, columns: list[str] | None = None, extra: dict | None = None) -> str:
    """Rows as CSV, JSON (with optional extra top-level fields) or a Markdown table."""
    columns = columns or (list(rows[0]) if rows else [])
    if fmt == "json":
        body = {"rows": [{k: _jsonable(r.get(k)) for k in columns} for r in rows]}
        body.update(extra or {})
        return json.dumps(body, indent=2, sort_keys=True) + "\n"
    if fmt == "md":
        lines = ["| " + " | ".join(columns) + " |", "|" + "|".join("---" for _ in columns) + "|"]
        lines += ["| " + " | ".join(_fmt(r.get(k)) for k in columns) + " |" for r in rows]
        return "\n".join(lines) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt(r.get(k)) for k in columns])
    return buf.getvalue()


def _jsonable(value):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, np.generic):
        return value.item()
    return value


def emit(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# --------------------------------------------------------------- tables
def _constellation(family: Family, order: int, ring_ratio: float = 2.0, **kwargs) -> Constellation:
    if family is Family.STAR:
        kwargs.setdefault("ring_ratio", ring_ratio)
    return generate(family, order, **kwargs)


def hqam_parameter_rows(orders=HQAM_ORDERS, with_gp: bool = True) -> list[dict]:
    """Regular and irregular HQAM parameters side by side, one row per order."""
    rows = []
    for order in orders:
        row = {"M": order}
        for prefix, family in (("reg", Family.REGULAR_HQAM), ("irr", Family.IRREGULAR_HQAM)):
            c = generate(family, order)
            r = compute_metrics(c)
            row.update(
                {
                    f"{prefix}_K": r.k_param,
                    f"{prefix}_tau": r.tau,
                    f"{prefix}_tau_c": r.tau_c,
                    f"{prefix}_Es_d2": r.e_avg,
                    f"{prefix}_PAPR": r.papr,
                    f"{prefix}_Gp": float(gray_penalty(c, mapping_for(c)).g_p) if with_gp else None,
                }
            )
        rows.append(row)
    return rows


def family_supports(family: Family, order: int) -> bool:
    """Whether ``(family, order)`` is a cell of the comparison table."""
    if order < 4 or order & (order - 1):
        return False
    even = int(math.log2(order)) % 2 == 0
    if family is Family.SQAM:
        return even
    if family is Family.RQAM:
        return not even
    if family is Family.XQAM:
        return not even and order >= 32
    return family in (Family.REGULAR_HQAM, Family.IRREGULAR_HQAM) and order in HQAM_ORDERS


def comparison_rows(orders=COMPARE_ORDERS, families=COMPARE_FAMILIES) -> list[dict]:
    """``E_s/d^2`` and PAPR per (order, family); unsupported cells are ``None``.

    Raises
    ------
    UnsupportedPair
        If an order is not a power of two of at least 4, or a family is
        outside the comparison set.
    """
    for family in families:
        if family not in COMPARE_FAMILIES:
            raise UnsupportedPair(f"{family.value} is not part of the comparison")
    for order in orders:
        if order < 4 or order & (order - 1) or order > 1024:
            raise UnsupportedPair(f"order {order} is not a comparison row")
    rows = []
    for order in orders:
        row = {"M": order}
        for family in families:
            if family_supports(family, order):
                r = compute_metrics(generate(family, order))
                row[f"{family.value}_Es_d2"], row[f"{family.value}_PAPR"] = r.e_avg, r.papr
            else:
                row[f"{family.value}_Es_d2"] = row[f"{family.value}_PAPR"] = None
        rows.append(row)
    return rows


def _short(value, digits: int = 3) -> str:
    if value is None:
        return "-"
    text = f"{value:.{digits}f}".rstrip("0").rstrip(".")
    return text


def comparison_markdown(rows: list[dict], families=COMPARE_FAMILIES) -> str:
    """Comparison table laid out as family column pairs ``E_s/d^2 | PAPR``."""
    head = ["M"] + [f"{f.value} {q}" for f in families for q in ("Es/d2", "PAPR")]
    lines = ["| " + " | ".join(head) + " |", "|" + "|".join("---" for _ in head) + "|"]
    for r in rows:
        cells = [str(r["M"])]
        for f in families:
            cells += [_short(r[f"{f.value}_Es_d2"]), _short(r[f"{f.value}_PAPR"])]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def hqam_markdown(rows: list[dict]) -> str:
    """HQAM parameter table: ``K, tau, tau_c, E_s/d^2, PAPR, G_p`` for each variant."""
    quantities = ("K", "tau", "tau_c", "Es_d2", "PAPR", "Gp")
    head = ["M"] + [f"{v} {q}" for v in ("regular", "irregular") for q in quantities]
    lines = ["| " + " | ".join(head) + " |", "|" + "|".join("---" for _ in head) + "|"]
    for r in rows:
        cells = [str(r["M"])]
        for prefix in ("reg", "irr"):
            for q in quantities:
                v = r[f"{prefix}_{q}"]
                cells.append(str(v) if isinstance(v, Fraction) else _short(v, 4))
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------- commands
def cmd_generate(args) -> str:
    c = _constellation(args.family, args.order, args.ring_ratio, orientation=args.orientation)
    if args.figure:
        from .plotting import plot_constellation

        plot_constellation(c, args.figure)
    if args.format == "json":
        return c.to_json() + "\n"
    if args.format == "md":
        rows = [{"index": k, "x": float(x), "y": float(y)} for k, (x, y) in enumerate(c.points)]
        return render_rows(rows, "md")
    return c.to_csv()


def cmd_metrics(args) -> str:
    if args.family is None and args.order is None:
        rows = hqam_parameter_rows(args.orders or HQAM_ORDERS)
        return hqam_markdown(rows) if args.format == "md" else render_rows(rows, args.format)
    if args.family is None:
        raise FlagError("--family is required with --order/--orders")
    orders = args.orders or ([args.order] if args.order is not None else None)
    if orders is None:
        raise FlagError("--order or --orders is required with --family")
    rows = []
    for order in orders:
        c = _constellation(args.family, order, args.ring_ratio)
        r = compute_metrics(c)
        try:
            g_p = gray_penalty(c, mapping_for(c)).g_p
        except QamError:
            g_p = None
        rows.append(
            {
                "family": c.family.value,
                "M": order,
                "K": r.k_param,
                "tau": r.tau,
                "tau_c": r.tau_c,
                "Es_d2": r.e_avg,
                "Epeak_d2": r.e_peak,
                "PAPR": r.papr,
                "Gp": None if g_p is None else float(g_p),
            }
        )
    return render_rows(rows, args.format)


def cmd_map(args) -> str:
    c = _constellation(args.family, args.order, args.ring_ratio)
    m = mapping_for(c)
    report = gray_penalty(c, m)
    if args.figure:
        from .plotting import plot_constellation

        plot_constellation(c, args.figure, m)
    if args.format == "json":
        data = json.loads(m.to_json())
        data.update(family=c.family.value, g_p=float(report.g_p), g_p_exact=str(report.g_p))
        return json.dumps(data, indent=2) + "\n"
    rows = [
        {"index": k, "x": float(x), "y": float(y), "bits": b, "neighbours": n}
        for k, ((x, y), b, n) in enumerate(zip(c.points, m.bitstrings(), report.nn_counts))
    ]
    text = render_rows(rows, args.format)
    if args.format == "md":
        text += f"\nG_p = {float(report.g_p):.6f} ({report.g_p})\n"
    return text


def cmd_detect(args) -> str:
    c = _constellation(args.family, args.order, args.ring_ratio)
    text = sys.stdin.read() if args.input == "-" else Path(args.input).read_text()
    samples = read_samples_csv(text)
    indices = np.atleast_1d(DETECTORS[args.detector](c, samples))
    try:
        m = mapping_for(c)
    except QamError:
        m = None
    if args.format == "json":
        body = {"indices": [int(k) for k in indices]}
        if m is not None:
            body["bits"] = [m.bitstrings()[k] for k in indices]
        return json.dumps(body, indent=2) + "\n"
    return write_indices_csv(indices, None if m is None else m.labels, None if m is None else m.width)


def _snr_points(args) -> list[float]:
    return [args.snr_db] if args.snr_db is not None else args.snr_sweep


def cmd_sep(args) -> str:
    c = _constellation(args.family, args.order, args.ring_ratio)
    try:
        g_p = gray_penalty(c, mapping_for(c)).g_p
    except QamError:
        g_p = None
    rows = []
    for db in _snr_points(args):
        sep = sep_for(c, SnrSpec.db(db, args.convention))
        if not math.isfinite(sep):
            raise ArithmeticError(f"non-finite SEP at {db} dB")
        row = {"snr_db": db, "sep_analytic": sep}
        if g_p is not None:
            row["ber_analytic"] = bep_from_sep(sep, g_p, c.order)
        rows.append(row)
    return render_rows(rows, args.format)


def _simulate_rows(args, c: Constellation, m: BitMapping | None) -> list[dict]:
    points = _snr_points(args)
    if args.differential:
        rows = []
        for db in points:
            snr = SnrSpec.db(db, args.convention)
            count = run_star_differential(c, SimConfig(args.seed, args.symbols, snr, args.chunk), args.workers)
            rows.append(
                {
                    "snr_db": float(db),
                    "ser_mc": count.ser,
                    "ser_ci95": count.ci95_ser,
                    "ber_mc": count.ber,
                    "sep_analytic": None,
                    "bep_analytic": None,
                    "symbol_errors": count.symbol_errors,
                    "bit_errors": count.bit_errors,
                    "symbols_sent": count.symbols_sent,
                }
            )
        return rows
    return simulate_curve(
        c, m, points, args.seed, args.symbols, args.detector, args.convention, args.chunk, args.workers
    )


def cmd_simulate(args) -> str:
    """Curve artifact: one row per SNR point with Monte Carlo and analytic columns."""
    c = _constellation(args.family, args.order, args.ring_ratio)
    m = None if args.differential else mapping_for(c)
    rows = _simulate_rows(args, c, m)
    settings = {
        "command": "simulate",
        "seed": args.seed,
        "symbols": args.symbols,
        "chunk": args.chunk,
        "snr_db": _snr_points(args),
        "convention": args.convention,
        "detector": "differential" if args.differential else args.detector,
    }
    record = manifest(c, m, settings, rows)
    if args.figure:
        from .plotting import plot_error_curves

        plot_error_curves({f"{c.order}-{c.family.value}": rows}, args.figure)
    if args.format == "json":
        return manifest_json(record)
    if args.format == "md":
        return render_rows(rows, "md")
    if args.out != "-":
        Path(str(args.out) + ".manifest.json").write_text(manifest_json(record))
    return curve_csv(rows)


def cmd_compare(args) -> str:
    rows = comparison_rows(args.orders, args.families)
    if args.format == "md":
        return comparison_markdown(rows, args.families)
    return render_rows(rows, args.format)


REPORT_CURVES = (
    (Family.SQAM, 16, range(0, 22, 2)),
    (Family.XQAM, 32, range(4, 26, 2)),
    (Family.REGULAR_HQAM, 64, range(10, 30, 2)),
    (Family.IRREGULAR_HQAM, 64, range(10, 30, 2)),
    (Family.STAR, 16, range(4, 26, 2)),
)


def cmd_report(args) -> str:
    """Write tables (csv/md/json), error-rate curves and figures into a directory."""
    from .plotting import plot_constellation, plot_error_curves

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    hqam = hqam_parameter_rows()
    (out / "hqam_parameters.md").write_text(hqam_markdown(hqam))
    (out / "hqam_parameters.csv").write_text(render_rows(hqam, "csv"))
    (out / "hqam_parameters.json").write_text(render_rows(hqam, "json"))
    comp = comparison_rows()
    (out / "comparison.md").write_text(comparison_markdown(comp))
    (out / "comparison.csv").write_text(render_rows(comp, "csv"))
    (out / "comparison.json").write_text(render_rows(comp, "json"))
    curves = {}
    for family, order, sweep in REPORT_CURVES:
        c = _constellation(family, order)
        m = mapping_for(c)
        detector = "star" if family is Family.STAR else "fast"
        rows = simulate_curve(c, m, list(sweep), args.seed, args.symbols, detector, workers=args.workers)
        stem = f"curve_{order}_{family.value}"
        (out / f"{stem}.csv").write_text(curve_csv(rows))
        settings = {"command": "report", "seed": args.seed, "symbols": args.symbols, "snr_db": list(sweep)}
        (out / f"{stem}.json").write_text(manifest_json(manifest(c, m, settings, rows)))
        plot_constellation(c, out / f"constellation_{order}_{family.value}.png", m)
        curves[f"{order}-{family.value}"] = rows
    plot_error_curves(curves, out / "ser_curves.png", title="Monte Carlo vs closed form")
    return "\n".join(sorted(p.name for p in out.iterdir())) + "\n"


COMMANDS = {
    "generate": cmd_generate,
    "metrics": cmd_metrics,
    "map": cmd_map,
    "detect": cmd_detect,
    "sep": cmd_sep,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "report": cmd_report,
}

UNSUPPORTED = (UnsupportedOrder, NotPowerOfFour, UnsupportedPair, WrongFamily, WrongConstellation, MappingMismatch)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _validate(args)
        text = COMMANDS[args.command](args)
        if args.command == "report":
            sys.stdout.write(text)
        else:
            emit(text, args.out)
    except FlagError as exc:
        parser.print_usage(sys.stderr)
        print(f"qamlab: error: {exc}", file=sys.stderr)
        return EXIT_FLAGS
    except UNSUPPORTED as exc:
        print(f"qamlab: unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (ArithmeticError, FloatingPointError) as exc:
        print(f"qamlab: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except QamError as exc:
        print(f"qamlab: invalid input: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except ValueError as exc:
        print(f"qamlab: error: {exc}", file=sys.stderr)
        return EXIT_FLAGS
    except OSError as exc:
        print(f"qamlab: {exc}", file=sys.stderr)
        return EXIT_FLAGS
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
