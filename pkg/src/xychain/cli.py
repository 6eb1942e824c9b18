"""Command-line front end.

Every subcommand writes its table or report and prints a one-line summary.
Exit codes: 0 success, 2 usage error, 3 domain error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import io as xio
from .chain import ChainParams, Sector
from .errors import BranchMisfit, InsufficientData, IoError, XYChainError
from .exact import classify_case, match_spectra, parity_resolved_spectrum
from .fermions import (
    delta_gs,
    enumerate_many_body,
    physical_parity,
    sector_ground_energy,
    single_particle_spectrum,
)
from .geometry import (
    berry_phase_thermo,
    metric_derivatives,
    qgt_components,
    ricci_scalar,
    ricci_thermo,
)
from .scaling import (
    build_series,
    classify_decay,
    em_delta_gs,
    em_general,
    fit_biexponential,
    fit_exponential,
    fit_powerlaw,
)
from .scan import (
    Grid,
    extract_zero_curves,
    fit_arcs,
    resolve_threads,
    scan_cases,
    scan_sign,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def parse_L_list(text: str) -> list:
    """``8,16,32`` or inclusive ``start:stop:step`` (step defaults to 1)."""
    try:
        if ":" in text:
            parts = [int(x) for x in text.split(":")]
            start, stop = parts[0], parts[1]
            step = parts[2] if len(parts) > 2 else 1
            if step <= 0:
                raise ValueError
            Ls = list(range(start, stop + 1, step))
        else:
            Ls = [int(x) for x in text.split(",") if x]
        if not Ls or min(Ls) < 2:
            raise ValueError
        return Ls
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad L list {text!r}") from None


def parse_window(text: str) -> tuple:
    try:
        lo, hi = (int(x) for x in text.split(":"))
        return lo, hi
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad window {text!r}; expected Lmin:Lmax") from None


def parse_grid(text: str) -> Grid:
    try:
        return Grid.parse(text)
    except (ValueError, XYChainError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _sector(text):
    try:
        return Sector.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


QUANTITY_NAMES = {
    "deltaE": "deltaE", "delta-e": "deltaE",
    "ricciR": "ricciR", "ricci-r": "ricciR",
    "ricciNS": "ricciNS", "ricci-ns": "ricciNS",
    "deltaRicci": "deltaRicci", "delta-ricci": "deltaRicci",
    "ricciProduct": "ricciProduct", "ricci-product": "ricciProduct",
}


def _quantity(text):
    if text not in QUANTITY_NAMES:
        raise argparse.ArgumentTypeError(f"unknown quantity {text!r}")
    return QUANTITY_NAMES[text]


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--json-errors", action="store_true", help="report errors as JSON on stderr")
    common.add_argument("--threads", type=int, default=None,
                        help="worker processes for scans (XYCHAIN_THREADS overrides)")

    point = _Parser(add_help=False)
    point.add_argument("--L", type=int, required=True)
    point.add_argument("--gamma", type=float, required=True)
    point.add_argument("--h", type=float, required=True)
    point.add_argument("--J", type=float, default=1.0)

    parser = _Parser(prog="xychain", description="Finite XY chain spectra, geometry and scans.",
                     parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("spectrum", parents=[common, point], help="single-particle spectrum of a sector")
    p.add_argument("--sector", type=_sector, default=Sector.NS)
    p.add_argument("--out")

    p = sub.add_parser("gs-energy", parents=[common, point], help="sector ground energies")
    p.add_argument("--dps", type=int, default=None)
    p.add_argument("--out")

    p = sub.add_parser("delta-e", parents=[common], help="E_NS - E_R over a list of sizes")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--L-list", type=parse_L_list, required=True)
    p.add_argument("--dps", type=int, default=50)
    p.add_argument("--out")
    p.add_argument("--figure")

    p = sub.add_parser("qgt", parents=[common, point], help="metric components and derivatives")
    p.add_argument("--sector", type=_sector, default=Sector.R)
    p.add_argument("--out")

    p = sub.add_parser("ricci", parents=[common, point], help="Ricci scalar by both methods")
    p.add_argument("--sector", type=_sector, default=Sector.R)
    p.add_argument("--dps", type=int, default=None)
    p.add_argument("--out")

    p = sub.add_parser("fit", parents=[common], help="decay-law fit of a size series")
    p.add_argument("--quantity", type=_quantity, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--L-list", type=parse_L_list, required=True)
    p.add_argument("--model", choices=("auto", "exponential", "powerlaw", "biexp-mod4", "biexp-mod2"),
                   default="auto")
    p.add_argument("--window", type=parse_window)
    p.add_argument("--method", choices=("determinant", "christoffel"), default="determinant")
    p.add_argument("--dps", type=int, default=50)
    p.add_argument("--out")
    p.add_argument("--series-out")
    p.add_argument("--figure")

    p = sub.add_parser("em-compare", parents=[common], help="sector gap at h=1 against expansions")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--L-list", type=parse_L_list, required=True)
    p.add_argument("--n-terms", type=int, default=2)
    p.add_argument("--dps", type=int, default=50)
    p.add_argument("--out")
    p.add_argument("--figure")

    p = sub.add_parser("scan-phase", parents=[common], help="case map and transition arcs")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--grid", type=parse_grid, required=True)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--source", choices=("fermionic", "exact"), default="fermionic")
    p.add_argument("--out")
    p.add_argument("--arcs")
    p.add_argument("--svg")
    p.add_argument("--figure")

    p = sub.add_parser("scan-sign", parents=[common], help="curvature sign map and zero curves")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--quantity", type=_quantity, required=True)
    p.add_argument("--grid", type=parse_grid, required=True)
    p.add_argument("--clamp", type=float, default=1.0)
    p.add_argument("--method", choices=("determinant", "christoffel"), default="determinant")
    p.add_argument("--out")
    p.add_argument("--svg")
    p.add_argument("--zeros")
    p.add_argument("--figure")

    p = sub.add_parser("oracle-check", parents=[common, point], help="fermionic vs exact spectra")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--solver", choices=("lapack", "jacobi"), default="lapack")
    p.add_argument("--out")
    return parser


class _Output:
    """Routes results to files or stdout and the summary line accordingly."""

    def __init__(self):
        self.stdout_used = False

    def table(self, path, kind, rows, extra=None):
        if path:
            xio.write_table(path, kind, rows, extra)
        else:
            sys.stdout.write(xio.csv_text(kind, rows))
            self.stdout_used = True

    def document(self, path, obj):
        if path:
            xio.write_json(path, obj)
        else:
            sys.stdout.write(xio.json_document(obj))
            self.stdout_used = True

    def summary(self, text):
        stream = sys.stderr if self.stdout_used else sys.stdout
        stream.write(text + "\n")


def _params(args):
    # Bad point parameters are usage errors, not compute-domain errors.
    try:
        return ChainParams(args.L, args.gamma, args.h, args.J)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _sign(v):
    return 0 if abs(v) < 1e-30 else (1 if v > 0 else -1)


def cmd_spectrum(args, out):
    sp = single_particle_spectrum(_params(args), args.sector)
    rows = [(k + 1, sp.phases[k], sp.energies[k], sp.angles[k]) for k in range(args.L)]
    out.table(args.out, "spectrum", rows)
    out.summary(f"spectrum: {args.sector.value} L={args.L} min eps={sp.energies.min():.6g}")


def cmd_gs_energy(args, out):
    p = _params(args)
    doc = {
        "L": p.L, "gamma": p.gamma, "h": p.h, "J": p.J,
        "E_NS": sector_ground_energy(p, Sector.NS, args.dps),
        "E_R": sector_ground_energy(p, Sector.R, args.dps),
        "delta": delta_gs(p, args.dps),
    }
    out.document(args.out, doc)
    out.summary(f"gs-energy: E_NS={doc['E_NS']!r} E_R={doc['E_R']!r}")


def _series_rows(series):
    return [(L, v, s) for (L, v), s in zip(series.samples, series.sign_sequence)]


def cmd_delta_e(args, out):
    series = build_series("deltaE", args.gamma, args.h, args.L_list, dps=args.dps)
    out.table(args.out, "series", _series_rows(series))
    if args.figure:
        from .report import plot_series

        plot_series(series, args.figure)
    out.summary(f"delta-e: {len(series.samples)} sizes, sign changes="
                f"{sum(1 for a, b in zip(series.sign_sequence, series.sign_sequence[1:]) if a * b < 0)}")


def cmd_qgt(args, out):
    p = _params(args)
    q = qgt_components(p, args.sector)
    d = metric_derivatives(p, args.sector)
    doc = {
        "L": p.L, "gamma": p.gamma, "h": p.h, "sector": args.sector.value,
        "q_hh": q.q_hh, "q_gg": q.q_gg, "q_hg": q.q_hg, "omega_hg": q.omega_hg,
        "derivatives": {k: getattr(d, k) for k in
                        ("dhh_dh", "dhh_dg", "dgg_dh", "dgg_dg", "dhg_dh", "dhg_dg")},
    }
    out.document(args.out, doc)
    out.summary(f"qgt: q_hh={q.q_hh:.6g} q_gg={q.q_gg:.6g} q_hg={q.q_hg:.6g}")


def cmd_ricci(args, out):
    p = _params(args)
    r = ricci_scalar(p, args.sector, args.dps)
    doc = {
        "L": p.L, "gamma": p.gamma, "h": p.h, "sector": args.sector.value,
        "r_paper": r.r_paper, "r_christoffel": r.r_christoffel,
        "discrepancy": r.discrepancy, "singular": r.singular,
    }
    try:
        doc["r_thermo"] = ricci_thermo(p.gamma, p.h, p.L)
    except XYChainError:
        doc["r_thermo"] = None
    doc["berry_phase_thermo"] = berry_phase_thermo(p.gamma, p.h)
    out.document(args.out, doc)
    out.summary(f"ricci: r_paper={r.r_paper:.6g} r_christoffel={r.r_christoffel:.6g}")


def cmd_fit(args, out):
    series = build_series(args.quantity, args.gamma, args.h, args.L_list, method=args.method, dps=args.dps)
    if args.series_out:
        xio.write_table(args.series_out, "series", _series_rows(series))
    if args.model == "auto":
        res = classify_decay(series, args.window)
    elif args.model == "exponential":
        res = fit_exponential(series, args.window)
    elif args.model == "powerlaw":
        res = fit_powerlaw(series, args.window)
    else:
        try:
            res = fit_biexponential(series, args.model.split("-")[1], args.window)
        except BranchMisfit as exc:
            res = exc.result
            res.flags["branch_misfit"] = True
    doc = {"quantity": args.quantity, "gamma": args.gamma, "h": args.h,
           "method": args.method, "gaps": list(series.gaps), **res.to_dict()}
    out.document(args.out, doc)
    if args.figure:
        from .report import plot_series

        plot_series(series, args.figure, res)
    out.summary(f"fit: {res.model} {json.dumps({k: float(v) for k, v in res.exponents.items()})}")


def cmd_em_compare(args, out):
    rows = []
    for L in args.L_list:
        p = ChainParams(L, args.gamma, 1.0)
        rows.append((
            L,
            delta_gs(p, dps=args.dps),
            em_delta_gs(args.gamma, L, 1),
            em_delta_gs(args.gamma, L, 3),
            em_general(p, args.n_terms),
        ))
    out.table(args.out, "em", rows)
    if args.figure:
        from .report import plot_em_compare

        plot_em_compare(rows, args.figure)
    last = rows[-1]
    out.summary(f"em-compare: L={last[0]} exact*L={last[1] * last[0]:.6g} "
                f"em_general*L={last[4] * last[0]:.6g}")


def cmd_scan_phase(args, out):
    cmap = scan_cases(args.grid, args.L, args.tol, args.source, threads=resolve_threads(args.threads))
    rows = [(g, h, lab) for g, h, lab in zip(cmap.gamma.ravel(), cmap.h.ravel(), cmap.labels.ravel())]
    out.table(args.out, "cases", rows)
    arcs = fit_arcs(extract_zero_curves(cmap), args.L)
    if args.arcs:
        xio.write_table(args.arcs, "arcs", [(a.index, a.h0, a.residual, a.n_points) for a in arcs.arcs])
    if args.svg:
        field = cmap.field
        text = xio.svg_heatmap(args.grid.gammas, args.grid.hs, field, np.sign(field), 1.0,
                               (args.grid.gamma_min, args.grid.gamma_max, args.grid.h_min, args.grid.h_max),
                               title=f"cases L={args.L}")
        xio.atomic_write(args.svg, text)
    if args.figure:
        from .report import plot_case_map

        plot_case_map(cmap, args.figure, arcs)
    out.summary(f"scan-phase: L={args.L} arcs={arcs.count} counts={json.dumps(cmap.counts())}")


def cmd_scan_sign(args, out):
    if args.quantity == "deltaE":
        raise UsageError("scan-sign quantity must be a curvature field")
    smap = scan_sign(args.grid, args.L, args.quantity, args.clamp, args.method)
    raw, clamped, signs, sing = smap.raw, smap.clamped, smap.signs, smap.singular
    rows = [
        (smap.gamma[idx], smap.h[idx], raw[idx], clamped[idx], signs[idx], bool(sing[idx]))
        for idx in np.ndindex(raw.shape)
    ]
    out.table(args.out, "signmap", rows)
    curves = extract_zero_curves(smap)
    if args.zeros:
        zrows = [(i, pt[0], pt[1]) for i, c in enumerate(curves) for pt in c.points]
        xio.write_table(args.zeros, "zeros", zrows)
    if args.svg:
        xio.emit_svg_heatmap(smap, args.svg)
    if args.figure:
        from .report import plot_sign_map

        plot_sign_map(smap, args.figure, curves)
    neg = int((signs < 0).sum())
    out.summary(f"scan-sign: {args.quantity} L={args.L} negative={neg} singular={int(sing.sum())} "
                f"zero-curves={len(curves)}")


def cmd_oracle_check(args, out):
    p = _params(args)
    exact = parity_resolved_spectrum(p, args.solver)
    spectra = [enumerate_many_body(p, s) for s in (Sector.NS, Sector.R)]
    report = match_spectra(spectra, exact, args.tol).to_dict()
    report.update({
        "L": p.L, "gamma": p.gamma, "h": p.h, "J": p.J,
        "physical_parity": {s.value: physical_parity(p, s) for s in (Sector.NS, Sector.R)},
    })
    try:
        report["case"] = classify_case(p, args.tol).tag
    except XYChainError as exc:
        report["case"] = f"error: {exc}"
    out.document(args.out, report)
    out.summary(f"oracle-check: union residual={report['union_max_residual']:.3g} case={report['case']}")


COMMANDS = {
    "spectrum": cmd_spectrum,
    "gs-energy": cmd_gs_energy,
    "delta-e": cmd_delta_e,
    "qgt": cmd_qgt,
    "ricci": cmd_ricci,
    "fit": cmd_fit,
    "em-compare": cmd_em_compare,
    "scan-phase": cmd_scan_phase,
    "scan-sign": cmd_scan_sign,
    "oracle-check": cmd_oracle_check,
}


def _report_error(kind, message, code, json_errors):
    if json_errors:
        sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    else:
        sys.stderr.write(f"xychain: {kind}: {message}\n")
    return code


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    json_errors = "--json-errors" in argv
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        if not json_errors:
            parser.print_usage(sys.stderr)
        return _report_error("usage", str(exc), 2, json_errors)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    out = _Output()
    try:
        COMMANDS[args.command](args, out)
    except UsageError as exc:
        return _report_error("usage", str(exc), 2, json_errors)
    except (IoError, OSError) as exc:
        return _report_error("io", str(exc), 4, json_errors)
    except (InsufficientData, XYChainError) as exc:
        return _report_error(type(exc).__name__, str(exc), getattr(exc, "exit_code", 3), json_errors)
    except ValueError as exc:
        return _report_error("usage", str(exc), 2, json_errors)
    return 0


def main():
    sys.exit(run())
