"""Command line interface: simulate, sweep, search, figure.

Exit codes: 0 success, 1 configuration/usage error, 2 numerical failure,
3 search finished without meeting its target.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import figures
from .analysis import FinalStateReport, von_neumann_entropy, w_fidelity
from .config import CONFIG_SCHEMA, ConfigError, RunConfig, build_problem
from .dynamics import ExcitationState, IntegrationError, TimeSeries, final_state, integrate
from .sweep import SweepSpec, run_sweep, search_bell_velocity, search_w_velocities

log = logging.getLogger("photonic_entangle")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_TARGET = 0, 1, 2, 3


def csv_header(labels) -> list[str]:
    cols = ["t_s"]
    for lab in labels:
        cols += [f"re_{lab}", f"im_{lab}", f"pop_{lab}"]
    cols += ["re_gamma", "im_gamma", "pop_photon"]
    if len(labels) == 2:
        cols.append("entropy_nats")
    elif len(labels) == 3:
        cols.append("w_fidelity")
    return cols


def _row(t: float, amps: np.ndarray) -> list[str]:
    # repr gives the shortest decimal that round-trips
    cells = [repr(float(t))]
    for a in amps:
        cells += [repr(float(a.real)), repr(float(a.imag)), repr(float(abs(a) ** 2))]
    n = len(amps) - 1
    if n == 2:
        cells.append(repr(float(von_neumann_entropy(min(abs(amps[0]) ** 2, 1.0)))))
    elif n == 3:
        cells.append(repr(float(w_fidelity(ExcitationState.from_array(amps)))))
    return cells


SERIES_SUFFIXES = {"csv": ".csv", "json": ".series.json"}


def _stem(path: Path) -> str:
    for suffix in SERIES_SUFFIXES.values():
        if path.name.endswith(suffix):
            return path.name[: -len(suffix)]
    return path.name


def export_timeseries(
    series: TimeSeries,
    report: FinalStateReport | None,
    path: str | Path,
    config: RunConfig | None = None,
    fmt: str = "csv",
) -> list[Path]:
    """Write ``series`` as CSV (or JSON) plus sidecars; returns written paths.

    Sidecars share the series file's stem: ``<stem>.config.json`` holds the
    full run configuration and ``<stem>.report.json`` the final-state report.
    """
    path = Path(path)
    written = []
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "csv":
            with path.open("w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(csv_header(series.labels))
                for t, amps in zip(series.times, series.amplitudes):
                    writer.writerow(_row(t, amps))
        elif fmt == "json":
            payload = {
                "labels": list(series.labels),
                "t_s": series.times.tolist(),
                "amplitudes": [[[float(a.real), float(a.imag)] for a in row] for row in series.amplitudes],
            }
            path.write_text(json.dumps(payload))
        else:
            raise ValueError(f"unknown format {fmt}")
        written.append(path)
        if config is not None:
            sidecar = path.with_name(_stem(path) + ".config.json")
            sidecar.write_text(config.to_json())
            written.append(sidecar)
        if report is not None:
            rep = path.with_name(_stem(path) + ".report.json")
            rep.write_text(json.dumps(report.to_dict(), indent=2))
            written.append(rep)
    except OSError as exc:
        raise OSError(f"cannot write output {path}: {exc}") from exc
    return written


def simulate_config(config: RunConfig, out_stem: Path) -> FinalStateReport:
    series = integrate(build_problem(config))
    report = FinalStateReport(final_state(series), series.labels)
    for fmt in config.data["output"]["formats"]:
        target = out_stem.with_name(out_stem.name + SERIES_SUFFIXES[fmt])
        export_timeseries(series, report, target, config, fmt)
    return report


def _parse_range(text: str) -> tuple[float, float, int]:
    try:
        lo, hi, n = text.split(":")
        return float(lo), float(hi), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi:n, got {text!r}") from None


def _parse_bracket(text: str) -> tuple[float, float]:
    try:
        lo, hi = text.split(":")
        return float(lo), float(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from None


def _print_report(name: str, report: FinalStateReport) -> None:
    pops = ", ".join(f"{lab}={p:.4f}" for lab, p in zip(report.labels, report.populations))
    print(f"{name}: populations {pops}; photon {report.photon_prob:.4f}")


def cmd_simulate(args) -> int:
    config = RunConfig.load(args.config)
    stem = Path(args.out) / Path(args.config).stem
    report = simulate_config(config, stem)
    _print_report(stem.name, report)
    return EXIT_OK


def _write_sweep(result, out: Path, name: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    target = out / f"{name}.sweep.json"
    target.write_text(json.dumps(result.to_dict()))
    with (out / f"{name}.sweep.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        labels = result.reports.ravel()[0].labels
        speed_cols = ["v_B_mps", "v_C_mps"][: len(result.axes)]
        writer.writerow(speed_cols + [f"pop_{lab}" for lab in labels] + ["pop_photon"])
        for idx in np.ndindex(result.reports.shape):
            rep = result.reports[idx]
            speeds = [repr(float(result.axes[k][i])) for k, i in enumerate(idx)]
            writer.writerow(speeds + [repr(float(p)) for p in rep.populations] + [repr(float(rep.photon_prob))])
    return target


def cmd_sweep(args) -> int:
    config = RunConfig.load(args.config)
    try:
        spec = SweepSpec(config, args.vb, args.vc)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    result = run_sweep(spec, workers=args.workers)
    target = _write_sweep(result, Path(args.out), Path(args.config).stem)
    print(f"wrote {target}")
    return EXIT_OK


def cmd_search(args) -> int:
    config = RunConfig.load(args.config)
    try:
        if args.target == "bell":
            result = search_bell_velocity(config, args.vb_bracket, args.grid, workers=args.workers)
        else:
            result = search_w_velocities(
                config, args.vb_bracket, args.vc_bracket, args.grid, workers=args.workers
            )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    target = out / f"{Path(args.config).stem}.search_{args.target}.json"
    target.write_text(json.dumps(result.to_dict(), indent=2))
    speeds = ", ".join(f"{v:.2f}" for v in result.velocities)
    _print_report(f"{args.target} search at ({speeds}) m/s", result.report)
    if not result.target_met:
        print("target not met", file=sys.stderr)
        return EXIT_TARGET
    return EXIT_OK


def cmd_figure(args) -> int:
    if args.list or args.name is None:
        for name, entry in figures.FIGURES.items():
            print(f"{name:4s} {entry['description']}")
        return EXIT_OK
    if args.name not in figures.FIGURES:
        raise ConfigError(f"unknown figure {args.name!r}; choose from {', '.join(figures.FIGURES)}")
    entry = figures.FIGURES[args.name]
    out = Path(args.out)
    if "sweep" in entry:
        sw = entry["sweep"]
        spec = SweepSpec(RunConfig.from_dict(sw["base"]), sw["vb"], sw["vc"])
        result = run_sweep(spec, workers=args.workers)
        print(f"wrote {_write_sweep(result, out, f'figure{args.name}')}")
        return EXIT_OK
    for run, config in figures.figure_runs(args.name).items():
        report = simulate_config(config, out / f"figure{args.name}_{run}")
        _print_report(run, report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="photonic-entangle", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate one configuration")
    p.add_argument("config")
    p.add_argument("-o", "--out", default="out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="final states over a velocity grid")
    p.add_argument("config")
    p.add_argument("--vb", type=_parse_range, required=True, metavar="LO:HI:N")
    p.add_argument("--vc", type=_parse_range, metavar="LO:HI:N")
    p.add_argument("-j", "--workers", type=int, default=1)
    p.add_argument("-o", "--out", default="out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("search", help="locate Bell or W operating velocities")
    p.add_argument("config")
    p.add_argument("--target", choices=("bell", "w"), required=True)
    p.add_argument("--vb-bracket", type=_parse_bracket, default=(500.0, 560.0), metavar="LO:HI")
    p.add_argument("--vc-bracket", type=_parse_bracket, default=(480.0, 600.0), metavar="LO:HI")
    p.add_argument("--grid", type=int, default=61)
    p.add_argument("-j", "--workers", type=int, default=1)
    p.add_argument("-o", "--out", default="out")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("figure", help="reproduce the data behind a reference figure")
    p.add_argument("name", nargs="?")
    p.add_argument("--list", action="store_true")
    p.add_argument("-j", "--workers", type=int, default=1)
    p.add_argument("-o", "--out", default="out")
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("schema", help="print the configuration JSON schema")
    p.set_defaults(func=lambda args: print(json.dumps(CONFIG_SCHEMA, indent=2)) or EXIT_OK)
    return parser


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run_command())
