"""Command-line front end: simulate, sweep, analytic, and histogram.

Every command resolves one configuration (TOML file, then `--set`
overrides, then documented defaults), echoes it to stderr as reloadable
TOML for provenance, and emits CSV. With `--out PATH` the CSV goes to
that file and stdout carries only the path; without it the CSV streams
to stdout. Diagnostics never touch stdout.

Exit codes: 0 success, 1 usage error (bad arguments, unknown fields,
out-of-range values, unreadable config), 2 runtime or protocol failure
(aborted reconciliation, degenerate link, unwritable output).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from typing import Sequence

import numpy as np

from .config import SimConfig
from .analytic import expected_link_budget
from .engine import CSV_COLUMNS, run_trial, sweep

__all__ = ["main", "load_config"]

_QBER_CURVE_CLOCKS = (1.0, 1.5, 2.0, 2.5, 3.0, 3.3)
_RATE_CURVE_KM_STEP = 0.5
_RATE_CURVE_KM_MAX = 13.0


class UsageError(Exception):
    """Bad command line or configuration input; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse complaints through exit code 1
        raise UsageError(message)


def _field_types() -> dict[str, type]:
    hints = {"str": str, "float": float, "int": int}
    out = {}
    for f in dataclasses.fields(SimConfig):
        base = f.type.split("|")[0].strip()
        out[f.name] = hints.get(base, float)
    return out


def _coerce(name: str, raw: str):
    types = _field_types()
    if name not in types:
        raise UsageError(
            f"unknown config field {name!r}; valid fields: {', '.join(sorted(types))}")
    kind = types[name]
    if kind is str:
        return raw
    try:
        return kind(raw)
    except ValueError:
        raise UsageError(f"field {name!r} expects {kind.__name__}, got {raw!r}") from None


def load_config(path: str | None, overrides: Sequence[str]) -> SimConfig:
    """Resolve file values, then key=value overrides, then defaults.

    Raises:
        UsageError: missing or malformed file, unknown field, value that
            fails validation; messages name the offending field.
    """
    if path is None:
        cfg = SimConfig()
    else:
        try:
            cfg = SimConfig.from_toml_file(path)
        except OSError as exc:
            raise UsageError(f"cannot read config file {path!r}: {exc}") from None
        except ValueError as exc:
            raise UsageError(f"config file {path!r}: {exc}") from None

    updates = {}
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise UsageError(f"override {item!r} is not of the form key=value")
        updates[key] = _coerce(key, value)
    if updates:
        try:
            cfg = dataclasses.replace(cfg, **updates)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return cfg


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return "%.9g" % value
    return str(value)


def _emit_csv(out_path: str | None, header: Sequence[str], rows) -> None:
    rows = [[_format(v) for v in row] for row in rows]
    if out_path is None:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return
    try:
        with open(out_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise RuntimeError(f"cannot write {out_path!r}: {exc}") from None
    print(out_path)


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config, args.set)
    sys.stderr.write(cfg.to_toml())
    report = run_trial(cfg)
    _emit_csv(args.out, CSV_COLUMNS, [report.to_csv_row()])
    if report.failure is not None:
        sys.stderr.write(f"protocol failure: {report.failure}\n")
        return 2
    return 0


def _parse_axis(spec: str):
    name, sep, csv_values = spec.partition("=")
    if not sep or not name or not csv_values:
        raise UsageError(
            f"axis {spec!r} is not of the form name=v1,v2,...")
    values = [_coerce(name, v.strip()) for v in csv_values.split(",")]
    return name, values


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config, args.set)
    sys.stderr.write(cfg.to_toml())
    axis, values = _parse_axis(args.axis)
    try:
        reports = sweep(cfg, axis, values, workers=args.workers)
    except ValueError as exc:  # bad axis name or value, caught by the engine
        raise UsageError(str(exc)) from None
    header = [axis] + CSV_COLUMNS
    rows = [[v] + r.to_csv_row() for v, r in zip(values, reports)]
    _emit_csv(args.out, header, rows)
    return 0


def _cmd_analytic(args) -> int:
    cfg = load_config(args.config, args.set)
    sys.stderr.write(cfg.to_toml())
    if args.grid is not None:
        try:
            grid = [float(v) for v in args.grid.split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"grid {args.grid!r} must be comma-separated numbers") from None
        if not grid:
            raise UsageError("grid is empty")
    else:
        grid = None

    if args.curve == "qber_vs_clock":
        clocks = grid if grid is not None else list(_QBER_CURVE_CLOCKS)
        rows = []
        for clock in clocks:
            per_profile = {}
            for profile in ("standard", "enhanced"):
                # profile-specific widths must come from the named profile,
                # so explicit jitter overrides are cleared for this curve
                point = dataclasses.replace(
                    cfg, clock_ghz=clock, detector_profile=profile,
                    jitter_base_fwhm_ps=None, jitter_knee_cps=None,
                    jitter_slope_ps_per_mcps=None)
                per_profile[profile] = expected_link_budget(point).qber_total
            rows.append([clock, per_profile["standard"], per_profile["enhanced"],
                         per_profile["standard"] - per_profile["enhanced"]])
        _emit_csv(args.out, ["clock_ghz", "qber_standard", "qber_enhanced",
                             "improvement"], rows)
        return 0

    distances = grid if grid is not None else [
        i * _RATE_CURVE_KM_STEP
        for i in range(int(_RATE_CURVE_KM_MAX / _RATE_CURVE_KM_STEP) + 1)]
    rows = []
    for km in distances:
        budget = expected_link_budget(dataclasses.replace(cfg, distance_km=km))
        rows.append([km, budget.r_sift_cps, budget.r_net_cps])
    _emit_csv(args.out, ["distance_km", "r_sift_cps", "r_net_cps"], rows)
    return 0


def _cmd_histogram(args) -> int:
    cfg = load_config(args.config, args.set)
    sys.stderr.write(cfg.to_toml())
    report = run_trial(cfg)
    _emit_csv(args.out, ["bin_start_ps", "count"],
              report.timing_histogram.csv_rows())
    if report.timing_histogram.total() == 0:
        sys.stderr.write("protocol failure: no timed detection events\n")
        return 2
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="b92sim",
                     description="Simulate a clocked polarization-encoded "
                                 "fiber key-distribution link.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="FILE",
                       help="TOML file of config fields (defaults when omitted)")
        p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                       help="override one config field (repeatable)")
        p.add_argument("--out", metavar="FILE",
                       help="write CSV here and print the path; stdout when omitted")

    p = sub.add_parser("simulate", help="run one full trial, emit its report")
    common(p)
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("sweep", help="run one trial per axis value")
    common(p)
    p.add_argument("--axis", metavar="NAME=V1,V2,...", required=True,
                   help="config field to vary and its values")
    p.add_argument("--workers", type=int, default=1,
                   help="worker processes (results identical for any count)")
    p.set_defaults(handler=_cmd_sweep)

    p = sub.add_parser("analytic", help="emit a closed-form curve, no sampling")
    common(p)
    p.add_argument("--curve", required=True,
                   choices=("qber_vs_clock", "rate_vs_distance"))
    p.add_argument("--grid", metavar="V1,V2,...",
                   help="curve abscissa values (defaults per curve)")
    p.set_defaults(handler=_cmd_analytic)

    p = sub.add_parser("histogram", help="bin arrival-time residuals of one trial")
    common(p)
    p.set_defaults(handler=_cmd_histogram)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except (ValueError, RuntimeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
