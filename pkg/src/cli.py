#!/usr/bin/env python3

import argparse
import csv
import io
import json
import math
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from . import console
from .config import (
    load_config, set_config_value, get_config_value, list_config, wos_config_from
)
from .errors import HmlabError, InvalidParameter, ReportWriteError
from .experiments import (
    DEFAULT_CONFIDENCE,
    QUANTITIES,
    ExperimentReport,
    beurling_nevanlinna_check,
    counterexample_run,
    decomposition_check,
    estimate_run,
    koebe_sweep,
    markov_check,
    slit_validation,
    starlike_suite,
    stderr_of,
    value_of,
)
from .geometry import DomainSpec, parse_domain
from .wos import WosConfig

CSV_HEADER = [
    "R", "omega_hat", "omega_hat_stderr", "omega", "omega_stderr",
    "ratio", "ratio_lo", "ratio_hi", "ambiguous_frac", "timeout_frac", "seed",
]

DEFAULT_STARLIKE_SUITE = [
    ("koebe", [1.0, 10.0]),
    ("slit-disk:a=0.5", [0.75, 0.9]),
    ("star:k=4,rin=1,rout=3", [2.0, 2.5]),
    ("star:k=6,rin=1,rout=4", [2.0, 3.5]),
]

DEFAULT_DECOMPOSITION_CASES = [
    ("slit-disk:a=0.5", [0.75]),
    ("star:k=4,rin=1,rout=3", [2.0]),
]

DEFAULT_SLIT_GRID = [(a, b) for a in (0.25, 0.5, 0.75) for b in (0.0, 0.25, 0.5)]

DEFAULT_BN_VALUES = [1.0 / 3.0, 0.5]


class UsageError(Exception):
    """Bad command line; reported with exit code 2."""


class HmlabArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of printing usage and exiting."""

    def error(self, message: str):
        raise UsageError(message)


def _number(text: str) -> float:
    """Parse a float, also accepting simple fractions such as 1/3."""
    try:
        if "/" in text:
            numerator, denominator = text.split("/", 1)
            return float(numerator) / float(denominator)
        return float(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: '{text}'")


def number_list(text: str) -> List[float]:
    values = [_number(item.strip()) for item in text.split(",") if item.strip()]
    if not values:
        raise argparse.ArgumentTypeError("expected a comma-separated list of numbers")
    return values


def int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got '{text}'")


def grid_list(text: str) -> List[Tuple[float, float]]:
    cells = []
    for item in text.split(","):
        a, sep, b = item.partition(":")
        if not sep:
            raise argparse.ArgumentTypeError(f"grid cells look like a:b, got '{item}'")
        cells.append((_number(a), _number(b)))
    return cells


def _add_sampling_options(subparser: argparse.ArgumentParser) -> None:
    subparser.add_argument("--samples", type=int, help="Number of walks per estimate")
    subparser.add_argument("--eps", type=float, help="Absorption shell, relative to the target radius")
    subparser.add_argument("--seed", type=int, help="Seed of the counter-based random streams")
    subparser.add_argument("--threads", type=int, help="Worker processes (never changes results)")
    subparser.add_argument("--batch", type=int, help="Walks per work unit")
    subparser.add_argument("--max-steps", type=int, help="Step cap per walk")
    subparser.add_argument("--confidence", type=float, help="Confidence level of ratio intervals")
    subparser.add_argument("--out", choices=["csv", "json"], help="Report format")
    subparser.add_argument("--out-path", help="Report file (default: stdout)")
    subparser.add_argument("--quiet", action="store_true", help="Suppress progress and the summary table")
    subparser.add_argument("--no-color", action="store_true", help="Disable colored output")


def parse_args(args: Sequence[str]) -> argparse.Namespace:
    """Parse command line arguments."""
    parser = HmlabArgumentParser(
        description="Harmonic measures of planar domains by walk-on-spheres",
        prog="hmlab",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=HmlabArgumentParser)

    estimate_parser = subparsers.add_parser("estimate", help="Estimate omega and/or omega_hat on one domain")
    sweep_parser = subparsers.add_parser("sweep", help="Sweep R on one domain (closed forms for koebe)")
    for subparser in (estimate_parser, sweep_parser):
        subparser.add_argument("--domain", action="append", required=True,
                               help="Domain, e.g. koebe, slit-disk:a=0.5, ce1:levels=3")
        subparser.add_argument("--R", action="append", type=number_list, required=True,
                               help="Comma-separated radii")
        subparser.add_argument("--exact", action="store_true",
                               help="Closed forms only, no simulation (koebe)")
    estimate_parser.add_argument("--quantity", choices=QUANTITIES, default="both")

    counter_parser = subparsers.add_parser("counterexample", help="Ratio growth on the sector counter-examples")
    counter_parser.add_argument("--which", type=int, choices=[1, 2], required=True)
    counter_parser.add_argument("--ns", type=int_list, default=[1, 2], help="Levels to run, subset of 1,2")
    counter_parser.add_argument("--t", type=float, help="log(r_n) - n for the arcsinh diagnostic (which=1)")

    starlike_parser = subparsers.add_parser("starlike", help="omega_hat <= 2 omega on starlike domains")
    decompose_parser = subparsers.add_parser("decompose", help="Coupled split of walks at |z| = R")
    for subparser in (starlike_parser, decompose_parser):
        subparser.add_argument("--domain", action="append", help="Starlike domain (repeatable)")
        subparser.add_argument("--R", action="append", type=number_list,
                               help="Comma-separated radii, one --R per --domain")

    validate_parser = subparsers.add_parser("validate", help="Slit-disk closed form against simulation")
    validate_parser.add_argument("--grid", type=grid_list, default=DEFAULT_SLIT_GRID,
                                 help="Cells a:b separated by commas")

    markov_parser = subparsers.add_parser("markov", help="Strong Markov identity on nested disks")

    bn_parser = subparsers.add_parser("bn", help="Beurling-Nevanlinna bound on slit disks")
    bn_parser.add_argument("--a", type=number_list, default=DEFAULT_BN_VALUES, help="Slit starts, e.g. 1/3,0.5")

    for subparser in (estimate_parser, sweep_parser, counter_parser, starlike_parser,
                      decompose_parser, validate_parser, markov_parser, bn_parser):
        _add_sampling_options(subparser)

    config_parser = subparsers.add_parser("config", help="Show or change defaults in .hmlabrc")
    config_subparsers = config_parser.add_subparsers(dest="config_command", required=True,
                                                     parser_class=HmlabArgumentParser)
    config_set_parser = config_subparsers.add_parser("set", help="Set a configuration value")
    config_set_parser.add_argument("section", help="Configuration section (sampling, output)")
    config_set_parser.add_argument("key", help="Configuration key")
    config_set_parser.add_argument("value", help="Configuration value")
    config_get_parser = config_subparsers.add_parser("get", help="Get a configuration value")
    config_get_parser.add_argument("section", help="Configuration section (sampling, output)")
    config_get_parser.add_argument("key", help="Configuration key")
    config_subparsers.add_parser("list", help="List all configuration values")

    return parser.parse_args(list(args))


def validate_args(args: argparse.Namespace) -> None:
    """Cross-argument checks argparse cannot express."""
    if args.command in ("estimate", "sweep"):
        if len(args.domain) != 1 or len(args.R) != 1:
            raise UsageError(f"{args.command} takes exactly one --domain and one --R list")
    if args.command in ("starlike", "decompose"):
        domains, radii = args.domain or [], args.R or []
        if len(domains) != len(radii):
            raise UsageError("give one --R list for every --domain")
    if args.command == "counterexample" and args.t is not None and args.which != 1:
        raise UsageError("--t only applies to --which 1")


def handle_config_command(args: argparse.Namespace) -> int:
    """Handle the config command and its subcommands."""
    if args.config_command == "set":
        success, message = set_config_value(args.section, args.key, args.value)
        if not success:
            console.error(message)
            return 1
        print(message)

    elif args.config_command == "get":
        value, message = get_config_value(args.section, args.key)
        if value is None:
            console.error(message)
            return 1
        print(message)

    elif args.config_command == "list":
        config = list_config()
        print("Current configuration:")
        for section, values in config.items():
            print(f"\n[{section}]")
            for key, value in values.items():
                print(f"{key} = {value}")
    return 0


def _cases(args: argparse.Namespace, defaults) -> List[Tuple[DomainSpec, List[float]]]:
    if args.domain:
        pairs = list(zip(args.domain, args.R))
    else:
        pairs = defaults
    return [(parse_domain(name), list(Rs)) for name, Rs in pairs]


def _single_domain(args: argparse.Namespace) -> Tuple[DomainSpec, List[float]]:
    return parse_domain(args.domain[0]), list(args.R[0])


def _run_estimate(args, cfg: WosConfig, confidence: float) -> ExperimentReport:
    domain, Rs = _single_domain(args)
    if args.exact:
        if domain.name != "koebe":
            raise InvalidParameter(f"No closed form for {domain.name}; drop --exact")
        return koebe_sweep(Rs, None, confidence)
    return estimate_run(domain, Rs, args.quantity, cfg, confidence)


def _run_sweep(args, cfg: WosConfig, confidence: float) -> ExperimentReport:
    domain, Rs = _single_domain(args)
    if domain.name == "koebe":
        return koebe_sweep(Rs, None if args.exact else cfg, confidence)
    if args.exact:
        raise InvalidParameter(f"No closed form for {domain.name}; drop --exact")
    return estimate_run(domain, Rs, "both", cfg, confidence)


COMMANDS: Dict[str, Callable[[argparse.Namespace, WosConfig, float], ExperimentReport]] = {
    "estimate": _run_estimate,
    "sweep": _run_sweep,
    "counterexample": lambda args, cfg, conf: counterexample_run(
        args.which, args.ns, cfg, t=args.t, confidence=conf),
    "starlike": lambda args, cfg, conf: starlike_suite(
        _cases(args, DEFAULT_STARLIKE_SUITE), cfg, conf),
    "decompose": lambda args, cfg, conf: decomposition_check(
        _cases(args, DEFAULT_DECOMPOSITION_CASES), cfg, conf),
    "validate": lambda args, cfg, conf: slit_validation(args.grid, cfg, conf),
    "markov": lambda args, cfg, conf: markov_check(cfg),
    "bn": lambda args, cfg, conf: beurling_nevanlinna_check(args.a, cfg),
}


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return ""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.9g}"


def _rounded(value: Any) -> Any:
    """Round floats to 9 significant digits so a JSON round trip is exact."""
    if isinstance(value, (bool, str)) or value is None:
        return value
    if isinstance(value, float):
        # strict JSON has no Infinity or NaN
        return _fmt(value) if not math.isfinite(value) else float(f"{value:.9g}")
    if isinstance(value, int):
        return value
    if isinstance(value, dict):
        return {key: _rounded(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_rounded(item) for item in value]
    try:
        return _rounded(float(value))
    except (TypeError, ValueError):
        return str(value)


def _row_fields(row) -> Dict[str, Any]:
    hat, omega = row.omega_hat, row.omega
    return {
        "R": row.R,
        "omega_hat": value_of(hat),
        "omega_hat_stderr": stderr_of(hat) if hat is not None else None,
        "omega": value_of(omega),
        "omega_stderr": stderr_of(omega) if omega is not None else None,
        "ratio": row.ratio,
        "ratio_lo": row.ratio_lo,
        "ratio_hi": row.ratio_hi,
        "ambiguous_frac": row.ambiguous_frac,
        "timeout_frac": row.timeout_frac,
        "seed": row.seed,
    }


def render_csv(report: ExperimentReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in report.rows:
        fields = _row_fields(row)
        seed = fields.pop("seed")
        writer.writerow([_fmt(fields[name]) for name in CSV_HEADER[:-1]] + ["" if seed is None else str(seed)])
    return buffer.getvalue()


def render_json(report: ExperimentReport) -> str:
    document = {
        "scenario": report.scenario,
        "config": _rounded(report.config),
        "checks": report.checks,
        "passed": report.passed,
        "summary": _rounded(report.summary),
        "notes": report.notes,
        "rows": [
            {"label": row.label, **_rounded(_row_fields(row)), "diagnostics": _rounded(row.diagnostics)}
            for row in report.rows
        ],
    }
    return json.dumps(document, indent=2, allow_nan=False) + "\n"


def write_report(report: ExperimentReport, fmt: str, path: Optional[str] = None) -> None:
    """Write the report as csv or json to path, or to stdout for None / "-"."""
    if fmt not in ("csv", "json"):
        raise InvalidParameter(f"Unknown report format '{fmt}'")
    text = render_csv(report) if fmt == "csv" else render_json(report)
    if path is None or path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as e:
        raise ReportWriteError(f"Could not write report to {path}: {e}")


def parse_and_dispatch(argv: Sequence[str]) -> int:
    """Run one command; returns the process exit code."""
    try:
        args = parse_args(argv)
        validate_args(args)
    except UsageError as e:
        console.error(str(e))
        return 2
    except SystemExit as e:  # --help
        return int(e.code or 0)

    if args.command == "config":
        return handle_config_command(args)

    config = load_config()
    console.set_quiet(args.quiet)
    console.set_color(bool(config["output"].get("use_color", True)) and not args.no_color)

    try:
        cfg = wos_config_from(
            config,
            samples=args.samples,
            eps=args.eps,
            seed=args.seed,
            workers=args.threads,
            batch=args.batch,
            max_steps=args.max_steps,
        )
        confidence = args.confidence or float(config["output"].get("confidence", DEFAULT_CONFIDENCE))
        report = COMMANDS[args.command](args, cfg, confidence)
        write_report(report, args.out or str(config["output"].get("format", "csv")), args.out_path)
        console.render_summary(report)
    except HmlabError as e:
        console.error(str(e))
        return e.exit_code

    if not report.passed:
        failed = [name for name, ok in report.checks.items() if not ok]
        console.error(f"{len(failed)} check(s) failed: {', '.join(failed)}")
        return 3
    return 0


def main() -> None:
    """Main entry point for the CLI."""
    sys.exit(parse_and_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
