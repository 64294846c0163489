"""Command-line front end: ``gbmfeynman {simulate, verify, feynman}``.

Exit codes: 0 success / all checks passed, 1 check or runtime failure,
2 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import SUITES, load_config
from .core import SamplePath
from .errors import ConfigError
from .fresnel import class_report, feynman_integral
from .reports import report_json, run_suites
from .simulator import increments_for_streams, series_increments_for_streams, write_path_csv

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("thread count must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gbmfeynman", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="config file path or bundled preset name")
        p.add_argument("--seed-override", type=_u64, default=None, help="replace the config seed")
        p.add_argument("--threads", type=_positive, default=1, help="Monte Carlo worker threads")

    p = sub.add_parser("simulate", help="write sample paths as CSV files")
    common(p)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("verify", help="run verification suites and write a JSON report")
    common(p)
    p.add_argument("--out", default=None, help="report path (stdout if omitted)")
    p.add_argument("--suite", choices=SUITES + ("all",), default="all")

    p = sub.add_parser("feynman", help="print the Feynman integral and class bounds")
    common(p)
    return parser


def cmd_simulate(args) -> int:
    exp = load_config(args.config, args.seed_override, min_N=1)
    cfg = exp.config
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    streams = np.arange(cfg["N"])
    if cfg["simulator"]["kind"] == "series":
        dx = series_increments_for_streams(exp.pair, exp.grid, cfg["seed"], streams, cfg["simulator"]["M"])
    else:
        dx = increments_for_streams(exp.pair, exp.grid, cfg["seed"], streams)
    width = max(5, len(str(cfg["N"] - 1)))
    for i, row in enumerate(dx):
        path = SamplePath(exp.grid, np.concatenate(([0.0], np.cumsum(row))))
        write_path_csv(path, out / f"path_{i:0{width}d}.csv")
    print(f"wrote {cfg['N']} paths to {out}")
    return EXIT_PASS


def cmd_verify(args) -> int:
    exp = load_config(args.config, args.seed_override)
    suites = list(SUITES) if args.suite == "all" else [args.suite]
    report = run_suites(exp, suites, workers=args.threads)
    text = report_json(report)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    for check in report.checks:
        print(f"{'PASS' if check.passed else 'FAIL'}  {check.name}", file=sys.stderr)
    return EXIT_PASS if report.overall_pass else EXIT_FAIL


def format_complex(z: complex) -> str:
    sign = "-" if z.imag < 0 else "+"
    return f"{z.real:.12f} {sign} {abs(z.imag):.12f}i"


def cmd_feynman(args) -> int:
    exp = load_config(args.config, args.seed_override)
    value = feynman_integral(exp.measure, exp.ops, exp.params, exp.pair, exp.grid)
    bounds = class_report(exp.measure, exp.q0, exp.ops, exp.pair, exp.grid)
    print(format_complex(value))
    print(f"q0 = {exp.q0:.12g}")
    print(f"F_bound = {bounds['F_bound']:.12g}")
    print(f"G_bound = {bounds['G_bound']:.12g}")
    return EXIT_PASS


COMMANDS = {"simulate": cmd_simulate, "verify": cmd_verify, "feynman": cmd_feynman}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any runtime failure maps to exit 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
