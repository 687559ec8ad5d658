"""Command-line entry point.

Verbs select the pipeline depth:

    derive     symbolic motion equations and flux factors only
    simulate   derive + evolve the field, report stationarity
    verify     simulate + all balance/invariance checks at the base grid
    all        verify + convergence study over the refinement levels
    report     like `all`, and additionally dumps per-site residual grids

Exit code is 0 iff every executed check passed (skipped checks never count
as passed).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .config import ConfigError, load_config
from .pipeline import run_experiment
from .report import FAIL, emit_report

_VERBS = ("derive", "simulate", "verify", "all", "report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noetherlab",
        description="Derive, evolve, and verify nonlocal conservation-flux balance for a complex scalar field.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in _VERBS:
        p = sub.add_parser(verb, help=f"run the {verb} pipeline")
        p.add_argument("--config", required=True, help="path to the TOML experiment config")
        p.add_argument(
            "--refine",
            type=int,
            nargs="+",
            metavar="N",
            help="override the refinement levels (strictly increasing grid sizes)",
        )
        p.add_argument(
            "--format",
            choices=("json", "csv", "both"),
            help="override the output formats",
        )
        p.add_argument("--output", help="override the output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    if args.verb == "report":
        cfg.run = "all"
        cfg.output = replace(cfg.output, dump_fields=True)
    else:
        cfg.run = args.verb
    if args.refine:
        if not all(a < b for a, b in zip(args.refine, args.refine[1:])):
            print("error: --refine levels must be strictly increasing", file=sys.stderr)
            return 2
        cfg.refinement = tuple(args.refine)
    if args.format:
        formats = ("json", "csv") if args.format == "both" else (args.format,)
        cfg.output = replace(cfg.output, formats=formats)
    if args.output:
        cfg.output = replace(cfg.output, directory=args.output)
    cfg.echo["pipeline"]["run"] = cfg.run
    cfg.echo["pipeline"]["refinement"] = list(cfg.refinement)
    cfg.echo["output"] = {
        "directory": cfg.output.directory,
        "formats": list(cfg.output.formats),
        "dump_fields": cfg.output.dump_fields,
    }

    report = run_experiment(cfg, config_path=str(args.config))
    written = emit_report(report, cfg.output.directory, cfg.output.formats)

    for check in report.checks:
        value = "" if check.value is None else f" value={check.value:.6g}"
        print(f"[{check.status.upper():>7}] {check.name}{value}")
    for table in report.tables:
        order = "n/a" if table.fitted_order is None else f"{table.fitted_order:.3f}"
        print(f"[{table.status.upper():>7}] convergence:{table.name} fitted_order={order}")
    for path in written:
        print(f"wrote {path}")

    failed = [c.name for c in report.checks if c.status == FAIL]
    failed += [f"convergence:{t.name}" for t in report.tables if t.status == FAIL]
    if failed:
        print(f"FAILED: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
