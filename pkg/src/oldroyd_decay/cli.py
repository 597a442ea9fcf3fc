"""Command line: ``oldb run | fit | check``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .experiment import EXIT_FAILED_CHECK, EXIT_OK, ExperimentConfig, load_config, run_experiment

log = logging.getLogger("oldroyd_decay")


def _config(args) -> ExperimentConfig:
    overrides = {"seed": args.seed}
    if args.config:
        return load_config(args.config, **overrides)
    return ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def cmd_run(args) -> int:
    config = _config(args)
    out = Path(args.output or config.output_dir)
    result = run_experiment(config, out, timestamp=not args.no_header_timestamp)
    if result.message:
        print(result.message)
    print(f"{config.experiment}: {len(result.records)} records -> {out / 'series.ndjson'} "
          f"(exit {result.exit_status})")
    if result.violations:
        print(f"{len(result.violations)} steps failed validation; first at t={result.violations[0][0]:g}")
        return EXIT_FAILED_CHECK
    return result.exit_status


def cmd_fit(args) -> int:
    from .report import format_rows, report

    run_dir = Path(args.output or (args.run_dir or "out"))
    window = None
    if args.t_lo is not None or args.t_hi is not None:
        if args.t_lo is None or args.t_hi is None:
            print("--t-lo and --t-hi must be given together", file=sys.stderr)
            return 2
        window = (args.t_lo, args.t_hi)
    rows, figures = report(run_dir, window)
    print(format_rows(rows))
    print(f"wrote {run_dir / 'fits.csv'}; figures: {', '.join(str(f) for f in figures)}")
    return EXIT_OK


def cmd_check(args) -> int:
    from .checks import run_checks

    results = run_checks(quick=not args.full)
    lines = [str(r) for r in results]
    print("\n".join(lines))
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / "check_report.txt").write_text("\n".join(lines) + "\n")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED_CHECK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value file with ExperimentConfig fields")
    common.add_argument("--output", metavar="DIR", help="output (run) or input (fit) directory")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--no-header-timestamp", action="store_true",
                        help="omit the timestamp from the NDJSON header (byte-reproducible output)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="oldb", description="Oldroyd-B fractional-diffusion decay harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run one experiment")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("fit", parents=[common], help="fit decay exponents of a finished run")
    p.add_argument("run_dir", nargs="?", help="run directory (default: --output or ./out)")
    p.add_argument("--t-lo", type=float, help="fit window start (default: config window)")
    p.add_argument("--t-hi", type=float, help="fit window end")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("check", parents=[common], help="run the acceptance checks")
    p.add_argument("--full", action="store_true",
                   help="full-length runs including the torus decay study (minutes)")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
