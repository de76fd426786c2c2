"""Command line entry point: ``servoland run | mc | plot``.

Exit codes: 0 success, 2 configuration error, 3 simulation invariant violation.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config
from .harness import (
    SimulationInvariantError,
    emit_outputs,
    run_monte_carlo,
    run_scenario,
    write_summary,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3


def _config(path) -> ExperimentConfig:
    return ExperimentConfig() if path is None else load_config(path)


def _cmd_run(args) -> int:
    cfg = _config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    record = run_scenario(cfg, seed)
    emit_outputs([record], args.out, plots=not args.no_plots)
    s = record.summary
    print(f"seed {s.seed}: {s.result}", end="")
    if s.detection_to_touchdown is not None:
        print(f", detection-to-touchdown {s.detection_to_touchdown:.2f} s", end="")
    print(f"\noutputs in {args.out}")
    return EXIT_OK


def _cmd_mc(args) -> int:
    cfg = _config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    report = run_monte_carlo(cfg, args.runs, workers=args.workers)
    print("\n".join(report.lines()))
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_summary(report.summaries, out / "summary.csv")
    return EXIT_OK


def _cmd_plot(args) -> int:
    from .plots import plot_trace

    for path in plot_trace(args.trace, args.out):
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="servoland", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one landing and write trace, summary and plots")
    run.add_argument("--config", help="TOML experiment file (defaults when omitted)")
    run.add_argument("--seed", type=int, help="overrides the config seed")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--no-plots", action="store_true", help="skip the PNG figures")
    run.set_defaults(func=_cmd_run)

    mc = sub.add_parser("mc", help="Monte Carlo batch over consecutive seeds")
    mc.add_argument("--runs", type=int, help="number of runs (default: config n_runs)")
    mc.add_argument("--config", help="TOML experiment file (defaults when omitted)")
    mc.add_argument("--seed", type=int, help="first seed (default: config seed)")
    mc.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    mc.add_argument("--out", help="directory for summary.csv")
    mc.set_defaults(func=_cmd_mc)

    plot = sub.add_parser("plot", help="render the standard figures for a trace CSV")
    plot.add_argument("--trace", required=True, help="trace CSV written by 'run'")
    plot.add_argument("--out", help="output directory (default: next to the trace)")
    plot.set_defaults(func=_cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if getattr(args, "runs", None) is not None and args.runs < 1:
        print("error: --runs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationInvariantError as exc:
        print(f"simulation invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
