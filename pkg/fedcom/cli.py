"""
Command-line interface for the FedCom simulator.
"""

import argparse
import logging
import os
import sys
from typing import Dict, List, Optional, Sequence

from fedcom.config import load_config, with_overrides
from fedcom.errors import ConfigError
from fedcom.graph import run
from fedcom.graph_state import RunReport
from fedcom.nodes.output_generator import SWEEP_FILE, emit_sweep_csv

DEFAULT_OUTPUT_DIR = "fedcom-output"

EXIT_OK = 0
EXIT_RUNTIME_ERROR = 1
EXIT_CONFIG_ERROR = 2

logger = logging.getLogger(__name__)


def _print_report(report: RunReport, output_dir: str) -> None:
    final = report.records[-1]
    print("\nRun completed successfully.")
    print(f"  Rule: {report.config.rule.value}, attack: {report.config.attack.kind.value}")
    print(f"  Byzantine workers: {report.byzantine_workers}")
    print(f"  Final benign accuracy: {final.benign_accuracy:.4f}")
    if final.poison_accuracy is not None:
        print(f"  Final poisoned-eval accuracy: {final.poison_accuracy:.4f}")
    print(f"  Outputs written to {output_dir}")


def parse_fractions(text: str) -> List[float]:
    """Parse a comma-separated list of Byzantine fractions."""
    try:
        fractions = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigError(f"invalid --fractions '{text}': {e}") from e
    if not fractions:
        raise ConfigError("--fractions needs at least one value")
    return fractions


def run_command(args) -> int:
    """Run one simulation from a config file."""
    overrides: Dict[str, object] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out:
        overrides["output_dir"] = args.out
    if args.dump_commitments:
        overrides["dump_commitments"] = True

    cfg = load_config(args.config, overrides)
    if not cfg.output_dir:
        cfg = with_overrides(cfg, {"output_dir": DEFAULT_OUTPUT_DIR})

    report = run(cfg)
    _print_report(report, cfg.output_dir)
    return EXIT_OK


def sweep_command(args) -> int:
    """Run the same config once per Byzantine fraction."""
    fractions = parse_fractions(args.fractions)
    overrides: Dict[str, object] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    base = load_config(args.config, overrides)
    root = args.out or base.output_dir or DEFAULT_OUTPUT_DIR

    configs = []
    for fraction in fractions:
        directory = os.path.join(root, f"fraction_{fraction:.2f}")
        configs.append(
            with_overrides(base, {"attack.byzantine_fraction": fraction, "output_dir": directory})
        )

    reports = []
    for fraction, cfg in zip(fractions, configs):
        logger.info(f"Sweep: running fraction {fraction:.2f} ({cfg.byzantine_count} Byzantine workers)")
        reports.append(run(cfg))

    sweep_path = os.path.join(root, SWEEP_FILE)
    emit_sweep_csv(fractions, reports, sweep_path)

    print("\nSweep completed successfully.")
    for fraction, report in zip(fractions, reports):
        print(f"  fraction {fraction:.2f}: final benign accuracy {report.records[-1].benign_accuracy:.4f}")
    print(f"  Summary written to {sweep_path}")
    return EXIT_OK


def oracle_command(args) -> int:
    """Cross-check Wasserstein and Krum against brute-force oracles."""
    from fedcom.oracles import run_oracle_suites

    results = run_oracle_suites(seed=args.seed or 0)
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        print(
            f"{status} {result.name}: {result.trials - result.failures}/{result.trials} trials agree "
            f"(max error {result.max_error:.2e}, {result.seconds:.2f}s)"
        )
    if all(result.passed for result in results):
        return EXIT_OK
    print("Oracle check failed.", file=sys.stderr)
    return EXIT_RUNTIME_ERROR


def _labelled_paths(items: Sequence[str]) -> Dict[str, str]:
    paths = {}
    for item in items:
        label, sep, path = item.partition("=")
        if not sep:
            label, path = os.path.basename(os.path.dirname(os.path.abspath(item))) or item, item
        paths[label] = path
    return paths


def plot_command(args) -> int:
    """Render accuracy plots from finished runs."""
    from fedcom.plotting import plot_round_curves, plot_sweep

    if args.sweep:
        path = plot_sweep(_labelled_paths(args.sweep), args.output)
    else:
        path = plot_round_curves(_labelled_paths(args.metrics), args.output)
    print(f"Saved plot to {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="FedCom - Byzantine-robust federated learning simulator",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable debug logging")

    subparsers = parser.add_subparsers(dest="command", help="Command to run", required=True)

    run_parser = subparsers.add_parser("run", help="Run one simulation")
    run_parser.add_argument("--config", "-c", required=True, help="Path to key-value config file")
    run_parser.add_argument("--seed", type=int, help="Override the config seed")
    run_parser.add_argument("--out", "-o", help="Output directory for metrics.csv and summary.json")
    run_parser.add_argument(
        "--dump-commitments",
        action="store_true",
        help="Also write commitments/worker_<i>.csv for every worker",
    )

    sweep_parser = subparsers.add_parser("sweep", help="Run once per Byzantine fraction")
    sweep_parser.add_argument("--config", "-c", required=True, help="Path to key-value config file")
    sweep_parser.add_argument("--fractions", required=True, help="Comma-separated fractions, e.g. 0,0.1,0.2,0.3,0.4")
    sweep_parser.add_argument("--seed", type=int, help="Override the config seed")
    sweep_parser.add_argument("--out", "-o", help="Root directory for the per-fraction outputs")

    oracle_parser = subparsers.add_parser("oracle-check", help="Run the brute-force oracle suites")
    oracle_parser.add_argument("--seed", type=int, help="Seed of the random trial instances")

    plot_parser = subparsers.add_parser("plot", help="Plot accuracy curves from finished runs")
    sources = plot_parser.add_mutually_exclusive_group(required=True)
    sources.add_argument("--metrics", nargs="+", help="metrics.csv files, optionally as LABEL=PATH")
    sources.add_argument("--sweep", nargs="+", help="sweep.csv files, optionally as LABEL=PATH")
    plot_parser.add_argument("--output", "-o", required=True, help="Image file to write")

    for sub in (run_parser, sweep_parser, oracle_parser, plot_parser):
        sub.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS, help="Enable debug logging")

    return parser


COMMANDS = {
    "run": run_command,
    "sweep": sweep_command,
    "oracle-check": oracle_command,
    "plot": plot_command,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the CLI; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    logger.info(f"FedCom CLI started: {args.command}")

    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except Exception as e:
        print(f"Error running {args.command}: {e}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
