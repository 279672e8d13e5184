"""
Run Command - Execute an experiment config or suite and persist the results
"""

import sys
from pathlib import Path

from experiment_config import parse_suite
from runner import run_suite
from ui.plots import emit_budget_svg
from ui.reports import ReportBuilder


def handle(args) -> int:
    configs = parse_suite(args.config)
    progress = not args.quiet and sys.stderr.isatty()
    suite = run_suite(configs, output_dir=args.output_dir, threads=args.threads,
                      seed=args.seed, progress=progress)

    for description in suite.datasets.values():
        print(ReportBuilder.dataset_summary(description))
    for dataset, accuracy in suite.full_accuracy.items():
        print(ReportBuilder.full_reference(dataset, accuracy))
    for name, summary in suite.summaries.items():
        print(ReportBuilder.config_summary(name, summary))

    if args.plot and suite.results:
        curves = {name: [r.curve for r in results] for name, results in suite.results.items()}
        path = emit_budget_svg(curves, Path(suite.table_path).parent / "budget_curves.svg",
                               references=suite.full_accuracy)
        print(f"{ReportBuilder.STATS} Plot written to {path}")

    print(ReportBuilder.suite_done(len(suite.summaries), len(suite.failures), suite.table_paths))
    return 0 if suite.ok else 1


def setup(subparsers):
    """Register the `run` subcommand"""
    parser = subparsers.add_parser("run", help="run an experiment config or suite file")
    parser.add_argument("config", help="experiment config JSON or suite JSON {\"configs\": [...]}")
    parser.add_argument("--seed", type=int, default=None, help="override base_seed of every config")
    parser.add_argument("--output-dir", default=None, help="override output_dir of every config")
    parser.add_argument("--threads", type=int, default=None,
                        help="trial workers (default: AL_ENGINE_THREADS or 1; AL_ENGINE_THREADS caps it)")
    parser.add_argument("--plot", action="store_true", help="also write budget_curves.svg")
    parser.add_argument("--quiet", action="store_true", help="no progress bar")
    parser.set_defaults(handler=handle)
