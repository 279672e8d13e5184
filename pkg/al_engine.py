"""
Active Learning Engine - Main Entry Point
Config-driven pool-based active learning runs from the command line
"""

from dotenv import load_dotenv
load_dotenv()  # Load .env file

import argparse
import importlib
import logging
import os
import sys
from typing import List, Optional

from errors import ALEngineError
from ui.reports import ReportBuilder
from version import BUILD_TAG

COMMANDS = [
    'commands.run_command',
    'commands.rank_command',
    'commands.score_command',
    'commands.plot_command',
]


def configure_logging():
    level = os.getenv("AL_ENGINE_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    """Top-level parser with one subparser per command module"""
    parser = argparse.ArgumentParser(prog="al_engine",
                                     description="Pool-based active learning benchmark engine")
    parser.add_argument("--version", action="version", version=BUILD_TAG)
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    subparsers.required = True
    for name in COMMANDS:
        importlib.import_module(name).setup(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit status"""
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ALEngineError as e:
        print(ReportBuilder.error(str(e)), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
