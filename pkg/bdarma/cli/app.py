"""bdarma command-line application.

Builds the argument parser from the subcommand modules and maps the
package's exceptions to exit codes:

    0  success (possibly with warnings)
    2  usage or configuration error
    3  data error (unreadable CSV, non-positive shares, ...)
    4  numerical failure after retries
"""

import argparse
import logging
import sys
from typing import List, Optional

from bdarma import __version__, logging_config
from bdarma.cli.commands import COMMANDS
from bdarma.cli.options import common_parent
from bdarma.exceptions import (
    BdarmaError,
    ConfigError,
    DataError,
    DomainError,
    FitFailedError,
    NonFiniteError,
    UsageError,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def create_parser() -> argparse.ArgumentParser:
    """Create the top-level parser with one subparser per command."""
    parser = argparse.ArgumentParser(
        prog="bdarma",
        description="Bayesian Dirichlet ARMA models for compositional time series",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    parent = common_parent()
    for command in COMMANDS:
        command.register(subparsers, parent)
    return parser


def exit_code(exc: BdarmaError) -> int:
    if isinstance(exc, (ConfigError, UsageError)):
        return EXIT_USAGE
    if isinstance(exc, (DataError, DomainError)):
        return EXIT_DATA
    if isinstance(exc, (FitFailedError, NonFiniteError)):
        return EXIT_NUMERICAL
    return EXIT_USAGE


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point of the ``bdarma`` console script."""
    parser = create_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        logging_config.enable_debug()
    elif args.quiet:
        logging_config.disable_logging()

    try:
        return args.handler(args)
    except BdarmaError as exc:
        logger.debug("Command failed", exc_info=True)
        print(f"bdarma {args.command}: error: {exc}", file=sys.stderr)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
