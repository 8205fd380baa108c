"""
Command-line entry point.

This module builds the ``chi2map`` argument parser, includes the subcommands
of every command module, and maps library errors to exit codes.
"""

import argparse
import logging
import sys
from typing import Optional, Sequence

from chi2map import __version__
from chi2map.config import get_settings
from chi2map.exceptions import Chi2MapError
from chi2map.logging_config import configure_logging
from chi2map.commands import bench_commands, feature_commands, learning_commands
from chi2map.commands.common import common_options

logger = logging.getLogger(__name__)

IO_EXIT_CODE = 3


def build_parser() -> argparse.ArgumentParser:
    """
    Build the top-level parser with all subcommands.

    Returns:
        argparse.ArgumentParser: Parser whose subcommands set ``handler``
    """
    settings = get_settings()
    parser = argparse.ArgumentParser(
        prog="chi2map",
        description="Explicit chi2 / exp-chi2 feature maps with out-of-core PCA and ridge regression.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    parent = common_options(settings)

    # Include command modules
    feature_commands.register(sub, parent, settings)
    learning_commands.register(sub, parent, settings)
    bench_commands.register(sub, parent, settings)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand.

    Args:
        argv: Arguments without the program name; ``sys.argv[1:]`` if omitted

    Returns:
        int: 0 on success, 2 validation error, 3 I/O error, 4 numerical failure
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except Chi2MapError as error:
        logger.error("%s: %s", type(error).__name__, error)
        return error.exit_code
    except OSError as error:
        logger.error("I/O error: %s", error)
        return IO_EXIT_CODE


if __name__ == "__main__":
    sys.exit(main())
