"""
Shared helpers for the command modules.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

from chi2map.config import Settings
from chi2map.exceptions import ParseError
from chi2map.models.histogram import ChunkSpec, MatrixFormat
from chi2map.schemas.bench_schema import BenchReport
from chi2map.services.histio_service import HistIOService

logger = logging.getLogger(__name__)


def common_options(settings: Settings) -> argparse.ArgumentParser:
    """
    Build the parent parser with the options every subcommand accepts.

    Defaults come from the settings, so ``CHI2MAP_*`` variables apply unless
    a flag is given.
    """
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--format", choices=[f.value for f in MatrixFormat], default=None,
                        help="Matrix file format (default: by extension, .csv/.txt or binary)")
    parent.add_argument("--chunk-rows", type=int, default=settings.CHUNK_ROWS,
                        help="Rows per streamed chunk (default: %(default)s)")
    parent.add_argument("--bins", type=int, default=settings.BINS,
                        help="Log-spaced bins for parameter fitting (default: %(default)s)")
    parent.add_argument("--strict-l1", action="store_true",
                        help="Warn about input rows that do not sum to 1")
    parent.add_argument("--threads", type=int, default=settings.THREADS,
                        help="Worker threads (default: %(default)s)")
    parent.add_argument("--log-level", default=settings.LOG_LEVEL,
                        help="Logging level (default: %(default)s)")
    parent.set_defaults(l1_tolerance=settings.L1_TOLERANCE)
    return parent


def parse_int_list(text: str) -> list[int]:
    """
    Parse ``1..10`` or ``1000,3000,7000`` (or a mix) into integers.

    Raises:
        ParseError: If an item is not an integer or range
    """
    values: list[int] = []
    for item in text.split(","):
        item = item.strip()
        try:
            if ".." in item:
                lo, hi = item.split("..", 1)
                values.extend(range(int(lo), int(hi) + 1))
            elif item:
                values.append(int(item))
        except ValueError:
            raise ParseError(f"cannot parse {item!r} as an integer or range") from None
    if not values:
        raise ParseError(f"empty integer list {text!r}")
    return values


def parse_name_list(text: str) -> list[str]:
    """Split a comma-separated list of names."""
    return [item.strip() for item in text.split(",") if item.strip()]


def open_matrix(args: argparse.Namespace, path: str) -> ChunkSpec:
    """
    Build the chunk spec of an input matrix, checking L1 rows if asked.

    Returns:
        ChunkSpec: Spec using ``--chunk-rows`` and ``--format``
    """
    spec = HistIOService.chunk_spec(path, args.chunk_rows, args.format)
    if args.strict_l1:
        for chunk in HistIOService.stream_chunks(spec):
            chunk.check_l1(args.l1_tolerance)
    return spec


def write_report(report: BenchReport, out: Optional[str]) -> None:
    """Write a benchmark report to a file, or to stdout when ``out`` is None."""
    text = report.to_csv()
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
        logger.info("wrote %d rows to %s", len(report.rows), out)
