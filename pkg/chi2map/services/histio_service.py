"""
Histogram I/O service.

This module provides reading, writing and chunked streaming of histogram
matrices, plus the log-binned value histogram used to fit direct-series
parameters.

Binary layout (little-endian)::

    b"CHI2MAT1" | u64 rows | u64 cols | rows*cols f64, row-major
"""

import csv
import logging
import struct
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

import numpy as np

from chi2map.exceptions import (
    ChunkReadError, EmptyMatrix, FormatError, NoNonzeroValues, ParameterError, ParseError,
)
from chi2map.models.histogram import ChunkSpec, HistogramMatrix, LabelMatrix, MatrixFormat
from chi2map.models.params import ParamVector

logger = logging.getLogger(__name__)

MATRIX_MAGIC = b"CHI2MAT1"
_HEADER = struct.Struct("<8sQQ")
_F64 = np.dtype("<f8")

PathLike = Union[str, Path]


def _resolve_format(path: Path, fmt: Optional[Union[MatrixFormat, str]]) -> MatrixFormat:
    if fmt is None:
        return MatrixFormat.from_path(path)
    return MatrixFormat(fmt)


def _parse_csv_rows(lines, first_row: int = 0) -> np.ndarray:
    """Parse CSV text lines into a float array, naming the row/column of any failure."""
    rows = []
    width = None
    for line_number, fields in enumerate(csv.reader(lines)):
        if not fields or (len(fields) == 1 and not fields[0].strip()):
            continue
        if fields[0].lstrip().startswith("#"):
            continue
        row_index = first_row + len(rows)
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise ParseError(f"ragged CSV: expected {width} values, found {len(fields)}",
                             row=row_index)
        try:
            rows.append([float(value) for value in fields])
        except ValueError:
            column = next(i for i, value in enumerate(fields) if not _is_float(value))
            raise ParseError(f"cannot parse {fields[column]!r} as a number",
                             row=row_index, column=column) from None
    if not rows:
        return np.zeros((0, width or 0))
    return np.array(rows, dtype=np.float64)


def _is_float(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


class HistIOService:
    """
    Service class for matrix ingestion and streaming.

    Provides methods for:
    - CSV and binary matrix reading/writing
    - Chunked streaming with bounded memory
    - The log-binned value histogram of nonzero entries
    """

    # ========================================================================
    # RAW ARRAYS
    # ========================================================================

    @staticmethod
    def read_header(path: PathLike) -> tuple[int, int]:
        """
        Read the shape stored in a binary matrix header.

        Args:
            path: Binary matrix file

        Returns:
            tuple: (rows, cols)

        Raises:
            FormatError: If the magic tag is wrong or the payload is truncated
            EmptyMatrix: If rows or cols is zero
        """
        path = Path(path)
        with path.open("rb") as handle:
            raw = handle.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise FormatError(f"{path}: file too short for a matrix header")
        magic, rows, cols = _HEADER.unpack(raw)
        if magic != MATRIX_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {MATRIX_MAGIC!r}")
        if rows == 0 or cols == 0:
            raise EmptyMatrix(f"{path}: header declares a {rows}x{cols} matrix")
        expected = _HEADER.size + rows * cols * _F64.itemsize
        actual = path.stat().st_size
        if actual != expected:
            raise FormatError(f"{path}: payload is {actual} bytes, header implies {expected}")
        return int(rows), int(cols)

    @staticmethod
    def read_array(path: PathLike, fmt: Optional[Union[MatrixFormat, str]] = None) -> np.ndarray:
        """
        Read a float matrix without histogram validation.

        Used for labels and scores, which may be negative.

        Args:
            path: File path
            fmt: Format; inferred from the extension if omitted

        Returns:
            np.ndarray: (rows, cols) float64 array
        """
        path = Path(path)
        if _resolve_format(path, fmt) is MatrixFormat.CSV:
            with path.open(newline="") as handle:
                data = _parse_csv_rows(handle)
            if data.size == 0:
                raise EmptyMatrix(f"{path}: no data rows")
            return data
        rows, cols = HistIOService.read_header(path)
        with path.open("rb") as handle:
            handle.seek(_HEADER.size)
            data = np.frombuffer(handle.read(rows * cols * _F64.itemsize), dtype=_F64)
        return data.reshape(rows, cols).astype(np.float64)

    @staticmethod
    def write_array(data: np.ndarray, path: PathLike,
                    fmt: Optional[Union[MatrixFormat, str]] = None) -> Path:
        """
        Write a float matrix in CSV or binary form.

        CSV values are printed with round-trip precision, so both formats
        reproduce the data bit for bit.

        Args:
            data: 2-D array
            path: Destination
            fmt: Format; inferred from the extension if omitted

        Returns:
            Path: The written path
        """
        path = Path(path)
        data = np.asarray(data, dtype=np.float64)
        if data.ndim == 1:
            data = data.reshape(-1, 1)
        if _resolve_format(path, fmt) is MatrixFormat.CSV:
            with path.open("w", newline="") as handle:
                for row in data.tolist():
                    handle.write(",".join(repr(value) for value in row) + "\n")
            return path
        with path.open("wb") as handle:
            handle.write(_HEADER.pack(MATRIX_MAGIC, data.shape[0], data.shape[1]))
            handle.write(np.ascontiguousarray(data, dtype=_F64).tobytes())
        return path

    # ========================================================================
    # HISTOGRAM MATRICES
    # ========================================================================

    @staticmethod
    def read_matrix(path: PathLike, fmt: Optional[Union[MatrixFormat, str]] = None,
                    strict_l1: bool = False, l1_tolerance: float = 1e-6) -> HistogramMatrix:
        """
        Read and validate a histogram matrix.

        Args:
            path: File path
            fmt: ``csv`` or ``bin``; inferred from the extension if omitted
            strict_l1: Warn about rows that do not sum to 1
            l1_tolerance: Tolerance of the strict-L1 check

        Returns:
            HistogramMatrix: Validated matrix

        Raises:
            ParseError: Malformed CSV (names row and column)
            ValidationError: Negative or non-finite entries (names row and column)
            FormatError: Bad binary header or truncated payload
            EmptyMatrix: No rows or no columns

        Example:
            X = HistIOService.read_matrix("train.bin")
        """
        matrix = HistogramMatrix(HistIOService.read_array(path, fmt))
        logger.debug("read %dx%d matrix from %s", matrix.rows, matrix.cols, path)
        if strict_l1:
            matrix.check_l1(l1_tolerance)
        return matrix

    @staticmethod
    def write_matrix(matrix: Union[HistogramMatrix, np.ndarray], path: PathLike,
                     fmt: Optional[Union[MatrixFormat, str]] = None) -> Path:
        """
        Write a histogram matrix.

        Args:
            matrix: Matrix to write
            path: Destination
            fmt: ``csv`` or ``bin``; inferred from the extension if omitted

        Returns:
            Path: The written path
        """
        data = matrix.data if isinstance(matrix, HistogramMatrix) else matrix
        return HistIOService.write_array(data, path, fmt)

    @staticmethod
    def read_labels(path: PathLike, fmt: Optional[Union[MatrixFormat, str]] = None,
                    classes: Optional[int] = None) -> LabelMatrix:
        """
        Read regression targets or class ids.

        A single column of nonnegative integers is read as class ids and
        expanded to +1/-1 one-vs-all targets; anything else is used as-is.

        Args:
            path: File path
            fmt: Format; inferred from the extension if omitted
            classes: Number of classes for class-id files; inferred if omitted

        Returns:
            LabelMatrix: Targets, one column per class
        """
        data = HistIOService.read_array(path, fmt)
        is_ids = (data.shape[1] == 1 and np.all(np.isfinite(data)) and np.all(data >= 0)
                  and np.all(data == np.round(data)))
        if is_ids and (classes is None or classes > 1):
            return LabelMatrix.one_vs_all(data[:, 0], classes)
        return LabelMatrix(data)

    # ========================================================================
    # STREAMING
    # ========================================================================

    @staticmethod
    def count_rows(path: PathLike, fmt: Optional[Union[MatrixFormat, str]] = None) -> int:
        """
        Count data rows without loading the matrix.

        Args:
            path: Matrix file
            fmt: Format; inferred from the extension if omitted

        Returns:
            int: Number of rows
        """
        path = Path(path)
        if _resolve_format(path, fmt) is MatrixFormat.BINARY:
            return HistIOService.read_header(path)[0]
        with path.open(newline="") as handle:
            return sum(1 for line in handle if line.strip() and not line.lstrip().startswith("#"))

    @staticmethod
    def chunk_spec(source: Union[PathLike, HistogramMatrix], chunk_rows: int,
                   fmt: Optional[Union[MatrixFormat, str]] = None) -> ChunkSpec:
        """
        Build a chunk specification for a file or an in-memory matrix.

        ``chunk_rows`` larger than the matrix is clipped to its row count.

        Args:
            source: Matrix file or HistogramMatrix
            chunk_rows: Requested rows per chunk
            fmt: File format; inferred from the extension if omitted

        Returns:
            ChunkSpec: Specification for ``stream_chunks``

        Raises:
            EmptyMatrix: If the file has no rows
        """
        if chunk_rows < 1:
            raise ParameterError(f"chunk_rows must be at least 1, got {chunk_rows}")
        if isinstance(source, HistogramMatrix):
            return ChunkSpec(min(chunk_rows, source.rows), source.rows, source)
        path = Path(source)
        resolved = _resolve_format(path, fmt)
        total = HistIOService.count_rows(path, resolved)
        if total == 0:
            raise EmptyMatrix(f"{path}: no data rows")
        return ChunkSpec(min(chunk_rows, total), total, path, resolved)

    @staticmethod
    def column_count(spec: ChunkSpec) -> int:
        """Number of columns of the matrix behind a chunk spec."""
        if isinstance(spec.source, HistogramMatrix):
            return spec.source.cols
        if (spec.fmt or MatrixFormat.from_path(spec.source)) is MatrixFormat.BINARY:
            return HistIOService.read_header(spec.source)[1]
        blocks = HistIOService.stream_arrays(spec)
        try:
            return next(blocks)[1].shape[1]
        finally:
            blocks.close()

    @staticmethod
    def stream_chunks(spec: ChunkSpec) -> Iterator[HistogramMatrix]:
        """
        Yield the rows of a histogram matrix in consecutive chunks.

        Only one chunk is held in memory at a time. Each yielded chunk
        records its ``row_offset`` in the full matrix.

        Args:
            spec: Chunk specification

        Yields:
            HistogramMatrix: ceil(total_rows / chunk_rows) chunks in index order

        Raises:
            ChunkReadError: If the source cannot be read, carrying the chunk index
            ValidationError: If a chunk holds a negative or non-finite value
        """
        for start, block in HistIOService.stream_arrays(spec):
            yield HistogramMatrix(block, row_offset=start)

    @staticmethod
    def stream_arrays(spec: ChunkSpec) -> Iterator[tuple[int, np.ndarray]]:
        """
        Yield raw (start row, block) pairs without histogram validation.

        Used for embeddings and scores, which may be negative.
        """
        if isinstance(spec.source, HistogramMatrix):
            for index in range(spec.num_chunks):
                start, stop = spec.bounds(index)
                yield start, spec.source.data[start:stop]
            return
        fmt = spec.fmt or MatrixFormat.from_path(spec.source)
        if fmt is MatrixFormat.CSV:
            yield from HistIOService._stream_csv(spec)
        else:
            yield from HistIOService._stream_binary(spec)

    @staticmethod
    def _stream_binary(spec: ChunkSpec) -> Iterator[tuple[int, np.ndarray]]:
        rows, cols = HistIOService.read_header(spec.source)
        if rows != spec.total_rows:
            raise ChunkReadError(f"{spec.source} has {rows} rows, spec expects {spec.total_rows}", 0)
        row_bytes = cols * _F64.itemsize
        with Path(spec.source).open("rb") as handle:
            for index in range(spec.num_chunks):
                start, stop = spec.bounds(index)
                try:
                    handle.seek(_HEADER.size + start * row_bytes)
                    raw = handle.read((stop - start) * row_bytes)
                except OSError as error:
                    raise ChunkReadError(f"read failed: {error}", index) from error
                if len(raw) != (stop - start) * row_bytes:
                    raise ChunkReadError(f"{spec.source} ended early", index)
                logger.debug("chunk %d: rows %d..%d", index, start, stop)
                yield start, np.frombuffer(raw, dtype=_F64).reshape(stop - start, cols).astype(np.float64)

    @staticmethod
    def _stream_csv(spec: ChunkSpec) -> Iterator[tuple[int, np.ndarray]]:
        index = 0
        start = 0
        pending: list[str] = []
        with Path(spec.source).open(newline="") as handle:
            try:
                for line in handle:
                    stripped = line.strip()
                    if not stripped or stripped.startswith("#"):
                        continue
                    pending.append(line)
                    if len(pending) == spec.chunk_rows:
                        yield start, _parse_csv_rows(pending, start)
                        start += len(pending)
                        pending = []
                        index += 1
            except (OSError, UnicodeDecodeError) as error:
                raise ChunkReadError(f"read failed: {error}", index) from error
        if pending:
            yield start, _parse_csv_rows(pending, start)
            start += len(pending)
            index += 1
        if start != spec.total_rows:
            raise ChunkReadError(f"{spec.source} has {start} rows, spec expects {spec.total_rows}", index)

    @staticmethod
    def write_chunks(blocks: Iterable[np.ndarray], path: PathLike, rows: int, cols: int,
                     fmt: Optional[Union[MatrixFormat, str]] = None) -> Path:
        """
        Write a matrix block by block without holding it in memory.

        Args:
            blocks: Row blocks in order, each with ``cols`` columns
            path: Destination
            rows: Total rows the blocks add up to
            cols: Columns
            fmt: Format; inferred from the extension if omitted

        Returns:
            Path: The written path

        Raises:
            FormatError: If the blocks do not add up to (rows, cols)
        """
        path = Path(path)
        binary = _resolve_format(path, fmt) is MatrixFormat.BINARY
        written = 0
        with path.open("wb" if binary else "w", **({} if binary else {"newline": ""})) as handle:
            if binary:
                handle.write(_HEADER.pack(MATRIX_MAGIC, rows, cols))
            for block in blocks:
                block = np.atleast_2d(np.asarray(block, dtype=np.float64))
                if block.shape[1] != cols:
                    raise FormatError(f"block has {block.shape[1]} columns, expected {cols}")
                if binary:
                    handle.write(np.ascontiguousarray(block, dtype=_F64).tobytes())
                else:
                    for row in block.tolist():
                        handle.write(",".join(repr(value) for value in row) + "\n")
                written += block.shape[0]
        if written != rows:
            raise FormatError(f"{path}: wrote {written} rows, header declares {rows}")
        return path

    # ========================================================================
    # VALUE HISTOGRAM
    # ========================================================================

    @staticmethod
    def log_bin_edges(lo: float, hi: float, bins: int) -> np.ndarray:
        """
        Compute logarithmically spaced bin edges on [lo, hi].

        When ``lo == hi`` the range is widened symmetrically in log space so
        that the single value falls inside a bin instead of on a degenerate edge.

        Args:
            lo: Smallest nonzero value
            hi: Largest value
            bins: Number of bins

        Returns:
            np.ndarray: ``bins + 1`` increasing edges with constant ratio
        """
        if bins < 1:
            raise ParameterError(f"bins must be at least 1, got {bins}")
        if not 0 < lo <= hi:
            raise ParameterError(f"log bins need 0 < lo <= hi, got [{lo}, {hi}]")
        if lo == hi:
            spread = 1.0 + 1e-3
            return lo * np.geomspace(1.0 / spread, spread, bins + 1)
        return np.geomspace(lo, hi, bins + 1)

    @staticmethod
    def value_range(X: HistogramMatrix) -> tuple[float, float]:
        """
        Get (smallest nonzero, largest) entry of X.

        Raises:
            NoNonzeroValues: If X has no nonzero entry
        """
        values = X.nonzero_values()
        if values.size == 0:
            raise NoNonzeroValues("matrix has no nonzero values")
        return float(values.min()), float(values.max())

    @staticmethod
    def value_range_stream(spec: ChunkSpec) -> tuple[float, float]:
        """
        Out-of-core ``value_range``.

        Raises:
            NoNonzeroValues: If the matrix has no nonzero entry
        """
        lo, hi = np.inf, -np.inf
        for chunk in HistIOService.stream_chunks(spec):
            values = chunk.nonzero_values()
            if values.size:
                lo = min(lo, float(values.min()))
                hi = max(hi, float(values.max()))
        if not np.isfinite(lo):
            raise NoNonzeroValues("matrix has no nonzero values")
        return lo, hi

    @staticmethod
    def _centroids(edges: np.ndarray, lo: float, hi: float) -> np.ndarray:
        # Geometric midpoints, kept inside the data range (all equal to lo when lo == hi).
        return np.clip(np.sqrt(edges[:-1] * edges[1:]), lo, hi)

    @staticmethod
    def value_histogram(X: HistogramMatrix, bins: int = 1000) -> tuple[np.ndarray, np.ndarray]:
        """
        Estimate the distribution of the nonzero entries of X.

        Args:
            X: Histogram matrix
            bins: Number of log-spaced bins

        Returns:
            tuple: (centroids, density); centroids are the geometric bin
            midpoints clipped to [min nonzero, max], density is the fraction
            of nonzero entries per bin

        Raises:
            NoNonzeroValues: If X has no nonzero entry
        """
        lo, hi = HistIOService.value_range(X)
        edges = HistIOService.log_bin_edges(lo, hi, bins)
        counts, _ = np.histogram(X.nonzero_values(), bins=edges)
        return HistIOService._centroids(edges, lo, hi), counts / counts.sum()

    @staticmethod
    def value_histogram_stream(spec: ChunkSpec, bins: int = 1000,
                               value_range: Optional[tuple[float, float]] = None) -> tuple[np.ndarray, np.ndarray]:
        """
        Out-of-core ``value_histogram``: one pass for the range, one for the counts.

        Args:
            spec: Chunk specification of the matrix
            bins: Number of log-spaced bins
            value_range: Range from ``value_range_stream``; skips the first pass

        Returns:
            tuple: (centroids, density), identical to ``value_histogram`` on the full matrix
        """
        lo, hi = value_range if value_range is not None else HistIOService.value_range_stream(spec)
        edges = HistIOService.log_bin_edges(lo, hi, bins)
        counts = np.zeros(bins, dtype=np.int64)
        for chunk in HistIOService.stream_chunks(spec):
            counts += np.histogram(chunk.nonzero_values(), bins=edges)[0]
        return HistIOService._centroids(edges, lo, hi), counts / counts.sum()

    # ========================================================================
    # PARAMETER FILES
    # ========================================================================

    @staticmethod
    def write_params(params: ParamVector, path: PathLike) -> Path:
        """
        Write direct-series parameters as a one-column CSV.

        Args:
            params: Parameters in selection order
            path: Destination

        Returns:
            Path: The written path
        """
        path = Path(path)
        path.write_text(params.to_csv())
        return path

    @staticmethod
    def read_params(path: PathLike) -> ParamVector:
        """
        Read direct-series parameters written by ``write_params``.

        Raises:
            ParseError: If a line is not a number
        """
        path = Path(path)
        try:
            return ParamVector.from_csv(path.read_text())
        except ValueError as error:
            if isinstance(error, ParameterError):
                raise
            raise ParseError(f"{path}: {error}") from error
