"""
Histogram data models.

This module holds the validated matrix types that flow between ingestion,
the feature maps and the learning stage.
"""

import enum
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from chi2map.exceptions import AlignmentError, DimensionError, EmptyMatrix, ValidationError
from chi2map.models.base import ArrayModel, frozen_array

logger = logging.getLogger(__name__)


class MatrixFormat(str, enum.Enum):
    """Enumeration of on-disk matrix formats."""
    CSV = "csv"
    BINARY = "bin"

    @classmethod
    def from_path(cls, path: Union[str, Path]) -> "MatrixFormat":
        """
        Guess the format from a file extension.

        Args:
            path: File path

        Returns:
            MatrixFormat: CSV for ``.csv``/``.txt``, binary otherwise
        """
        suffix = Path(path).suffix.lower()
        return cls.CSV if suffix in (".csv", ".txt") else cls.BINARY


def _first_offender(mask: np.ndarray) -> tuple[int, int]:
    row, col = np.argwhere(mask)[0]
    return int(row), int(col)


def _validate_finite(data: np.ndarray, what: str) -> None:
    bad = ~np.isfinite(data)
    if bad.any():
        row, col = _first_offender(bad)
        raise ValidationError(f"{what} contains a non-finite value", row=row, column=col)


@dataclass(frozen=True, repr=False, eq=False)
class HistogramMatrix(ArrayModel):
    """
    An n x d matrix of nonnegative histogram descriptors.

    Attributes:
        data: Row-major float64 array of shape (rows, cols)
        row_offset: Index of the first row within the source matrix
            (nonzero for streamed chunks)
    """

    data: np.ndarray
    row_offset: int = 0

    def __post_init__(self):
        data = frozen_array(self.data)
        if data.ndim == 1:
            data = frozen_array(data.reshape(1, -1))
        if data.ndim != 2:
            raise DimensionError(f"histogram matrix must be 2-dimensional, got shape {data.shape}")
        if data.shape[0] == 0 or data.shape[1] == 0:
            raise EmptyMatrix(f"histogram matrix is empty (shape {data.shape})")
        _validate_finite(data, "histogram matrix")
        negative = data < 0
        if negative.any():
            row, col = _first_offender(negative)
            raise ValidationError("histogram matrix contains a negative entry",
                                  row=row + self.row_offset, column=col)
        object.__setattr__(self, "data", data)

    @property
    def rows(self) -> int:
        """Number of rows."""
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        """Number of columns."""
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def l1_violations(self, tolerance: float = 1e-6) -> np.ndarray:
        """
        Find rows whose sum differs from 1 by more than ``tolerance``.

        Args:
            tolerance: Absolute tolerance on the row sum

        Returns:
            np.ndarray: Indices (relative to this matrix) of violating rows
        """
        sums = self.data.sum(axis=1)
        return np.flatnonzero(np.abs(sums - 1.0) > tolerance)

    def check_l1(self, tolerance: float = 1e-6) -> bool:
        """
        Warn about rows that are not L1-normalized.

        The feature maps are defined pointwise, so unnormalized rows are
        accepted; only the similarity/distance identity needs unit sums.

        Args:
            tolerance: Absolute tolerance on the row sum

        Returns:
            bool: True if every row sums to 1 within tolerance
        """
        bad = self.l1_violations(tolerance)
        if bad.size:
            logger.warning(
                "%d of %d rows are not L1-normalized within %g (first: row %d)",
                bad.size, self.rows, tolerance, int(bad[0]) + self.row_offset,
            )
            return False
        return True

    def nonzero_values(self) -> np.ndarray:
        """
        Get all nonzero entries, flattened.

        Returns:
            np.ndarray: 1-D array of the nonzero values
        """
        return self.data[self.data != 0]

    @classmethod
    def vstack(cls, parts: list["HistogramMatrix"]) -> "HistogramMatrix":
        """
        Concatenate matrices vertically.

        Args:
            parts: Matrices with equal column counts, in row order

        Returns:
            HistogramMatrix: The stacked matrix
        """
        if not parts:
            raise EmptyMatrix("nothing to stack")
        return cls(np.vstack([p.data for p in parts]), row_offset=parts[0].row_offset)


@dataclass(frozen=True, repr=False, eq=False)
class ChunkSpec(ArrayModel):
    """
    Description of a chunked pass over a matrix.

    Attributes:
        chunk_rows: Rows per chunk (the last chunk may be shorter)
        total_rows: Rows in the source
        source: File path, or an in-memory HistogramMatrix
        fmt: On-disk format when ``source`` is a path
    """

    chunk_rows: int
    total_rows: int
    source: Union[Path, HistogramMatrix]
    fmt: Optional[MatrixFormat] = None

    def __post_init__(self):
        if self.total_rows < 1:
            raise EmptyMatrix("chunked source has no rows")
        if not 1 <= self.chunk_rows <= self.total_rows:
            raise ValidationError(
                f"chunk_rows must lie in [1, {self.total_rows}], got {self.chunk_rows}"
            )
        if isinstance(self.source, str):
            object.__setattr__(self, "source", Path(self.source))

    @property
    def num_chunks(self) -> int:
        """Number of chunks, ceil(total_rows / chunk_rows)."""
        return -(-self.total_rows // self.chunk_rows)

    def bounds(self, index: int) -> tuple[int, int]:
        """
        Get the half-open row range of a chunk.

        Args:
            index: Chunk index

        Returns:
            tuple: (start, stop) row indices
        """
        start = index * self.chunk_rows
        return start, min(start + self.chunk_rows, self.total_rows)


@dataclass(frozen=True, repr=False, eq=False)
class LabelMatrix(ArrayModel):
    """
    Regression targets, one column per output (class).

    Attributes:
        data: float64 array of shape (rows, classes); one-vs-all problems use +1/-1
    """

    data: np.ndarray
    row_offset: int = 0

    def __post_init__(self):
        data = frozen_array(self.data)
        if data.ndim == 1:
            data = frozen_array(data.reshape(-1, 1))
        if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] == 0:
            raise EmptyMatrix(f"label matrix must be non-empty and 2-dimensional, got shape {data.shape}")
        _validate_finite(data, "label matrix")
        object.__setattr__(self, "data", data)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def classes(self) -> int:
        return self.data.shape[1]

    def slice(self, start: int, stop: int) -> "LabelMatrix":
        """
        Get rows ``start:stop`` as a new label matrix.

        Raises:
            AlignmentError: If the range runs past the last label row
        """
        if stop > self.rows:
            raise AlignmentError(f"labels end at row {self.rows}, chunk needs rows up to {stop}")
        return LabelMatrix(self.data[start:stop], row_offset=self.row_offset + start)

    def check_aligned(self, matrix: HistogramMatrix) -> None:
        """
        Ensure this label block pairs with ``matrix`` row for row.

        Raises:
            AlignmentError: If row counts or offsets differ
        """
        if self.rows != matrix.rows or self.row_offset != matrix.row_offset:
            raise AlignmentError(
                f"labels rows {self.row_offset}..{self.row_offset + self.rows} do not match "
                f"matrix rows {matrix.row_offset}..{matrix.row_offset + matrix.rows}"
            )

    @classmethod
    def one_vs_all(cls, class_ids, classes: Optional[int] = None) -> "LabelMatrix":
        """
        Build +1/-1 targets from integer class ids.

        Args:
            class_ids: Integer class id per row, in 0..classes-1
            classes: Number of classes; inferred from the ids if omitted

        Returns:
            LabelMatrix: Matrix with +1 in the true class column and -1 elsewhere

        Raises:
            ValidationError: If an id is negative or not below ``classes``
        """
        ids = np.asarray(class_ids).astype(np.int64).ravel()
        if ids.size and ids.min() < 0:
            raise ValidationError("class ids must be nonnegative", row=int(np.argmin(ids)))
        count = int(classes if classes is not None else ids.max() + 1)
        if ids.size and ids.max() >= count:
            raise ValidationError(f"class id {int(ids.max())} needs more than {count} classes",
                                  row=int(np.argmax(ids)))
        targets = -np.ones((ids.size, count))
        targets[np.arange(ids.size), ids] = 1.0
        return cls(targets)

    def class_ids(self) -> np.ndarray:
        """Column index of the largest target in each row."""
        return np.argmax(self.data, axis=1)
