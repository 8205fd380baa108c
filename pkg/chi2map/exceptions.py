"""
Exception hierarchy for chi2map.

Every error raised on purpose by the library derives from ``Chi2MapError``
and carries the process exit code the CLI uses for it:

- 2: validation errors (bad input data, parameters or configuration)
- 3: I/O errors (unreadable files, malformed binary headers)
- 4: numerical failures (singular systems, degenerate statistics)
"""

from typing import Optional


class Chi2MapError(Exception):
    """Base class for all chi2map errors."""

    exit_code: int = 1


# ============================================================================
# VALIDATION (exit code 2)
# ============================================================================

class ValidationError(Chi2MapError, ValueError):
    """
    Input failed validation.

    Attributes:
        row: Offending row index, if known
        column: Offending column index, if known
    """

    exit_code = 2

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[int] = None):
        self.row = row
        self.column = column
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column}")
        if location:
            message = f"{message} (at {', '.join(location)})"
        super().__init__(message)


class ParseError(ValidationError):
    """Text input could not be parsed."""


class EmptyMatrix(ValidationError):
    """A matrix with zero rows or zero columns was supplied."""


class DimensionError(ValidationError):
    """Operand shapes do not agree."""


class ParameterError(ValidationError):
    """A scalar parameter is out of its admissible range."""


class AlignmentError(ValidationError):
    """Feature chunks and label rows are not aligned."""


class ConsistencyError(ValidationError):
    """Two passes over the data used different feature pipelines."""


class NoNonzeroValues(ValidationError):
    """The matrix has no nonzero entry to estimate a value distribution from."""


# ============================================================================
# I/O (exit code 3)
# ============================================================================

class Chi2MapIOError(Chi2MapError, OSError):
    """Reading or writing a file failed."""

    exit_code = 3


class FormatError(Chi2MapIOError):
    """A binary file has a wrong magic tag or a truncated payload."""


class ChunkReadError(Chi2MapIOError):
    """
    Streaming failed in the middle of a matrix.

    Attributes:
        chunk_index: Index of the chunk that could not be read
    """

    def __init__(self, message: str, chunk_index: int):
        self.chunk_index = chunk_index
        super().__init__(f"{message} (chunk {chunk_index})")


# ============================================================================
# NUMERICAL (exit code 4)
# ============================================================================

class NumericalError(Chi2MapError, ArithmeticError):
    """A numerical procedure could not produce a meaningful result."""

    exit_code = 4


class LogSingularity(NumericalError):
    """The Fourier coefficient recurrence was evaluated at x = 1."""


class DegenerateError(NumericalError):
    """Too few rows to form a centered second-moment matrix."""


class SingularError(NumericalError):
    """
    The regularized system has a zero pivot.

    Attributes:
        index: Eigen-index of the vanishing pivot
    """

    def __init__(self, message: str, index: int):
        self.index = index
        super().__init__(f"{message} (eigenvalue index {index})")
