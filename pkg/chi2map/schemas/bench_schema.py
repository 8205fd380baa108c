"""
Pydantic schemas for benchmark reports.
"""

import csv
import io
from typing import Optional

from pydantic import BaseModel, ConfigDict

BENCH_HEADER = "# chi2map-bench v1"
BENCH_COLUMNS = ("method", "N", "D", "seed", "metric", "value")


class BenchRow(BaseModel):
    """
    One measurement of a benchmark.

    Attributes:
        method: Embedding or pipeline variant name
        N: Series terms (0 when not applicable)
        D: Random Fourier dimension (0 when not applicable)
        seed: RF seed (-1 when aggregated over seeds)
        metric: Metric name, e.g. ``max_abs_error``
        value: Measured value
    """

    model_config = ConfigDict(frozen=True)

    method: str
    N: int = 0
    D: int = 0
    seed: int = -1
    metric: str
    value: float


class BenchReport(BaseModel):
    """
    Append-only collection of benchmark rows.

    Attributes:
        rows: Measurements in the order they were taken
    """

    rows: list[BenchRow] = []

    def add(self, method: str, metric: str, value: float, N: int = 0, D: int = 0,
            seed: int = -1) -> BenchRow:
        """
        Append a measurement.

        Returns:
            BenchRow: The appended row
        """
        row = BenchRow(method=method, N=N, D=D, seed=seed, metric=metric, value=float(value))
        self.rows.append(row)
        return row

    def extend(self, other: "BenchReport") -> None:
        """Append all rows of another report."""
        self.rows.extend(other.rows)

    def select(self, method: Optional[str] = None, metric: Optional[str] = None,
               N: Optional[int] = None, D: Optional[int] = None) -> list[BenchRow]:
        """
        Filter rows by any combination of keys.

        Returns:
            list[BenchRow]: Matching rows in report order
        """
        return [
            row for row in self.rows
            if (method is None or row.method == method)
            and (metric is None or row.metric == metric)
            and (N is None or row.N == N)
            and (D is None or row.D == D)
        ]

    def to_csv(self) -> str:
        """
        Render the report as versioned CSV.

        Returns:
            str: Header comment, column line, then one line per row; values
            printed with round-trip precision so identical runs give identical bytes
        """
        buffer = io.StringIO()
        buffer.write(BENCH_HEADER + "\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(BENCH_COLUMNS)
        for row in self.rows:
            writer.writerow([row.method, row.N, row.D, row.seed, row.metric, repr(row.value)])
        return buffer.getvalue()
