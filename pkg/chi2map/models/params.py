"""
Kernel parameter models.

Holds the direct-series parameter vector and the exp-chi2 bandwidth.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from chi2map.exceptions import ParameterError
from chi2map.models.base import ArrayModel, frozen_array


@dataclass(frozen=True, repr=False, eq=False)
class ParamVector(ArrayModel):
    """
    Ordered parameters k_1..k_N of the direct series.

    Term q of the series uses k_1..k_q, so the order is significant.

    Attributes:
        k: 1-D array of the N parameters, each in (0, 1]
        data_range: (min nonzero, max) of the data the parameters were fitted
            on, or None for hand-built vectors
    """

    k: np.ndarray
    data_range: Optional[tuple[float, float]] = None

    def __post_init__(self):
        k = frozen_array(np.atleast_1d(np.asarray(self.k, dtype=np.float64)), ndim=1)
        if k.size and (not np.all(np.isfinite(k)) or k.min() <= 0 or k.max() > 1):
            raise ParameterError(f"direct-series parameters must lie in (0, 1], got {k.tolist()}")
        if k.size and self.data_range is not None:
            lo, hi = self.data_range
            if k.min() < lo * (1 - 1e-12) or k.max() > hi * (1 + 1e-12):
                raise ParameterError(
                    f"parameters {k.tolist()} leave the fitted data range [{lo}, {hi}]"
                )
        object.__setattr__(self, "k", k)

    @property
    def terms(self) -> int:
        """Number of series terms N."""
        return int(self.k.size)

    def __len__(self) -> int:
        return self.terms

    def to_csv(self) -> str:
        """
        Serialize as a one-column CSV.

        Returns:
            str: One parameter per line, printed with round-trip precision
        """
        return "".join(f"{value!r}\n" for value in self.k.tolist())

    @classmethod
    def from_csv(cls, text: str) -> "ParamVector":
        """
        Parse a one-column CSV written by ``to_csv``.

        Args:
            text: File contents

        Returns:
            ParamVector: Parsed parameters (no data range attached)
        """
        values = [float(line.split(",")[0]) for line in text.splitlines()
                  if line.strip() and not line.lstrip().startswith("#")]
        return cls(np.array(values, dtype=np.float64))


@dataclass(frozen=True)
class KernelParams:
    """
    Parameters of the exp-chi2 kernel exp(-beta * chi2_distance).

    Attributes:
        beta: Positive bandwidth
    """

    beta: float = 1.5

    def __post_init__(self):
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ParameterError(f"beta must be positive, got {self.beta}")

    @property
    def rf_gamma(self) -> float:
        """Gaussian parameter gamma of the RF lifting with 2 * gamma = beta."""
        return self.beta / 2.0
