"""
Series coefficient models for the Chebyshev chi2 map.
"""

from dataclasses import dataclass

import numpy as np

from chi2map.exceptions import DimensionError
from chi2map.models.base import ArrayModel, frozen_array


@dataclass(frozen=True, repr=False, eq=False)
class FourierCoeffs(ArrayModel):
    """
    Cosine/sine coefficients of the transformed similarity at one point x.

    Attributes:
        a: (N+1,) cosine coefficients; odd entries are zero
        b: (N+1,) sine coefficients; even entries are zero
        x: Evaluation point
    """

    a: np.ndarray
    b: np.ndarray
    x: float

    def __post_init__(self):
        a = frozen_array(self.a, ndim=1)
        b = frozen_array(self.b, ndim=1)
        if a.shape != b.shape:
            raise DimensionError(f"coefficient vectors differ in length: {a.size} vs {b.size}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "x", float(self.x))

    @property
    def terms(self) -> int:
        """Highest coefficient index N."""
        return self.a.size - 1

    def interleaved(self) -> np.ndarray:
        """
        Merge the nonzero entries into one sequence s_q.

        Returns:
            np.ndarray: s_q = a_q for even q and b_q for odd q
        """
        s = self.a.copy()
        s[1::2] = self.b[1::2]
        return s


@dataclass(frozen=True, repr=False, eq=False)
class ConvergenceProfile(ArrayModel):
    """
    Residual of a truncated chi2 series as a function of the term count.

    Attributes:
        terms: (K,) term counts N
        max_residual: (K,) max over grid pairs of |2xy/(x+y) - approximation|
        slope: Least-squares slope of log(max_residual) against log(N)
        constant: Smallest C with |residual(x, y, N)| <= C sqrt(xy) / N on the grid
    """

    terms: np.ndarray
    max_residual: np.ndarray
    slope: float
    constant: float

    def __post_init__(self):
        object.__setattr__(self, "terms", frozen_array(self.terms, dtype=np.int64, ndim=1))
        object.__setattr__(self, "max_residual", frozen_array(self.max_residual, ndim=1))
        object.__setattr__(self, "slope", float(self.slope))
        object.__setattr__(self, "constant", float(self.constant))
