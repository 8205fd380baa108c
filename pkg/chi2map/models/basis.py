"""
Random Fourier basis model.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from chi2map.exceptions import DimensionError, ParameterError
from chi2map.models.base import ArrayModel, frozen_array


@dataclass(frozen=True, repr=False, eq=False)
class RFBasis(ArrayModel):
    """
    Frequencies and phases of a random Fourier feature map.

    Attributes:
        omega: (embed_dim, D) frequency matrix, entries ~ Normal(0, 2 * gamma)
        phase: (D,) phase vector in [0, 2*pi)
        gamma: Gaussian kernel parameter
        seed: Seed the basis was generated from
    """

    omega: np.ndarray
    phase: np.ndarray
    gamma: float
    seed: int

    def __post_init__(self):
        omega = frozen_array(self.omega, ndim=2)
        phase = frozen_array(self.phase, ndim=1)
        if omega.shape[1] != phase.shape[0]:
            raise DimensionError(
                f"omega has {omega.shape[1]} columns but phase has {phase.shape[0]} entries"
            )
        if not self.gamma > 0:
            raise ParameterError(f"gamma must be positive, got {self.gamma}")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "phase", phase)
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def embed_dim(self) -> int:
        """Input (embedding) dimension."""
        return self.omega.shape[0]

    @property
    def dims(self) -> int:
        """Number of random features D."""
        return self.omega.shape[1]

    @property
    def fingerprint(self) -> str:
        """
        Content hash identifying this basis.

        Returns:
            str: Hex SHA-256 over shape, gamma, seed and the raw arrays
        """
        digest = hashlib.sha256()
        digest.update(np.array([self.embed_dim, self.dims, self.seed], dtype="<u8").tobytes())
        digest.update(np.array([self.gamma], dtype="<f8").tobytes())
        digest.update(self.omega.astype("<f8").tobytes())
        digest.update(self.phase.astype("<f8").tobytes())
        return digest.hexdigest()
