"""
Random Fourier lifting service.

Lifts a chi2 embedding C to Z = sqrt(2/D) cos(C Omega + phase), whose inner
products approximate the Gaussian kernel exp(-gamma ||C(x) - C(y)||^2) and
hence the exp-chi2 kernel exp(-2 gamma chi2_distance(x, y)).

Random stream layout (part of the basis file contract): a Philox generator
seeded with ``seed`` first fills Omega column by column with Normal(0, 2 gamma)
draws, then draws the D phases uniformly from [0, 2 pi).

Basis file layout (little-endian)::

    b"CHI2RFB1" | u64 embed_dim | u64 D | f64 gamma | u64 seed
    | embed_dim*D f64 Omega, row-major | D f64 phase
"""

import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np
from scipy.spatial.distance import cdist

from chi2map.exceptions import ConsistencyError, DimensionError, FormatError, ParameterError
from chi2map.models.basis import RFBasis
from chi2map.models.histogram import HistogramMatrix
from chi2map.models.params import ParamVector
from chi2map.services.chi2direct_service import Chi2DirectService
from chi2map.services.workers import map_row_blocks

logger = logging.getLogger(__name__)

BASIS_MAGIC = b"CHI2RFB1"
_HEADER = struct.Struct("<8sQQdQ")
_F64 = np.dtype("<f8")


class RFMapService:
    """
    Service class for random Fourier features.

    Provides methods for:
    - Seeded basis sampling and basis files
    - The cosine feature transform
    - Approximate and exact Gram matrices
    """

    @staticmethod
    def sample_basis(embed_dim: int, D: int, gamma: float, seed: int) -> RFBasis:
        """
        Sample a random Fourier basis.

        Args:
            embed_dim: Dimension of the embedding being lifted
            D: Number of random features
            gamma: Gaussian kernel parameter; Omega entries have variance 2 * gamma
            seed: Nonnegative 64-bit seed

        Returns:
            RFBasis: Bit-identical for identical arguments

        Raises:
            ParameterError: If a dimension is below 1, gamma is not positive
                or the seed is negative
        """
        if embed_dim < 1 or D < 1:
            raise ParameterError(f"basis dimensions must be at least 1, got {embed_dim}x{D}")
        if not (np.isfinite(gamma) and gamma > 0):
            raise ParameterError(f"gamma must be positive, got {gamma}")
        if not 0 <= seed < 2 ** 64:
            raise ParameterError(f"seed must be a nonnegative 64-bit integer, got {seed}")
        rng = np.random.Generator(np.random.Philox(seed))
        omega = rng.normal(0.0, np.sqrt(2.0 * gamma), size=(D, embed_dim)).T
        phase = rng.uniform(0.0, 2.0 * np.pi, size=D)
        logger.debug("sampled %dx%d basis (gamma=%g, seed=%d)", embed_dim, D, gamma, seed)
        return RFBasis(omega=omega, phase=phase, gamma=gamma, seed=seed)

    @staticmethod
    def rf_transform(C: np.ndarray, basis: RFBasis, threads: int = 1) -> np.ndarray:
        """
        Map embeddings to random Fourier features.

        Args:
            C: (n, embed_dim) embedding matrix
            basis: Basis with matching ``embed_dim``
            threads: Worker threads over row blocks

        Returns:
            np.ndarray: (n, D) features sqrt(2/D) cos(C Omega + phase)

        Raises:
            DimensionError: If C has the wrong column count
        """
        C = np.atleast_2d(np.asarray(C, dtype=np.float64))
        if C.shape[1] != basis.embed_dim:
            raise DimensionError(f"embedding has {C.shape[1]} columns, basis expects {basis.embed_dim}")
        scale = np.sqrt(2.0 / basis.dims)

        def lift(block: np.ndarray) -> np.ndarray:
            return scale * np.cos(block @ basis.omega + basis.phase)

        return map_row_blocks(lift, C, threads)

    @staticmethod
    def approx_exp_chi2_gram(X: HistogramMatrix, k: ParamVector, basis: RFBasis) -> np.ndarray:
        """
        Gram matrix of the direct-series + random Fourier features of X.

        Approximates ``exact_exp_chi2_gram(X, beta=2 * basis.gamma)``.

        Returns:
            np.ndarray: (n, n) symmetric Gram matrix
        """
        C = Chi2DirectService.embed_matrix(X, k)
        Z = RFMapService.rf_transform(C, basis)
        gram = Z @ Z.T
        return 0.5 * (gram + gram.T)

    @staticmethod
    def gaussian_gram(C: np.ndarray, gamma: float) -> np.ndarray:
        """
        Exact Gaussian kernel exp(-gamma ||c_i - c_j||^2) between embedding rows.

        This is the kernel the random features estimate without bias.
        """
        C = np.atleast_2d(np.asarray(C, dtype=np.float64))
        return np.exp(-gamma * cdist(C, C, "sqeuclidean"))

    # ========================================================================
    # BASIS FILES
    # ========================================================================

    @staticmethod
    def write_basis(basis: RFBasis, path: Union[str, Path]) -> Path:
        """
        Write a basis file.

        Returns:
            Path: The written path
        """
        path = Path(path)
        with path.open("wb") as handle:
            handle.write(_HEADER.pack(BASIS_MAGIC, basis.embed_dim, basis.dims, basis.gamma, basis.seed))
            handle.write(basis.omega.astype(_F64).tobytes())
            handle.write(basis.phase.astype(_F64).tobytes())
        return path

    @staticmethod
    def read_basis(path: Union[str, Path], verify: bool = False) -> RFBasis:
        """
        Read a basis file.

        Args:
            path: Basis file
            verify: Also regenerate the basis from its seed and require equality

        Returns:
            RFBasis: The stored basis

        Raises:
            FormatError: Bad magic or truncated payload
            ConsistencyError: If ``verify`` is set and regeneration differs
        """
        path = Path(path)
        raw = path.read_bytes()
        if len(raw) < _HEADER.size:
            raise FormatError(f"{path}: file too short for a basis header")
        magic, embed_dim, dims, gamma, seed = _HEADER.unpack_from(raw)
        if magic != BASIS_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {BASIS_MAGIC!r}")
        count = embed_dim * dims + dims
        if len(raw) != _HEADER.size + count * _F64.itemsize:
            raise FormatError(f"{path}: payload does not match a {embed_dim}x{dims} basis")
        values = np.frombuffer(raw, dtype=_F64, offset=_HEADER.size)
        basis = RFBasis(
            omega=values[:embed_dim * dims].reshape(embed_dim, dims),
            phase=values[embed_dim * dims:],
            gamma=gamma,
            seed=seed,
        )
        if verify:
            fresh = RFMapService.sample_basis(embed_dim, dims, gamma, seed)
            if fresh.fingerprint != basis.fingerprint:
                raise ConsistencyError(f"{path}: basis does not regenerate from seed {seed}")
        return basis
