"""
Direct chi2 series service.

This module contains the exact chi2 kernels used as oracles, the direct
series embedding of 2xy/(x+y) with ordered parameters k_1..k_N, its exact
residual and bound, and the greedy parameter fitter.

For a scalar x the embedding has N coefficients::

    c_q(x) = prod_{p<q} (x - k_p)/(x + k_p) * 2 sqrt(k_q) x / (x + k_q)

and the N-term residual is exactly::

    2xy/(x+y) - <c(x), c(y)> = prod_q (x-k_q)(y-k_q)/((x+k_q)(y+k_q)) * 2xy/(x+y)
"""

import logging
from typing import Optional, Union

import numpy as np

from chi2map.exceptions import DimensionError, ParameterError
from chi2map.models.histogram import ChunkSpec, HistogramMatrix
from chi2map.models.params import KernelParams, ParamVector
from chi2map.services.histio_service import HistIOService
from chi2map.services.workers import map_row_blocks

logger = logging.getLogger(__name__)

Scalar = Union[float, np.ndarray]


def _as_row(x) -> np.ndarray:
    return HistogramMatrix(np.asarray(x, dtype=np.float64).reshape(1, -1)).data[0]


def _check_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = _as_row(x)
    y = _as_row(y)
    if x.shape != y.shape:
        raise DimensionError(f"histograms differ in length: {x.size} vs {y.size}")
    return x, y


def _harmonic(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """2xy/(x+y) elementwise, with 0/0 = 0."""
    total = x + y
    out = np.zeros(np.broadcast(x, y).shape)
    np.divide(2.0 * x * y, total, out=out, where=total > 0)
    return out


def _scalar(value: np.ndarray) -> Scalar:
    return float(value) if np.ndim(value) == 0 else value


class Chi2DirectService:
    """
    Service class for exact chi2 kernels and the direct series.

    Provides methods for:
    - Exact chi2 distance, similarity and exp-chi2 kernel (pairwise and Gram)
    - Greedy and constant parameter selection
    - Direct embedding of rows and matrices
    - Exact residual and its upper bound
    """

    # ========================================================================
    # EXACT KERNELS
    # ========================================================================

    @staticmethod
    def chi2_distance(x, y) -> float:
        """
        Symmetric chi2 distance 1/2 sum (x_i - y_i)^2 / (x_i + y_i).

        Bins where both entries are zero contribute 0.

        Args:
            x: Histogram row
            y: Histogram row of the same length

        Returns:
            float: Distance, in [0, 1] for L1-normalized rows

        Raises:
            DimensionError: If the lengths differ
        """
        x, y = _check_pair(x, y)
        total = x + y
        terms = np.zeros_like(total)
        np.divide((x - y) ** 2, total, out=terms, where=total > 0)
        return 0.5 * float(terms.sum())

    @staticmethod
    def chi2_similarity(x, y) -> float:
        """
        Additive chi2 kernel sum 2 x_i y_i / (x_i + y_i).

        For L1-normalized rows this equals ``1 - chi2_distance(x, y)``.

        Raises:
            DimensionError: If the lengths differ
        """
        x, y = _check_pair(x, y)
        return float(_harmonic(x, y).sum())

    @staticmethod
    def exp_chi2_kernel(x, y, beta: float = 1.5) -> float:
        """
        Exponentiated chi2 kernel exp(-beta * chi2_distance(x, y)).

        Args:
            x: Histogram row
            y: Histogram row
            beta: Positive bandwidth

        Returns:
            float: Kernel value in (0, 1]

        Raises:
            ParameterError: If beta is not positive
        """
        params = KernelParams(beta)
        return float(np.exp(-params.beta * Chi2DirectService.chi2_distance(x, y)))

    @staticmethod
    def pairwise_chi2_distance(X: HistogramMatrix, Y: Optional[HistogramMatrix] = None) -> np.ndarray:
        """
        Chi2 distances between all rows of X and all rows of Y.

        Args:
            X: (n, d) matrix
            Y: (m, d) matrix; defaults to X

        Returns:
            np.ndarray: (n, m) distances; symmetric with zero diagonal when Y is X
        """
        Y = X if Y is None else Y
        if X.cols != Y.cols:
            raise DimensionError(f"matrices differ in columns: {X.cols} vs {Y.cols}")
        out = np.empty((X.rows, Y.rows))
        for i, row in enumerate(X.data):
            total = row + Y.data
            terms = np.zeros_like(total)
            np.divide((row - Y.data) ** 2, total, out=terms, where=total > 0)
            out[i] = 0.5 * terms.sum(axis=1)
        if Y is X:
            out = 0.5 * (out + out.T)
        return out

    @staticmethod
    def pairwise_chi2_similarity(X: HistogramMatrix, Y: Optional[HistogramMatrix] = None) -> np.ndarray:
        """
        Additive chi2 kernel between all rows of X and all rows of Y.

        Returns:
            np.ndarray: (n, m) Gram matrix of ``chi2_similarity``
        """
        Y = X if Y is None else Y
        if X.cols != Y.cols:
            raise DimensionError(f"matrices differ in columns: {X.cols} vs {Y.cols}")
        return np.stack([_harmonic(row, Y.data).sum(axis=1) for row in X.data])

    @staticmethod
    def exact_exp_chi2_gram(X: HistogramMatrix, Y: Optional[HistogramMatrix] = None,
                            beta: float = 1.5) -> np.ndarray:
        """
        Exact exp-chi2 Gram matrix exp(-beta * D) for the pairwise distances D.

        Args:
            X: (n, d) matrix
            Y: (m, d) matrix; defaults to X
            beta: Positive bandwidth (2 * gamma of the RF lifting)

        Returns:
            np.ndarray: (n, m) kernel matrix
        """
        params = KernelParams(beta)
        return np.exp(-params.beta * Chi2DirectService.pairwise_chi2_distance(X, Y))

    # ========================================================================
    # PARAMETER SELECTION
    # ========================================================================

    @staticmethod
    def greedy_select(centroids: np.ndarray, density: np.ndarray, N: int) -> tuple[np.ndarray, np.ndarray]:
        """
        Greedily pick N centroids that remove the largest weighted residual peak.

        Starts from b = x/(x+1) * density over the centroids x; each step picks
        the centroid of argmax |b| (the smallest one on ties) and multiplies b
        by (x - k)/(x + k), which zeroes b at the picked centroid.

        Args:
            centroids: Increasing bin centroids
            density: Fraction of values per bin
            N: Number of parameters

        Returns:
            tuple: (k, peaks) where k holds the N picks in order and
            ``peaks[i]`` is max |b| after i picks (length N + 1)

        Raises:
            ParameterError: If N is negative or exceeds the number of bins
        """
        centroids = np.asarray(centroids, dtype=np.float64)
        if N < 0:
            raise ParameterError(f"number of terms must be nonnegative, got {N}")
        if N > centroids.size:
            raise ParameterError(f"cannot pick {N} parameters from {centroids.size} bins")
        b = centroids / (centroids + 1.0) * np.asarray(density, dtype=np.float64)
        picks = np.empty(N)
        peaks = [float(np.abs(b).max())]
        exhausted = False
        for i in range(N):
            j = int(np.argmax(np.abs(b)))
            if b[j] == 0 and not exhausted:
                logger.warning("residual weight exhausted after %d of %d picks; repeating centroid %g",
                               i, N, centroids[j])
                exhausted = True
            picks[i] = centroids[j]
            b = b * (centroids - picks[i]) / (centroids + picks[i])
            peaks.append(float(np.abs(b).max()))
        return picks, np.array(peaks)

    @staticmethod
    def fit_params(X: HistogramMatrix, N: int, bins: int = 1000) -> ParamVector:
        """
        Fit direct-series parameters to the value distribution of X.

        Args:
            X: Histogram matrix with at least one nonzero entry
            N: Number of parameters (series terms)
            bins: Number of log-spaced histogram bins

        Returns:
            ParamVector: The parameters in selection order

        Raises:
            NoNonzeroValues: If X has no nonzero entry
            ParameterError: If N > bins

        Example:
            k = Chi2DirectService.fit_params(X, N=5)
        """
        value_range = HistIOService.value_range(X)
        centroids, density = HistIOService.value_histogram(X, bins)
        return Chi2DirectService.fit_params_from_histogram(centroids, density, N, value_range)

    @staticmethod
    def fit_params_stream(spec: ChunkSpec, N: int, bins: int = 1000) -> ParamVector:
        """
        Out-of-core ``fit_params``: streams the matrix for its value range and histogram.

        Returns:
            ParamVector: The parameters, tagged with the data range
        """
        value_range = HistIOService.value_range_stream(spec)
        centroids, density = HistIOService.value_histogram_stream(spec, bins, value_range)
        return Chi2DirectService.fit_params_from_histogram(centroids, density, N, value_range)

    @staticmethod
    def fit_params_from_histogram(centroids: np.ndarray, density: np.ndarray, N: int,
                                  data_range: Optional[tuple[float, float]] = None) -> ParamVector:
        """
        Fit parameters from a precomputed value histogram.

        Args:
            centroids: Bin centroids inside the data range
            density: Fraction of nonzero entries per bin
            N: Number of parameters
            data_range: (min nonzero, max) of the data; the centroid span if omitted

        Returns:
            ParamVector: The parameters, tagged with the data range
        """
        centroids = np.asarray(centroids, dtype=np.float64)
        if N > centroids.size:
            raise ParameterError(f"cannot pick {N} parameters from {centroids.size} bins")
        if data_range is None:
            data_range = (float(centroids.min()), float(centroids.max()))
        picks, peaks = Chi2DirectService.greedy_select(centroids, density, N)
        logger.info("fitted %d parameters; residual peak %.3g -> %.3g", N, peaks[0], peaks[-1])
        return ParamVector(picks, data_range=data_range)

    @staticmethod
    def constant_params(k: float, N: int) -> ParamVector:
        """
        Build the single-parameter series k_1 = ... = k_N = k.

        Its residual shrinks geometrically by ((x-k)/(x+k))^2 per term.
        """
        if N < 0:
            raise ParameterError(f"number of terms must be nonnegative, got {N}")
        return ParamVector(np.full(N, float(k)))

    # ========================================================================
    # EMBEDDING
    # ========================================================================

    @staticmethod
    def coefficients(values: np.ndarray, k: ParamVector) -> np.ndarray:
        """
        Series coefficients of every entry of ``values``.

        Args:
            values: Nonnegative array of any shape
            k: Parameters

        Returns:
            np.ndarray: Array of shape ``values.shape + (N,)``
        """
        values = np.asarray(values, dtype=np.float64)
        out = np.empty(values.shape + (k.terms,))
        lead = np.ones_like(values)
        for q, kq in enumerate(k.k):
            out[..., q] = lead * (2.0 * np.sqrt(kq)) * values / (values + kq)
            lead = lead * (values - kq) / (values + kq)
        return out

    @staticmethod
    def direct_embed(x, k: ParamVector) -> np.ndarray:
        """
        Embed one histogram row.

        Args:
            x: Row of d nonnegative values
            k: Parameters (N terms)

        Returns:
            np.ndarray: N*d coefficients, grouped by input dimension
            (the N coefficients of x_0 first)
        """
        row = _as_row(x)
        return Chi2DirectService.coefficients(row, k).reshape(-1)

    @staticmethod
    def embed_matrix(X: HistogramMatrix, k: ParamVector, threads: int = 1) -> np.ndarray:
        """
        Embed every row of X.

        Args:
            X: (n, d) histogram matrix
            k: Parameters (N terms)
            threads: Worker threads over row blocks

        Returns:
            np.ndarray: (n, N*d) embedding, row i equal to ``direct_embed(X[i], k)``
        """
        def embed(block: np.ndarray) -> np.ndarray:
            return Chi2DirectService.coefficients(block, k).reshape(block.shape[0], -1)

        return map_row_blocks(embed, X.data, threads)

    # ========================================================================
    # RESIDUALS
    # ========================================================================

    @staticmethod
    def nterm_error_exact(x: Scalar, y: Scalar, k: ParamVector) -> Scalar:
        """
        Exact N-term residual 2xy/(x+y) - <c(x), c(y)> for scalars.

        Broadcasts over array arguments. The residual at x = y = 0 is 0.

        Args:
            x: Nonnegative value(s)
            y: Nonnegative value(s)
            k: Parameters

        Returns:
            float or np.ndarray: The residual
        """
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if np.any(x < 0) or np.any(y < 0):
            raise ParameterError("residual arguments must be nonnegative")
        factor = np.ones(np.broadcast(x, y).shape)
        for kq in k.k:
            factor = factor * (x - kq) * (y - kq) / ((x + kq) * (y + kq))
        return _scalar(factor * _harmonic(x, y))

    @staticmethod
    def error_bound(x: Scalar, k: ParamVector) -> Scalar:
        """
        Signed bound 2 prod (x-k_q)/(x+k_q) * x/(x+1) on the residual over y in [0, 1].

        Callers compare magnitudes: |nterm_error_exact(x, y, k)| <= |error_bound(x, k)|.
        """
        x = np.asarray(x, dtype=np.float64)
        if np.any(x < 0):
            raise ParameterError("bound argument must be nonnegative")
        factor = np.ones_like(x)
        for kq in k.k:
            factor = factor * (x - kq) / (x + kq)
        return _scalar(2.0 * factor * x / (x + 1.0))

    @staticmethod
    def max_residual(xs: np.ndarray, k: ParamVector) -> float:
        """
        Largest |residual| over all pairs of a scalar grid.

        Args:
            xs: Grid values
            k: Parameters

        Returns:
            float: max over (x, y) in xs x xs of |nterm_error_exact(x, y, k)|
        """
        xs = np.asarray(xs, dtype=np.float64)
        return float(np.abs(Chi2DirectService.nterm_error_exact(xs[:, None], xs[None, :], k)).max())
