"""
Chebyshev chi2 series service.

Writing 2xy/(x+y) = sqrt(xy) sech((log y - log x)/2) and changing variable
to z in [0, pi] turns the similarity into a Fourier series in z. The
coefficients of one argument follow a three-term recurrence in L = log x::

    d_0 = 2x/(x+1)
    d_1 = -(sqrt(2) L / pi) d_0
    d_q = [(-1)^q (2L/pi) d_{q-1} + (q-2) d_{q-2}] / q

and sum_q d_q(x) d_q(y) converges to 2xy/(x+y). The cosine/sine
coefficients a_q, b_q and a quadrature of their defining integrals are
exposed for cross-checking.
"""

import logging
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from chi2map.exceptions import LogSingularity, ParameterError
from chi2map.models.histogram import HistogramMatrix
from chi2map.models.series import ConvergenceProfile, FourierCoeffs
from chi2map.services.workers import map_row_blocks

logger = logging.getLogger(__name__)

DEFAULT_FLOOR = 1e-12


class ChebyshevService:
    """
    Service class for the Chebyshev-style chi2 feature map.

    Provides methods for:
    - The d_q embedding of rows and matrices
    - The a_q/b_q Fourier coefficients by recurrence, from an embedding and by quadrature
    - Convergence profiling of the truncated series
    """

    # ========================================================================
    # EMBEDDING
    # ========================================================================

    @staticmethod
    def coefficients(values: np.ndarray, N: int, floor: float = DEFAULT_FLOOR) -> np.ndarray:
        """
        Compute d_0..d_N for every entry of ``values``.

        Entries below ``floor`` map to the zero vector.

        Args:
            values: Nonnegative array of any shape
            N: Highest coefficient index
            floor: Zero threshold for log x

        Returns:
            np.ndarray: Array of shape ``values.shape + (N + 1,)``
        """
        if N < 0:
            raise ParameterError(f"number of terms must be nonnegative, got {N}")
        values = np.asarray(values, dtype=np.float64)
        live = values >= floor if floor > 0 else values > 0
        x = np.where(live, values, 0.0)
        log_x = np.log(np.where(live, values, 1.0))
        step = 2.0 * log_x / np.pi

        out = np.zeros(values.shape + (N + 1,))
        out[..., 0] = 2.0 * x / (x + 1.0)
        if N >= 1:
            out[..., 1] = -(np.sqrt(2.0) * log_x / np.pi) * out[..., 0]
        for q in range(2, N + 1):
            sign = 1.0 if q % 2 == 0 else -1.0
            out[..., q] = (sign * step * out[..., q - 1] + (q - 2) * out[..., q - 2]) / q
        return out

    @staticmethod
    def cheb_embed(x, N: int, floor: float = DEFAULT_FLOOR) -> np.ndarray:
        """
        Embed one histogram row.

        Args:
            x: Row of d nonnegative values
            N: Highest coefficient index
            floor: Values below this are treated as 0

        Returns:
            np.ndarray: (N+1)*d coefficients grouped by input dimension

        Example:
            ChebyshevService.cheb_embed([1.0], 3)  # -> [1, 0, 0, 0]
        """
        row = HistogramMatrix(np.asarray(x, dtype=np.float64).reshape(1, -1)).data[0]
        return ChebyshevService.coefficients(row, N, floor).reshape(-1)

    @staticmethod
    def cheb_embed_matrix(X: HistogramMatrix, N: int, floor: float = DEFAULT_FLOOR,
                          threads: int = 1) -> np.ndarray:
        """
        Embed every row of X.

        Returns:
            np.ndarray: (n, (N+1)*d) embedding
        """
        def embed(block: np.ndarray) -> np.ndarray:
            return ChebyshevService.coefficients(block, N, floor).reshape(block.shape[0], -1)

        return map_row_blocks(embed, X.data, threads)

    # ========================================================================
    # FOURIER COEFFICIENTS
    # ========================================================================

    @staticmethod
    def fourier_coeffs_recurrence(x: float, N: int) -> FourierCoeffs:
        """
        Compute a_0..a_N and b_0..b_N by integration-by-parts recurrence.

        With w = log(x)/pi: a_0 = 4 sqrt(x)/(x+1), b_1 = -w a_0, and for k >= 1

            b_{k+1} = [(k-1) b_{k-1} - 2w a_k] / (k+1)    (k even)
            a_{k+1} = [2w b_k + (k-1) a_{k-1}] / (k+1)    (k odd)

        Args:
            x: Point in (0, 1) or (1, inf)
            N: Highest index, at least 1

        Returns:
            FourierCoeffs: a with zero odd entries, b with zero even entries

        Raises:
            ParameterError: If x <= 0 or N < 1
            LogSingularity: If x == 1
        """
        if not x > 0:
            raise ParameterError(f"coefficients need x > 0, got {x}")
        if N < 1:
            raise ParameterError(f"need at least one term, got {N}")
        if x == 1.0:
            raise LogSingularity("log x vanishes at x = 1; use the embedding limit instead")
        w = np.log(x) / np.pi
        a = np.zeros(N + 1)
        b = np.zeros(N + 1)
        a[0] = 4.0 * np.sqrt(x) / (x + 1.0)
        b[1] = -w * a[0]
        for k in range(1, N):
            if k % 2 == 0:
                b[k + 1] = ((k - 1) * b[k - 1] - 2.0 * w * a[k]) / (k + 1)
            else:
                a[k + 1] = (2.0 * w * b[k] + (k - 1) * a[k - 1]) / (k + 1)
        return FourierCoeffs(a=a, b=b, x=x)

    @staticmethod
    def coefficients_from_embedding(d: np.ndarray, x: float) -> FourierCoeffs:
        """
        Recover a_q/b_q from the scalar embedding d_0..d_N of x.

        The embedding absorbs the normalization: d_0 = sqrt(x) a_0 / 2 and
        d_q = sqrt(x) s_q / sqrt(2), where s_q is a_q for even q and b_q for odd q.

        Args:
            d: (N+1,) embedding of the scalar x
            x: Positive value the embedding was computed at

        Returns:
            FourierCoeffs: The reconstructed coefficients
        """
        if not x > 0:
            raise ParameterError(f"coefficients need x > 0, got {x}")
        d = np.asarray(d, dtype=np.float64).ravel()
        s = np.sqrt(2.0) * d / np.sqrt(x)
        s[0] = 2.0 * d[0] / np.sqrt(x)
        a = np.zeros_like(s)
        b = np.zeros_like(s)
        a[0::2] = s[0::2]
        b[1::2] = s[1::2]
        return FourierCoeffs(a=a, b=b, x=x)

    @staticmethod
    def quadrature_coefficients(x: float, q: int, bound: float = 50.0) -> tuple[float, float]:
        """
        Evaluate a_q(x) and b_q(x) from their defining integrals.

        The integrals over z in [0, pi] oscillate without bound as z -> 0.
        Substituting t = log tan(z/2) (dz = sech t dt) moves that point to
        t -> -inf, where sech t damps the integrand, giving

            a_q = 2/pi int cos(w t) cos(q z(t)) sech t dt
            b_q = 2/pi int sin(w t) cos(q z(t)) sech t dt

        with w = log(x)/pi and z(t) = 2 arctan(e^t).

        Args:
            x: Positive evaluation point
            q: Coefficient index
            bound: Integration runs over [-bound, bound]

        Returns:
            tuple: (a_q, b_q)
        """
        if not x > 0:
            raise ParameterError(f"coefficients need x > 0, got {x}")
        w = np.log(x) / np.pi

        def base(t: float) -> float:
            return np.cos(q * 2.0 * np.arctan(np.exp(t))) / np.cosh(t)

        opts = dict(limit=500, epsabs=1e-12, epsrel=1e-10)
        a_q, _ = integrate.quad(lambda t: np.cos(w * t) * base(t), -bound, bound, **opts)
        b_q, _ = integrate.quad(lambda t: np.sin(w * t) * base(t), -bound, bound, **opts)
        return 2.0 / np.pi * a_q, 2.0 / np.pi * b_q

    @staticmethod
    def sech_identity_check(x: float, y: float) -> float:
        """
        Evaluate sqrt(xy) sech((log y - log x)/2), which equals 2xy/(x+y).

        Args:
            x: Positive value
            y: Positive value

        Returns:
            float: The similarity, symmetric in (x, y)
        """
        if not (x > 0 and y > 0):
            raise ParameterError(f"sech form needs positive arguments, got ({x}, {y})")
        delta = abs(np.log(y) - np.log(x))
        return float(np.sqrt(x * y) / np.cosh(delta / 2.0))

    # ========================================================================
    # CONVERGENCE
    # ========================================================================

    @staticmethod
    def cheb_convergence_profile(xs: Sequence[float], N_max: int, fit_from: int = 4,
                                 terms: Optional[Sequence[int]] = None) -> ConvergenceProfile:
        """
        Measure the worst residual of the truncated series on a scalar grid.

        Args:
            xs: Grid values in (0, 1]
            N_max: Largest term count
            fit_from: Smallest N used in the log-log slope fit
            terms: Term counts to report; defaults to 0..N_max

        Returns:
            ConvergenceProfile: Max residual per N, its log-log slope over
            N >= fit_from, and the constant C of the 1/N bound

        Raises:
            ParameterError: If a grid value lies outside (0, 1]
        """
        xs = np.asarray(xs, dtype=np.float64).ravel()
        if xs.size == 0 or xs.min() <= 0 or xs.max() > 1:
            raise ParameterError("convergence grid must lie in (0, 1]")
        terms = np.arange(N_max + 1) if terms is None else np.asarray(terms, dtype=np.int64)
        if terms.size == 0 or terms.min() < 0 or terms.max() > N_max:
            raise ParameterError(f"term counts must lie in [0, {N_max}]")

        coeffs = ChebyshevService.coefficients(xs, N_max, floor=0.0)
        products = np.cumsum(coeffs[:, None, :] * coeffs[None, :, :], axis=2)
        exact = 2.0 * np.outer(xs, xs) / (xs[:, None] + xs[None, :])
        residual = np.abs(exact[:, :, None] - products)

        max_residual = residual.max(axis=(0, 1))[terms]
        scale = np.sqrt(np.outer(xs, xs))[:, :, None]
        positive = np.arange(1, N_max + 1)
        constant = float((residual[:, :, 1:] * positive / scale).max()) if N_max >= 1 else 0.0

        fit = (terms >= max(fit_from, 1)) & (max_residual > 0)
        if fit.sum() >= 2:
            slope = float(np.polyfit(np.log(terms[fit]), np.log(max_residual[fit]), 1)[0])
        else:
            slope = float("nan")
        logger.debug("chebyshev profile: N<=%d slope %.3f C %.3g", N_max, slope, constant)
        return ConvergenceProfile(terms=terms, max_residual=max_residual, slope=slope,
                                  constant=constant)
