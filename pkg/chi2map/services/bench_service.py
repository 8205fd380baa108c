"""
Benchmark service.

Produces the approximation-error curves and the desk-scale accuracy
comparison as BenchReport rows:

- chi2 error of the direct and Chebyshev series versus the term count
- Gram-matrix error of the RF pipeline versus the exact exp-chi2 kernel over seeds
- accuracy of PCA + ridge pipelines versus exact-kernel ridge on synthetic data
"""

import logging
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from chi2map.exceptions import NoNonzeroValues, ParameterError
from chi2map.models.histogram import HistogramMatrix, LabelMatrix
from chi2map.schemas.bench_schema import BenchReport
from chi2map.schemas.pipeline_schema import EmbeddingMethod
from chi2map.services.chebyshev_service import ChebyshevService
from chi2map.services.chi2direct_service import Chi2DirectService
from chi2map.services.histio_service import HistIOService
from chi2map.services.oocpca_service import OOCPCAService
from chi2map.services.pipeline_service import PipelineService
from chi2map.services.rfmap_service import RFMapService

logger = logging.getLogger(__name__)


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> Optional[float]:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    keep = (xs > 0) & (ys > 0)
    if keep.sum() < 2:
        return None
    return float(np.polyfit(np.log(xs[keep]), np.log(ys[keep]), 1)[0])


class BenchService:
    """
    Service class for approximation and accuracy benchmarks.

    Provides methods for:
    - Scalar chi2 approximation error per method and term count
    - RF Gram-matrix error per method, dimension and seed
    - Synthetic Dirichlet data and the end-to-end accuracy comparison
    """

    # ========================================================================
    # CHI2 ERROR
    # ========================================================================

    @staticmethod
    def sample_value_pairs(X: HistogramMatrix, pairs: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """
        Draw scalar pairs (x, y) from the nonzero entries of X.

        Returns:
            tuple: Two arrays of length ``pairs``
        """
        values = X.nonzero_values()
        if values.size == 0:
            raise NoNonzeroValues("matrix has no nonzero values")
        rng = _rng(seed)
        return rng.choice(values, size=pairs), rng.choice(values, size=pairs)

    @staticmethod
    def series_error(method: EmbeddingMethod, x: np.ndarray, y: np.ndarray, N: int,
                     X: Optional[HistogramMatrix] = None, bins: int = 1000) -> np.ndarray:
        """
        Absolute error |2xy/(x+y) - <c(x), c(y)>| of one series on scalar pairs.

        Direct-series parameters are fitted on X; the Chebyshev series uses
        coefficients d_0..d_N.

        Returns:
            np.ndarray: Error per pair
        """
        method = EmbeddingMethod(method)
        if method is EmbeddingMethod.DIRECT:
            if X is None:
                raise ParameterError("the direct series needs data to fit its parameters")
            k = Chi2DirectService.fit_params(X, N, bins)
            cx = Chi2DirectService.coefficients(x, k)
            cy = Chi2DirectService.coefficients(y, k)
        else:
            cx = ChebyshevService.coefficients(x, N, floor=0.0)
            cy = ChebyshevService.coefficients(y, N, floor=0.0)
        exact = 2.0 * x * y / (x + y)
        return np.abs(exact - (cx * cy).sum(axis=-1))

    @staticmethod
    def bench_chi2_error(X: HistogramMatrix, methods: Sequence[str] = ("direct", "chebyshev"),
                         terms_list: Sequence[int] = tuple(range(1, 11)), bins: int = 1000,
                         pairs: int = 2000, seed: int = 0) -> BenchReport:
        """
        Measure scalar chi2 approximation error against the term count.

        Rows: ``max_abs_error`` and ``mean_abs_error`` per (method, N), plus a
        ``loglog_slope`` row per method fitted on the max errors.

        Args:
            X: Data whose nonzero values are sampled (and fitted for the direct series)
            methods: Series to compare
            terms_list: Term counts N
            bins: Histogram bins for parameter fitting
            pairs: Number of sampled scalar pairs
            seed: Sampling seed

        Returns:
            BenchReport: The measurements
        """
        x, y = BenchService.sample_value_pairs(X, pairs, seed)
        report = BenchReport()
        for name in methods:
            method = EmbeddingMethod(name)
            worst = []
            for N in terms_list:
                errors = BenchService.series_error(method, x, y, N, X, bins)
                worst.append(float(errors.max()))
                report.add(method.value, "max_abs_error", errors.max(), N=N, seed=seed)
                report.add(method.value, "mean_abs_error", errors.mean(), N=N, seed=seed)
            slope = _loglog_slope(terms_list, worst)
            if slope is not None:
                report.add(method.value, "loglog_slope", slope, seed=seed)
            logger.info("%s: max error %.3g at N=%d", method.value, worst[-1], terms_list[-1])
        return report

    # ========================================================================
    # KERNEL ERROR
    # ========================================================================

    @staticmethod
    def bench_kernel_error(X: HistogramMatrix, methods: Sequence[str] = ("direct", "chebyshev"),
                           terms: int = 5, dims_list: Sequence[int] = (1000, 3000, 7000),
                           seeds: Sequence[int] = tuple(range(50)), gamma: float = 0.75,
                           bins: int = 1000, rows: int = 20, sample_seed: int = 0) -> BenchReport:
        """
        Measure Gram-matrix error of the RF pipeline against exp(-2 gamma chi2).

        Per (method, D, seed) rows ``max_abs_error`` and ``mean_abs_error``; per
        (method, D) aggregates over seeds (seed -1) ``max_abs_error_mean``,
        ``max_abs_error_std`` and ``max_abs_error_median``; per method a
        ``rate_slope`` row, the log-log slope of the median against D.

        Args:
            X: Data; ``rows`` rows are sampled for the Gram matrix
            methods: Chi2 embeddings to compare
            terms: Series terms N
            dims_list: RF dimensions D
            seeds: Basis seeds
            gamma: Gaussian parameter of the lifting
            bins: Histogram bins for parameter fitting
            rows: Rows in the Gram sample
            sample_seed: Seed of the row sample

        Returns:
            BenchReport: The measurements
        """
        rows = min(rows, X.rows)
        index = np.sort(_rng(sample_seed).choice(X.rows, size=rows, replace=False))
        sample = HistogramMatrix(X.data[index])
        exact = Chi2DirectService.exact_exp_chi2_gram(sample, beta=2.0 * gamma)
        report = BenchReport()
        for name in methods:
            method = EmbeddingMethod(name)
            base = PipelineService.build(X, method, terms, None, gamma, 0, bins)
            C = base.embed(sample)
            medians = []
            for D in dims_list:
                worst = []
                for seed in seeds:
                    basis = RFMapService.sample_basis(C.shape[1], D, gamma, seed)
                    Z = RFMapService.rf_transform(C, basis)
                    errors = np.abs(Z @ Z.T - exact)
                    worst.append(float(errors.max()))
                    report.add(method.value, "max_abs_error", errors.max(), N=terms, D=D, seed=seed)
                    report.add(method.value, "mean_abs_error", errors.mean(), N=terms, D=D, seed=seed)
                worst = np.array(worst)
                medians.append(float(np.median(worst)))
                report.add(method.value, "max_abs_error_mean", worst.mean(), N=terms, D=D)
                report.add(method.value, "max_abs_error_std", worst.std(), N=terms, D=D)
                report.add(method.value, "max_abs_error_median", medians[-1], N=terms, D=D)
                logger.info("%s D=%d: median max error %.4f", method.value, D, medians[-1])
            slope = _loglog_slope(dims_list, medians)
            if slope is not None:
                report.add(method.value, "rate_slope", slope, N=terms)
        return report

    # ========================================================================
    # END TO END
    # ========================================================================

    @staticmethod
    def synthetic_dirichlet(n: int = 2000, d: int = 64, classes: int = 5, boost: float = 1.0,
                            seed: int = 0) -> tuple[HistogramMatrix, np.ndarray]:
        """
        Sample a labeled mixture of Dirichlet histograms.

        Every class has concentration 1 on all bins plus ``boost`` on its own
        contiguous block of about d / classes bins. Classes are assigned
        round-robin, so they are balanced.

        Returns:
            tuple: (L1-normalized (n, d) matrix, class id per row)
        """
        if classes < 1 or d < classes or n < 1:
            raise ParameterError(f"need n >= 1 and d >= classes >= 1, got n={n}, d={d}, classes={classes}")
        rng = _rng(seed)
        ids = np.arange(n) % classes
        blocks = np.array_split(np.arange(d), classes)
        alphas = np.ones((classes, d))
        for c, block in enumerate(blocks):
            alphas[c, block] += boost
        data = np.vstack([rng.dirichlet(alphas[c]) for c in ids])
        return HistogramMatrix(data), ids

    @staticmethod
    def exact_kernel_ridge(X_train: HistogramMatrix, labels: LabelMatrix, X_test: HistogramMatrix,
                           beta: float = 1.5, lambda_: float = 1.0) -> np.ndarray:
        """
        Kernel ridge regression with the exact exp-chi2 kernel (dual form).

        Labels are centered; the mean is added back to the scores.

        Returns:
            np.ndarray: (test rows, classes) scores
        """
        K = Chi2DirectService.exact_exp_chi2_gram(X_train, beta=beta)
        label_mean = labels.data.mean(axis=0)
        alpha = linalg.solve(K + lambda_ * np.eye(X_train.rows), labels.data - label_mean,
                             assume_a="pos")
        return Chi2DirectService.exact_exp_chi2_gram(X_test, X_train, beta=beta) @ alpha + label_mean

    @staticmethod
    def accuracy(scores: np.ndarray, class_ids: np.ndarray) -> float:
        """Fraction of rows whose highest score is at the true class."""
        return float(np.mean(np.argmax(scores, axis=1) == np.asarray(class_ids)))

    @staticmethod
    def end2end(X_train: HistogramMatrix, ids_train: np.ndarray, X_test: HistogramMatrix,
                ids_test: np.ndarray, method: str = "direct", terms: int = 5,
                dims_list: Sequence[int] = (1000, 7000), seeds: Sequence[int] = tuple(range(5)),
                gamma: float = 0.75, lambda_: float = 1.0, oversample: int = 3,
                chunk_rows: int = 4096, bins: int = 1000, threads: int = 1) -> BenchReport:
        """
        Compare exact-kernel ridge with the approximate pipelines.

        Variants, all one-vs-all ridge:

        - ``exact``: dual ridge with the exact exp-chi2 kernel
        - ``<method>``: D random features, ridge on all of them
        - ``pca-<method>``: oversample * D random features, PCA down to D

        Rows: ``accuracy`` per (variant, D, seed) and ``accuracy_median`` per
        (variant, D) with seed -1.

        Returns:
            BenchReport: The measurements
        """
        method = EmbeddingMethod(method)
        classes = int(max(ids_train.max(), ids_test.max())) + 1
        labels = LabelMatrix.one_vs_all(ids_train, classes)
        report = BenchReport()

        scores = BenchService.exact_kernel_ridge(X_train, labels, X_test, 2.0 * gamma, lambda_)
        report.add("exact", "accuracy", BenchService.accuracy(scores, ids_test))

        train_spec = HistIOService.chunk_spec(X_train, chunk_rows)
        test_spec = HistIOService.chunk_spec(X_test, chunk_rows)
        params = Chi2DirectService.fit_params(X_train, terms, bins) if method is EmbeddingMethod.DIRECT else None
        variants = [(method.value, 1), (f"pca-{method.value}", oversample)]
        for variant, factor in variants:
            for D in dims_list:
                accuracies = []
                for seed in seeds:
                    pipeline = PipelineService.build(train_spec, method, terms, factor * D, gamma,
                                                     seed, bins, params=params)
                    acc = OOCPCAService.accumulate(train_spec, pipeline, labels, threads=threads)
                    pca = OOCPCAService.eig_centered(acc, D, (pipeline.fingerprint,))
                    ridge = OOCPCAService.ridge_after_pca(acc, pca, lambda_)
                    scores = OOCPCAService.predict_stream(test_spec, pipeline, ridge, pca, threads)
                    accuracies.append(BenchService.accuracy(scores, ids_test))
                    report.add(variant, "accuracy", accuracies[-1], N=terms, D=D, seed=seed)
                report.add(variant, "accuracy_median", float(np.median(accuracies)), N=terms, D=D)
                logger.info("%s D=%d: median accuracy %.4f", variant, D, np.median(accuracies))
        return report
