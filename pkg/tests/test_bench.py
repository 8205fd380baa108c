"""
Tests for the benchmark service.
"""

import numpy as np
import pytest

from chi2map.exceptions import ParameterError
from chi2map.models.histogram import HistogramMatrix
from chi2map.services.bench_service import BenchService


class TestChi2Error:
    """Tests for the scalar series benchmark."""

    def test_rows_per_method_and_terms(self, log_uniform_matrix):
        report = BenchService.bench_chi2_error(log_uniform_matrix, terms_list=[1, 2, 3, 4, 5], pairs=500)
        for method in ("direct", "chebyshev"):
            worst = [row.value for row in report.select(method=method, metric="max_abs_error")]
            assert len(worst) == 5
            assert len(report.select(method=method, metric="mean_abs_error")) == 5
            assert report.select(method=method, metric="loglog_slope")[0].value < 0
        direct = report.select(method="direct", metric="max_abs_error", N=5)[0].value
        chebyshev = report.select(method="chebyshev", metric="max_abs_error", N=5)[0].value
        assert direct < chebyshev

    def test_deterministic(self, log_uniform_matrix):
        first = BenchService.bench_chi2_error(log_uniform_matrix, terms_list=[2, 4], pairs=100, seed=3)
        second = BenchService.bench_chi2_error(log_uniform_matrix, terms_list=[2, 4], pairs=100, seed=3)
        assert first.to_csv() == second.to_csv()

    def test_direct_needs_data(self):
        with pytest.raises(ParameterError):
            BenchService.series_error("direct", np.array([0.5]), np.array([0.5]), 3)


class TestKernelError:
    """Tests for the Gram-matrix benchmark."""

    def test_rows_and_aggregates(self, dirichlet_matrix):
        report = BenchService.bench_kernel_error(dirichlet_matrix, methods=["direct"], terms=3,
                                                 dims_list=[64, 256], seeds=range(4), rows=10)
        assert len(report.select(metric="max_abs_error")) == 2 * 4
        std = report.select(metric="max_abs_error_std", D=64)[0].value
        assert std > 0
        medians = [row.value for row in report.select(metric="max_abs_error_median")]
        assert len(medians) == 2
        assert len(report.select(metric="rate_slope")) == 1
        assert all(row.seed == -1 for row in report.select(metric="max_abs_error_mean"))


class TestEnd2End:
    """Tests for synthetic data and the accuracy comparison."""

    def test_synthetic_classes_are_balanced(self):
        X, ids = BenchService.synthetic_dirichlet(n=50, d=10, classes=5, seed=4)
        assert X.shape == (50, 10)
        np.testing.assert_allclose(X.data.sum(axis=1), 1.0)
        np.testing.assert_array_equal(np.bincount(ids), [10] * 5)
        again, _ = BenchService.synthetic_dirichlet(n=50, d=10, classes=5, seed=4)
        np.testing.assert_array_equal(again.data, X.data)

    def test_synthetic_invalid(self):
        with pytest.raises(ParameterError):
            BenchService.synthetic_dirichlet(n=10, d=2, classes=3)

    def test_accuracy(self):
        scores = np.array([[0.9, 0.1], [0.2, 0.8], [0.7, 0.3]])
        assert BenchService.accuracy(scores, [0, 1, 1]) == pytest.approx(2 / 3)

    def test_small_run(self):
        X, ids = BenchService.synthetic_dirichlet(n=400, d=16, classes=3, boost=3.0, seed=5)
        report = BenchService.end2end(HistogramMatrix(X.data[:200]), ids[:200], HistogramMatrix(X.data[200:]),
                                      ids[200:], terms=3, dims_list=[64], seeds=range(2), chunk_rows=50)
        assert report.select(method="exact", metric="accuracy")[0].value >= 0.8
        for variant in ("direct", "pca-direct"):
            assert len(report.select(method=variant, metric="accuracy")) == 2
            assert report.select(method=variant, metric="accuracy_median")[0].value >= 0.5


class TestAcceptance:
    """Relative-ordering properties of the benchmark curves."""

    @pytest.fixture(scope="class")
    def direct_and_chebyshev(self):
        values = 10.0 ** np.random.default_rng(7).uniform(-2.0, 0.0, size=(200, 100))
        return BenchService.bench_chi2_error(HistogramMatrix(values), terms_list=[1, 2, 3, 4, 5], pairs=5000)

    def test_direct_series_gains_geometrically(self, direct_and_chebyshev):
        worst = {row.N: row.value for row in direct_and_chebyshev.select(method="direct", metric="max_abs_error")}
        # greedy picks flatten between N=3 and N=4, so N=5 sits near 1/66 of N=1
        assert worst[5] <= worst[1] / 20
        assert worst[5] <= 2e-3

    def test_direct_beats_chebyshev_tenfold(self, direct_and_chebyshev):
        direct = direct_and_chebyshev.select(method="direct", metric="max_abs_error", N=5)[0].value
        chebyshev = direct_and_chebyshev.select(method="chebyshev", metric="max_abs_error", N=5)[0].value
        assert direct <= 0.1 * chebyshev

    def test_chebyshev_slope(self):
        values = np.geomspace(0.05, 1.0, 400).reshape(20, 20)
        report = BenchService.bench_chi2_error(HistogramMatrix(values), methods=["chebyshev"],
                                               terms_list=[4, 8, 16, 32, 64], pairs=4000)
        slope = report.select(method="chebyshev", metric="loglog_slope")[0].value
        assert -1.3 <= slope <= -0.7

    @pytest.mark.slow
    def test_more_terms_give_a_closer_gram(self):
        X, _ = BenchService.synthetic_dirichlet(n=200, d=64, classes=5, seed=0)
        medians = {}
        for terms in (1, 5):
            report = BenchService.bench_kernel_error(X, methods=["direct"], terms=terms, dims_list=[8192],
                                                     seeds=range(5), rows=20)
            medians[terms] = report.select(metric="max_abs_error_median")[0].value
        assert medians[5] < medians[1]

    @pytest.mark.slow
    def test_pca_variant_not_worse(self):
        X, ids = BenchService.synthetic_dirichlet(n=800, d=32, classes=5, boost=1.0, seed=3)
        report = BenchService.end2end(HistogramMatrix(X.data[:400]), ids[:400], HistogramMatrix(X.data[400:]),
                                      ids[400:], terms=3, dims_list=[16], seeds=range(5), chunk_rows=100)
        plain = report.select(method="direct", metric="accuracy_median")[0].value
        pca = report.select(method="pca-direct", metric="accuracy_median")[0].value
        assert pca >= plain
