"""
Tests for streaming moments, PCA, ridge regression and calibration.
"""

import time

import numpy as np
import pytest
from scipy import linalg

from chi2map.exceptions import (
    AlignmentError, ConsistencyError, DegenerateError, ParameterError, SingularError, ValidationError,
)
from chi2map.models.histogram import HistogramMatrix, LabelMatrix
from chi2map.models.pca import MomentAccumulator
from chi2map.services.bench_service import BenchService
from chi2map.services.histio_service import HistIOService
from chi2map.services.oocpca_service import OOCPCAService
from chi2map.services.pipeline_service import PipelineService


def dense_ridge(Z, y, lambda_):
    """Ridge with an unregularized intercept, solved directly on all features."""
    mean = Z.mean(axis=0)
    Zc = Z - mean
    w = linalg.solve(Zc.T @ Zc + lambda_ * np.eye(Z.shape[1]), Zc.T @ y, assume_a="pos")
    return w, y.mean(axis=0) - mean @ w


@pytest.fixture
def flat_pipeline(labeled_task):
    X, _, _ = labeled_task
    return PipelineService.build(X, "chebyshev", 2, None, 0.75, 0)


@pytest.fixture
def fitted(labeled_task, flat_pipeline):
    X, _, labels = labeled_task
    spec = HistIOService.chunk_spec(X, 50)
    acc = OOCPCAService.accumulate(spec, flat_pipeline, labels)
    pca = OOCPCAService.eig_centered(acc, acc.dims, (flat_pipeline.fingerprint,))
    return spec, acc, pca


@pytest.fixture
def two_kernels(labeled_task):
    """Direct and Chebyshev embeddings of the same rows, without lifting: (specs, pipelines)."""
    X, _, _ = labeled_task
    pipelines = [PipelineService.build(X, "direct", 2, None, 0.75, 0),
                 PipelineService.build(X, "chebyshev", 2, None, 0.75, 0)]
    return [HistIOService.chunk_spec(X, 60), HistIOService.chunk_spec(X, 60)], pipelines


class TestAccumulate:
    """Tests for moment accumulation."""

    def test_matches_dense_moments(self, labeled_task, flat_pipeline, fitted):
        X, _, labels = labeled_task
        _, acc, _ = fitted
        Z = flat_pipeline.transform(X)
        np.testing.assert_allclose(acc.H, Z.T @ Z, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(acc.m, Z.sum(axis=0), rtol=1e-10)
        np.testing.assert_allclose(acc.v, Z.T @ labels.data, rtol=1e-10, atol=1e-12)
        assert (acc.n, acc.n_labeled) == (240, 240)

    def test_chunk_size_does_not_matter(self, labeled_task, flat_pipeline, fitted):
        X, _, labels = labeled_task
        _, acc, _ = fitted
        small = OOCPCAService.accumulate(HistIOService.chunk_spec(X, 7), flat_pipeline, labels)
        np.testing.assert_allclose(small.H, acc.H, rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(small.v, acc.v, rtol=1e-9, atol=1e-12)

    def test_threads_do_not_matter(self, labeled_task, flat_pipeline, fitted):
        X, _, labels = labeled_task
        spec, acc, _ = fitted
        threaded = OOCPCAService.accumulate(spec, flat_pipeline, labels, threads=4)
        np.testing.assert_allclose(threaded.H, acc.H, rtol=1e-12, atol=1e-14)
        assert threaded.n == acc.n

    def test_label_rows_must_match(self, labeled_task, flat_pipeline):
        X, _, labels = labeled_task
        with pytest.raises(AlignmentError):
            OOCPCAService.accumulate(HistIOService.chunk_spec(X, 50), flat_pipeline, labels.slice(0, 100))

    def test_kernels_must_align(self, labeled_task, flat_pipeline):
        X, _, _ = labeled_task
        specs = [HistIOService.chunk_spec(X, 50), HistIOService.chunk_spec(HistogramMatrix(X.data[:100]), 50)]
        with pytest.raises(AlignmentError):
            OOCPCAService.accumulate_kernels(specs, [flat_pipeline, flat_pipeline])

    def test_unlabeled_rows_only_add_to_feature_moments(self, labeled_task, flat_pipeline, fitted):
        X, _, _ = labeled_task
        spec, acc, _ = fitted
        v_before = acc.v.copy()
        extra = OOCPCAService.accumulate(spec, flat_pipeline, classes=acc.classes)
        merged = MomentAccumulator.empty(acc.dims, acc.classes).merge(acc).merge(extra)
        np.testing.assert_array_equal(merged.v, v_before)
        assert (merged.n, merged.n_labeled) == (480, 240)
        np.testing.assert_allclose(merged.label_mean, acc.label_mean)
        np.testing.assert_array_equal(merged.m_labeled, acc.m)

    def test_kernels_get_separate_moments(self, labeled_task, two_kernels):
        X, _, labels = labeled_task
        specs, pipelines = two_kernels
        accs = OOCPCAService.accumulate_kernels(specs, pipelines, labels, threads=2)
        assert [a.dims for a in accs] == [16, 24]
        for acc, spec, pipeline in zip(accs, specs, pipelines):
            alone = OOCPCAService.accumulate(spec, pipeline, labels)
            np.testing.assert_allclose(acc.H, alone.H, rtol=1e-12, atol=1e-14)
            np.testing.assert_allclose(acc.v, alone.v, rtol=1e-12, atol=1e-14)
        stacked = MomentAccumulator.concat(accs)
        np.testing.assert_array_equal(stacked.m, np.concatenate([accs[0].m, accs[1].m]))
        assert (stacked.n, stacked.n_labeled, stacked.classes) == (240, 240, 3)


class TestEigCentered:
    """Tests for the eigendecomposition of the centered moments."""

    def test_reconstructs_centered_matrix(self, fitted):
        _, acc, pca = fitted
        rebuilt = pca.U_bar @ np.diag(pca.eigvals) @ pca.U_bar.T
        np.testing.assert_allclose(rebuilt, acc.centered(), atol=1e-9 * pca.eigvals[0])

    def test_orthonormal_and_descending(self, fitted):
        _, _, pca = fitted
        np.testing.assert_allclose(pca.U_bar.T @ pca.U_bar, np.eye(pca.kept), atol=1e-10)
        assert np.all(np.diff(pca.eigvals) <= 0)
        assert np.all(pca.eigvals >= 0)

    def test_matches_eigvalsh(self, fitted):
        _, acc, pca = fitted
        expected = np.clip(np.sort(linalg.eigvalsh(acc.centered()))[::-1], 0.0, None)
        np.testing.assert_allclose(pca.eigvals, expected, atol=1e-9 * expected[0])

    def test_sign_convention(self, fitted):
        _, _, pca = fitted
        for column in pca.U_bar.T:
            first = np.flatnonzero(np.abs(column) > 1e-12 * np.abs(column).max())[0]
            assert column[first] > 0

    def test_leading_subset(self, fitted):
        _, acc, pca = fitted
        top = OOCPCAService.eig_centered(acc, 5)
        assert top.kept == 5
        np.testing.assert_allclose(top.eigvals, pca.eigvals[:5], rtol=1e-9)
        np.testing.assert_allclose(top.U_bar.T @ top.U_bar, np.eye(5), atol=1e-10)

    def test_projection_preserves_gram_up_to_discarded_mass(self, labeled_task, flat_pipeline, fitted):
        X, _, _ = labeled_task
        _, acc, pca = fitted
        Z = flat_pipeline.transform(X)
        Zc = Z - Z.mean(axis=0)
        gram = Zc @ Zc.T
        scale = np.linalg.norm(gram)
        full = pca.project(Z)
        assert np.linalg.norm(full @ full.T - gram) <= 1e-8 * scale

        spectrum = np.clip(np.sort(linalg.eigvalsh(acc.centered()))[::-1], 0.0, None)
        part = OOCPCAService.eig_centered(acc, 10).project(Z)
        gap = np.linalg.norm(gram - part @ part.T)
        assert gap == pytest.approx(np.sqrt(np.sum(spectrum[10:] ** 2)), rel=1e-6, abs=1e-9 * scale)

    def test_single_row_is_degenerate(self, labeled_task, flat_pipeline):
        X, _, _ = labeled_task
        acc = OOCPCAService.accumulate(HistIOService.chunk_spec(HistogramMatrix(X.data[:1]), 1), flat_pipeline)
        with pytest.raises(DegenerateError):
            OOCPCAService.eig_centered(acc, 1)

    def test_identical_rows_have_no_variance(self, labeled_task, flat_pipeline):
        X, _, _ = labeled_task
        same = HistogramMatrix(np.repeat(X.data[:1], 10, axis=0))
        acc = OOCPCAService.accumulate(HistIOService.chunk_spec(same, 4), flat_pipeline)
        pca = OOCPCAService.eig_centered(acc, 3)
        assert np.abs(pca.eigvals).max() <= 1e-10

    @pytest.mark.parametrize("kept", [0, 10_000])
    def test_kept_out_of_range(self, fitted, kept):
        _, acc, _ = fitted
        with pytest.raises(ParameterError):
            OOCPCAService.eig_centered(acc, kept)


class TestRidge:
    """Tests for ridge regression after PCA."""

    def test_full_rank_matches_dense_ridge(self, labeled_task, flat_pipeline, fitted):
        X, _, labels = labeled_task
        _, acc, pca = fitted
        ridge = OOCPCAService.ridge_after_pca(acc, pca, 0.1)
        Z = flat_pipeline.transform(X)
        w, bias = dense_ridge(Z, labels.data, 0.1)
        np.testing.assert_allclose(ridge.w_orig, w, rtol=1e-6, atol=1e-8)
        np.testing.assert_allclose(ridge.bias, bias, rtol=1e-6, atol=1e-8)
        np.testing.assert_allclose(OOCPCAService.predict(ridge, pca, Z), Z @ w + bias, atol=1e-8)

    def test_projected_and_back_projected_scores_agree(self, labeled_task, flat_pipeline, fitted):
        X, _, _ = labeled_task
        spec, acc, _ = fitted
        pca = OOCPCAService.eig_centered(acc, 10)
        ridge = OOCPCAService.ridge_after_pca(acc, pca, 1.0)
        Z = flat_pipeline.transform(X)
        np.testing.assert_allclose(OOCPCAService.predict_projected(ridge, pca, Z),
                                   OOCPCAService.predict(ridge, pca, Z), atol=1e-10)
        np.testing.assert_allclose(OOCPCAService.predict_stream(spec, flat_pipeline, ridge, pca),
                                   OOCPCAService.predict(ridge, pca, Z), atol=1e-12)

    def test_mean_row_scores_label_mean(self, fitted):
        _, acc, pca = fitted
        ridge = OOCPCAService.ridge_after_pca(acc, pca, 0.5)
        np.testing.assert_allclose(OOCPCAService.predict(ridge, pca, pca.mean)[0], acc.label_mean, atol=1e-10)

    def test_unlabeled_rows_do_not_shift_label_centering(self, labeled_task, flat_pipeline, fitted):
        X, _, _ = labeled_task
        spec, _, _ = fitted
        unlabeled = HistIOService.chunk_spec(HistogramMatrix(X.data[:, ::-1]), 50)
        constant = LabelMatrix(np.full((240, 1), 2.5))
        acc = OOCPCAService.accumulate(spec, flat_pipeline, constant)
        acc.merge(OOCPCAService.accumulate(unlabeled, flat_pipeline, classes=1))
        assert not np.allclose(acc.mean, acc.labeled_mean)
        pca = OOCPCAService.eig_centered(acc, acc.dims)
        ridge = OOCPCAService.ridge_after_pca(acc, pca, 0.5)
        assert np.abs(ridge.w).max() <= 1e-9
        np.testing.assert_allclose(ridge.bias, [2.5], atol=1e-9)

    def test_labeled_mean_row_scores_label_mean(self, labeled_task, flat_pipeline, fitted):
        X, _, labels = labeled_task
        spec, _, _ = fitted
        acc = OOCPCAService.accumulate(spec, flat_pipeline, labels)
        acc.merge(OOCPCAService.accumulate(HistIOService.chunk_spec(HistogramMatrix(X.data[:, ::-1]), 50),
                                           flat_pipeline, classes=labels.classes))
        pca = OOCPCAService.eig_centered(acc, 12)
        ridge = OOCPCAService.ridge_after_pca(acc, pca, 0.5)
        np.testing.assert_allclose(OOCPCAService.predict(ridge, pca, acc.labeled_mean)[0], acc.label_mean,
                                   atol=1e-10)

    def test_classes_are_independent(self, labeled_task, flat_pipeline, fitted):
        X, _, labels = labeled_task
        spec, acc, pca = fitted
        joint = OOCPCAService.ridge_after_pca(acc, pca, 0.3)
        for c in range(labels.classes):
            single = OOCPCAService.accumulate(spec, flat_pipeline, LabelMatrix(labels.data[:, [c]]))
            alone = OOCPCAService.ridge_after_pca(single, pca, 0.3)
            np.testing.assert_allclose(alone.w[:, 0], joint.w[:, c], rtol=1e-9, atol=1e-12)

    def test_huge_lambda_gives_constant_scores(self, fitted):
        _, acc, pca = fitted
        ridge = OOCPCAService.ridge_after_pca(acc, pca, 1e12)
        assert np.abs(ridge.w).max() < 1e-8
        np.testing.assert_allclose(ridge.bias, acc.label_mean, atol=1e-6)

    def test_zero_labels_give_zero_weights(self, labeled_task, flat_pipeline, fitted):
        X, _, _ = labeled_task
        spec, _, pca = fitted
        zeros = LabelMatrix(np.zeros((240, 1)))
        acc = OOCPCAService.accumulate(spec, flat_pipeline, zeros)
        ridge = OOCPCAService.ridge_after_pca(acc, pca, 1.0)
        np.testing.assert_array_equal(ridge.w, 0.0)
        np.testing.assert_array_equal(ridge.bias, 0.0)

    def test_unregularized_rank_deficient_solve(self, labeled_task, flat_pipeline):
        X, _, labels = labeled_task
        acc = OOCPCAService.accumulate(HistIOService.chunk_spec(HistogramMatrix(X.data[:10]), 5),
                                       flat_pipeline, labels.slice(0, 10))
        pca = OOCPCAService.eig_centered(acc, acc.dims)
        with pytest.raises(SingularError):
            OOCPCAService.ridge_after_pca(acc, pca, 0.0)
        with pytest.raises(ParameterError):
            OOCPCAService.ridge_after_pca(acc, pca, -1.0)


class TestTwoStage:
    """Tests for the second-pass multi-kernel solve."""

    def test_single_kernel_full_rank_matches_diagonal_solve(self, labeled_task, flat_pipeline, fitted):
        _, _, labels = labeled_task
        spec, acc, pca = fitted
        two_stage = OOCPCAService.two_stage_multikernel(spec, flat_pipeline, pca, labels, 0.1)
        direct = OOCPCAService.ridge_after_pca(acc, pca, 0.1)
        np.testing.assert_allclose(two_stage.w, direct.w, rtol=1e-6, atol=1e-8)
        np.testing.assert_allclose(two_stage.bias, direct.bias, rtol=1e-6, atol=1e-8)

    def test_two_kernels_match_dense_ridge(self, labeled_task, two_kernels):
        X, _, labels = labeled_task
        specs, pipelines = two_kernels
        accs = OOCPCAService.accumulate_kernels(specs, pipelines, labels)
        pca = OOCPCAService.eig_kernels(accs, [16, 24], [p.fingerprint for p in pipelines])
        ridge = OOCPCAService.two_stage_multikernel(specs, pipelines, pca, labels, 0.1)
        Z = PipelineService.transform_many(pipelines, [X, X])
        w, bias = dense_ridge(Z, labels.data, 0.1)
        np.testing.assert_allclose(OOCPCAService.predict(ridge, pca, Z), Z @ w + bias, atol=1e-6)

    def test_kernels_get_block_diagonal_basis(self, labeled_task, two_kernels):
        _, _, labels = labeled_task
        specs, pipelines = two_kernels
        accs = OOCPCAService.accumulate_kernels(specs, pipelines, labels)
        pca = OOCPCAService.eig_kernels(accs, 6, [p.fingerprint for p in pipelines])
        assert pca.blocks == (6, 6)
        assert pca.U_bar.shape == (40, 12)
        np.testing.assert_array_equal(pca.U_bar[:16, 6:], 0.0)
        np.testing.assert_array_equal(pca.U_bar[16:, :6], 0.0)
        for acc, rows, cols in zip(accs, (slice(0, 16), slice(16, 40)), (slice(0, 6), slice(6, 12))):
            alone = OOCPCAService.eig_centered(acc, 6)
            np.testing.assert_allclose(pca.U_bar[rows, cols], alone.U_bar, atol=1e-12)
            np.testing.assert_allclose(pca.eigvals[cols], alone.eigvals, rtol=1e-12)
            np.testing.assert_allclose(pca.mean[rows], acc.mean, rtol=1e-12)

    def test_second_pass_uses_cross_kernel_blocks(self, labeled_task, two_kernels):
        X, _, labels = labeled_task
        specs, pipelines = two_kernels
        accs = OOCPCAService.accumulate_kernels(specs, pipelines, labels)
        pca = OOCPCAService.eig_kernels(accs, 6, [p.fingerprint for p in pipelines])
        projected = OOCPCAService.projected_moments(specs, pipelines, pca, labels, threads=2)
        H = projected.centered()
        cross = H[:6, 6:]
        assert np.linalg.norm(cross) > 1e-3 * np.linalg.norm(H)
        np.testing.assert_allclose(cross, H[6:, :6].T, rtol=1e-10, atol=1e-14)

        ridge = OOCPCAService.two_stage_multikernel(specs, pipelines, pca, labels, 0.1)
        rhs = projected.v - np.outer(projected.m, projected.label_mean)
        diagonal = rhs / (np.diag(H) + 0.1)[:, None]
        assert not np.allclose(ridge.w, diagonal, rtol=1e-3, atol=1e-8)

        Z = PipelineService.transform_many(pipelines, [X, X])
        Zp = pca.project(Z)
        w, bias = dense_ridge(Zp, labels.data, 0.1)
        np.testing.assert_allclose(ridge.w, w, rtol=1e-6, atol=1e-8)
        np.testing.assert_allclose(OOCPCAService.predict(ridge, pca, Z), Zp @ w + bias, atol=1e-8)

    def test_blocked_model_needs_second_pass(self, labeled_task, two_kernels):
        _, _, labels = labeled_task
        specs, pipelines = two_kernels
        accs = OOCPCAService.accumulate_kernels(specs, pipelines, labels)
        pca = OOCPCAService.eig_kernels(accs, 6, [p.fingerprint for p in pipelines])
        with pytest.raises(ValidationError):
            OOCPCAService.ridge_after_pca(MomentAccumulator.concat(accs), pca, 0.1)

    def test_other_pipeline_is_rejected(self, labeled_task):
        X, _, labels = labeled_task
        spec = HistIOService.chunk_spec(X, 60)
        fitted_with = PipelineService.build(X, "direct", 2, 32, 0.75, 0)
        other = PipelineService.build(X, "direct", 2, 32, 0.75, 1)
        acc = OOCPCAService.accumulate(spec, fitted_with, labels)
        pca = OOCPCAService.eig_centered(acc, 8, (fitted_with.fingerprint,))
        with pytest.raises(ConsistencyError):
            OOCPCAService.two_stage_multikernel(spec, other, pca, labels, 1.0)


class TestCalibrate:
    """Tests for rank-based score calibration."""

    def test_rank_th_score_becomes_zero(self, rng):
        scores = rng.normal(size=(50, 3))
        calibrated = OOCPCAService.calibrate_scores(scores, 10)
        for column in calibrated.T:
            assert np.sort(column)[::-1][9] == 0.0
        np.testing.assert_allclose(np.diff(calibrated, axis=0), np.diff(scores, axis=0))

    def test_shift_invariant_and_idempotent(self, rng):
        scores = rng.normal(size=(30, 2))
        once = OOCPCAService.calibrate_scores(scores, 5)
        np.testing.assert_allclose(OOCPCAService.calibrate_scores(scores + [3.0, -7.0], 5), once, atol=1e-12)
        np.testing.assert_array_equal(OOCPCAService.calibrate_scores(once, 5), once)

    @pytest.mark.parametrize("rank", [0, 31])
    def test_rank_out_of_range(self, rng, rank):
        with pytest.raises(ParameterError):
            OOCPCAService.calibrate_scores(rng.normal(size=(30, 2)), rank)


def _check_streaming(n, D, chunk, kept, seed, lambda_=0.2):
    X, ids = BenchService.synthetic_dirichlet(n=n, d=12, classes=4, boost=2.0, seed=seed)
    labels = LabelMatrix.one_vs_all(ids, 4)
    pipeline = PipelineService.build(X, "direct", 3, D, 0.75, seed)
    acc = OOCPCAService.accumulate(HistIOService.chunk_spec(X, chunk), pipeline, labels)
    pca = OOCPCAService.eig_centered(acc, kept)
    ridge = OOCPCAService.ridge_after_pca(acc, pca, lambda_)

    Z = pipeline.transform(X)
    Zc = Z - Z.mean(axis=0)
    expected = np.sort(linalg.eigvalsh(Zc.T @ Zc))[::-1][:kept]
    np.testing.assert_allclose(pca.eigvals, expected, rtol=1e-6, atol=1e-9 * expected[0])

    Zp = Zc @ pca.U_bar
    w = linalg.solve(Zp.T @ Zp + lambda_ * np.eye(kept), Zp.T @ labels.data, assume_a="pos")
    np.testing.assert_allclose(OOCPCAService.predict(ridge, pca, Z), Zp @ w + labels.data.mean(axis=0),
                               rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("n,D,chunk,kept,seed", [
    (120, 32, 7, 10, 0), (300, 64, 64, 64, 1), (57, 16, 1, 5, 2), (500, 128, 99, 40, 3), (200, 48, 200, 20, 4),
])
def test_streaming_matches_in_memory(n, D, chunk, kept, seed):
    _check_streaming(n, D, chunk, kept, seed)


def _sweep_configs(count=20, seed=7):
    rng = np.random.default_rng(seed)
    for index in range(count):
        n = int(rng.integers(20, 2001))
        D = int(rng.choice([16, 64, 128, 256, 512]))
        chunk = int(rng.integers(1, n + 1))
        kept = int(rng.integers(1, D + 1))
        yield n, D, chunk, kept, 100 + index


@pytest.mark.slow
@pytest.mark.parametrize("n,D,chunk,kept,seed", list(_sweep_configs()))
def test_streaming_sweep(n, D, chunk, kept, seed):
    _check_streaming(n, D, chunk, kept, seed)


def _post_moment_seconds(n, D, classes, repeats=7):
    rng = np.random.default_rng(n + classes)
    Z = rng.normal(size=(n, D))
    acc = MomentAccumulator.empty(D, classes).add(Z, rng.normal(size=(n, classes)))
    timings = []
    for _ in range(repeats):
        start = time.perf_counter()
        pca = OOCPCAService.eig_centered(acc, D)
        OOCPCAService.ridge_after_pca(acc, pca, 1.0)
        timings.append(time.perf_counter() - start)
    return min(timings)


@pytest.mark.slow
class TestRidgeScaling:
    """Timing of the solve that runs on accumulated moments."""

    def test_many_classes_cost_little_more(self):
        assert _post_moment_seconds(2000, 512, 1000) <= 10 * _post_moment_seconds(2000, 512, 10)

    def test_row_count_does_not_matter(self):
        # min over repeats; 25% slack for scheduler noise
        small = _post_moment_seconds(2000, 512, 10)
        large = _post_moment_seconds(4000, 512, 10)
        assert large <= 1.25 * small
        assert small <= 1.25 * large
