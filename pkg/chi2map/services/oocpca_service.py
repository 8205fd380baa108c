"""
Out-of-core PCA and ridge regression service.

One streaming pass accumulates H = sum Z^T Z, m = sum Z^T 1 and v = sum Z^T y
over chunks of features. The centered matrix H - m m^T / n is diagonalized
and ridge regression is solved in the projected space, where the system is
diagonal. Several kernels get one PCA each, combined into a block-diagonal
U_bar; a second pass then projects every chunk and accumulates the projected
moments, whose cross-kernel blocks make the system dense.

Scores are computed on unprojected features with back-projected weights::

    score(z) = z . w_orig + bias,   w_orig = U_bar w,   bias = y_mean - w_orig . z_mean

where z_mean is the feature mean of the labeled training rows.
"""

import logging
from typing import Iterator, Optional, Sequence, Union

import numpy as np
from scipy import linalg

from chi2map.exceptions import (
    AlignmentError, ConsistencyError, DegenerateError, DimensionError, ParameterError, SingularError,
    ValidationError,
)
from chi2map.models.histogram import ChunkSpec, HistogramMatrix, LabelMatrix
from chi2map.models.pca import MomentAccumulator, PCAModel, RidgeModel
from chi2map.services.histio_service import HistIOService
from chi2map.services.pipeline_service import FeaturePipeline, PipelineService
from chi2map.services.workers import map_ordered

logger = logging.getLogger(__name__)

# Relative size below which an eigenvalue counts as zero for an unregularized solve.
ZERO_EIGENVALUE = 1e-12
# Round-off tolerance for negative eigenvalues before clamping.
NEGATIVE_EIGENVALUE = 1e-8


def _as_lists(specs, pipelines) -> tuple[list[ChunkSpec], list[FeaturePipeline]]:
    specs = list(specs) if isinstance(specs, (list, tuple)) else [specs]
    pipelines = list(pipelines) if isinstance(pipelines, (list, tuple)) else [pipelines]
    if len(specs) != len(pipelines):
        raise DimensionError(f"{len(specs)} matrices but {len(pipelines)} pipelines")
    first = specs[0]
    for spec in specs[1:]:
        if spec.total_rows != first.total_rows or spec.chunk_rows != first.chunk_rows:
            raise AlignmentError(
                f"kernel matrices disagree: {spec.total_rows} rows in chunks of {spec.chunk_rows} "
                f"vs {first.total_rows} in chunks of {first.chunk_rows}"
            )
    return specs, pipelines


def _zip_chunks(specs: list[ChunkSpec]) -> Iterator[tuple[int, list[HistogramMatrix]]]:
    streams = [HistIOService.stream_chunks(spec) for spec in specs]
    for index, chunks in enumerate(zip(*streams)):
        yield index, list(chunks)


def _batches(items: Iterator, size: int) -> Iterator[list]:
    batch = []
    for item in items:
        batch.append(item)
        if len(batch) == size:
            yield batch
            batch = []
    if batch:
        yield batch


class OOCPCAService:
    """
    Service class for streaming moments, PCA and quadratic-loss learning.

    Provides methods for:
    - Moment accumulation over chunked feature streams
    - Eigendecomposition of the centered moments
    - Ridge regression after PCA and the two-stage multi-kernel solve
    - Prediction and score calibration
    """

    # ========================================================================
    # MOMENTS
    # ========================================================================

    @staticmethod
    def accumulate(spec: ChunkSpec, pipeline: FeaturePipeline, labels: Optional[LabelMatrix] = None,
                   classes: Optional[int] = None, threads: int = 1) -> MomentAccumulator:
        """
        Stream a matrix and accumulate the moments of its features.

        Args:
            spec: Chunk spec of the matrix
            pipeline: Feature pipeline
            labels: Targets aligned with the rows, or None for unlabeled data
            classes: Label columns to allocate when ``labels`` is None
            threads: Worker threads

        Returns:
            MomentAccumulator: H, m, v, n over all rows

        Raises:
            AlignmentError: If labels and rows do not pair up

        Example:
            acc = OOCPCAService.accumulate(spec, pipeline, labels)
        """
        return OOCPCAService.accumulate_kernels([spec], [pipeline], labels, classes, threads)[0]

    @staticmethod
    def accumulate_kernels(specs: Sequence[ChunkSpec], pipelines: Sequence[FeaturePipeline],
                           labels: Optional[LabelMatrix] = None, classes: Optional[int] = None,
                           threads: int = 1) -> list[MomentAccumulator]:
        """
        Accumulate separate moments for each kernel in one pass over aligned matrices.

        Chunk moments may be computed on a thread pool; they are always added
        in chunk-index order.

        Args:
            specs: Chunk spec per kernel, aligned row for row
            pipelines: Feature pipeline per kernel
            labels: Targets aligned with the rows, or None for unlabeled data
            classes: Label columns to allocate when ``labels`` is None
            threads: Worker threads

        Returns:
            list: One MomentAccumulator per kernel

        Raises:
            AlignmentError: If the matrices or the labels do not pair up
        """
        specs, pipelines = _as_lists(specs, pipelines)
        total = specs[0].total_rows
        if labels is not None and labels.rows != total:
            raise AlignmentError(f"{labels.rows} label rows for {total} data rows")
        width = labels.classes if labels is not None else (classes or 0)
        accs = [MomentAccumulator.empty(p.out_dims, width) for p in pipelines]

        def chunk_moments(item: tuple[int, list[HistogramMatrix]]) -> list[MomentAccumulator]:
            index, chunks = item
            y = None
            if labels is not None:
                y = labels.slice(chunks[0].row_offset, chunks[0].row_offset + chunks[0].rows).data
            logger.debug("moments of chunk %d (%d rows)", index, chunks[0].rows)
            return [MomentAccumulator.empty(p.out_dims, width).add(p.transform(chunk), y)
                    for p, chunk in zip(pipelines, chunks)]

        for batch in _batches(_zip_chunks(specs), max(threads, 1)):
            for local in map_ordered(chunk_moments, batch, threads):
                for acc, part in zip(accs, local):
                    acc.merge(part)
        logger.info("accumulated moments of %d rows over %d kernel(s)", accs[0].n, len(accs))
        return accs

    # ========================================================================
    # PCA
    # ========================================================================

    @staticmethod
    def eig_centered(acc: MomentAccumulator, D_kept: int, fingerprints: Sequence[str] = ()) -> PCAModel:
        """
        Diagonalize the centered second-moment matrix.

        Eigenpairs are sorted by descending eigenvalue; each eigenvector's first
        nonzero component is made positive; round-off negatives are clamped to 0.

        Args:
            acc: Accumulated moments
            D_kept: Number of leading eigenpairs to keep
            fingerprints: Pipeline fingerprints to store with the model

        Returns:
            PCAModel: Leading eigenpairs and the feature mean

        Raises:
            DegenerateError: If fewer than two rows were accumulated
            ParameterError: If D_kept is outside [1, D]
        """
        if acc.n < 2:
            raise DegenerateError(f"need at least 2 rows for PCA, got {acc.n}")
        if not 1 <= D_kept <= acc.dims:
            raise ParameterError(f"D_kept must lie in [1, {acc.dims}], got {D_kept}")
        centered = acc.centered()
        eigvals, eigvecs = linalg.eigh(centered, subset_by_index=[acc.dims - D_kept, acc.dims - 1])
        eigvals = eigvals[::-1].copy()
        eigvecs = eigvecs[:, ::-1].copy()

        scale = max(float(np.abs(eigvals).max()), 1.0)
        if eigvals.min() < -NEGATIVE_EIGENVALUE * scale:
            logger.warning("clamping eigenvalue %.3g to 0", eigvals.min())
        eigvals = np.clip(eigvals, 0.0, None)

        for j in range(eigvecs.shape[1]):
            column = eigvecs[:, j]
            nonzero = np.flatnonzero(np.abs(column) > 1e-12 * np.abs(column).max())
            if nonzero.size and column[nonzero[0]] < 0:
                eigvecs[:, j] = -column
        logger.info("kept %d of %d components (top eigenvalue %.4g)", D_kept, acc.dims, eigvals[0])
        return PCAModel(U_bar=eigvecs, eigvals=eigvals, mean=acc.mean, n=acc.n,
                        fingerprints=tuple(fingerprints))

    @staticmethod
    def eig_kernels(accs: Sequence[MomentAccumulator], D_kept: Union[int, Sequence[int]],
                    fingerprints: Sequence[str] = ()) -> PCAModel:
        """
        Fit one PCA per kernel and combine them block-diagonally.

        Args:
            accs: Per-kernel moments from ``accumulate_kernels``
            D_kept: Components per kernel, one count for all or one per kernel
            fingerprints: Pipeline fingerprint per kernel

        Returns:
            PCAModel: Block-diagonal model; a plain model for a single kernel
        """
        keeps = [int(D_kept)] * len(accs) if np.ndim(D_kept) == 0 else [int(k) for k in D_kept]
        prints = list(fingerprints) or [None] * len(accs)
        if len(keeps) != len(accs) or len(prints) != len(accs):
            raise DimensionError(f"{len(accs)} kernels but {len(keeps)} sizes and {len(prints)} fingerprints")
        models = [OOCPCAService.eig_centered(acc, keep, (fp,) if fp else ())
                  for acc, keep, fp in zip(accs, keeps, prints)]
        return PCAModel.block_diagonal(models)

    # ========================================================================
    # RIDGE
    # ========================================================================

    @staticmethod
    def ridge_after_pca(acc: MomentAccumulator, model: PCAModel, lambda_: float) -> RidgeModel:
        """
        Ridge regression on the PCA-projected features of one kernel.

        The projected Gram matrix is the diagonal of eigenvalues, so
        w_j = v'_j / (eigval_j + lambda) with v' = U_bar^T (v - m_L y_mean),
        where m_L sums the features of the labeled rows.

        Args:
            acc: Moments the model was fitted on (v over labeled rows)
            model: PCA model of a single kernel
            lambda_: Nonnegative regularization

        Returns:
            RidgeModel: Weights, back-projected weights and bias

        Raises:
            ValidationError: If the model was fitted kernel by kernel
            SingularError: If lambda is 0 and a kept eigenvalue vanishes
        """
        if lambda_ < 0:
            raise ParameterError(f"lambda must be nonnegative, got {lambda_}")
        if acc.dims != model.dims:
            raise DimensionError(f"moments have {acc.dims} features, PCA model {model.dims}")
        if model.is_blocked:
            raise ValidationError(f"PCA of {len(model.blocks)} kernels has cross-kernel terms; "
                                  "train it with the two-stage second pass")
        U = model.U_bar
        v_proj = U.T @ (acc.v - np.outer(acc.m_labeled, acc.label_mean))
        denominator = model.eigvals + lambda_
        if lambda_ == 0:
            scale = float(model.eigvals.max()) if model.eigvals.size else 0.0
            tiny = np.flatnonzero(model.eigvals <= ZERO_EIGENVALUE * scale)
            if tiny.size:
                raise SingularError("unregularized solve hits a zero eigenvalue", int(tiny[0]))
        w = v_proj / denominator[:, None]
        offset = U.T @ (acc.labeled_mean - model.mean)
        return OOCPCAService._finish(w, model, acc.label_mean, offset, lambda_)

    @staticmethod
    def projected_moments(specs: Sequence[ChunkSpec], pipelines: Sequence[FeaturePipeline],
                          model: PCAModel, labels: LabelMatrix, threads: int = 1) -> MomentAccumulator:
        """
        Second data pass: moments of the projected features Z~ = (Z - mean) U_bar.

        With a block-diagonal U_bar the projected Gram matrix H' has the
        cross-kernel blocks Z~(i)^T Z~(j) off the diagonal.

        Returns:
            MomentAccumulator: H', m', v' over the labeled rows

        Raises:
            ConsistencyError: If the pipelines differ from those of the PCA pass
        """
        specs, pipelines = _as_lists(specs, pipelines)
        fingerprints = tuple(p.fingerprint for p in pipelines)
        if model.fingerprints and fingerprints != model.fingerprints:
            raise ConsistencyError("feature pipelines differ from the ones the PCA model was fitted with")
        total = specs[0].total_rows
        if labels.rows != total:
            raise AlignmentError(f"{labels.rows} label rows for {total} data rows")
        acc = MomentAccumulator.empty(model.kept, labels.classes)

        def chunk_moments(item: tuple[int, list[HistogramMatrix]]) -> MomentAccumulator:
            _, chunks = item
            Z = model.project(PipelineService.transform_many(pipelines, chunks))
            start = chunks[0].row_offset
            y = labels.slice(start, start + chunks[0].rows).data
            return MomentAccumulator.empty(model.kept, labels.classes).add(Z, y)

        for batch in _batches(_zip_chunks(specs), max(threads, 1)):
            for local in map_ordered(chunk_moments, batch, threads):
                acc.merge(local)
        return acc

    @staticmethod
    def two_stage_multikernel(specs: Union[ChunkSpec, Sequence[ChunkSpec]],
                              pipelines: Union[FeaturePipeline, Sequence[FeaturePipeline]],
                              model: PCAModel, labels: LabelMatrix, lambda_: float,
                              threads: int = 1) -> RidgeModel:
        """
        Project with a fitted PCA in a second pass and solve the full ridge system.

        Args:
            specs: Chunk spec per kernel, aligned row for row
            pipelines: The pipelines the PCA model was fitted with
            model: PCA model, block-diagonal for several kernels
            labels: Targets aligned with the rows
            lambda_: Nonnegative regularization

        Returns:
            RidgeModel: Solution of (H' + lambda I) w = v', H' and v' centered
            over the labeled rows

        Raises:
            ConsistencyError: If the pipelines differ from those of the PCA pass
            SingularError: If the regularized system is singular
        """
        if lambda_ < 0:
            raise ParameterError(f"lambda must be nonnegative, got {lambda_}")
        acc = OOCPCAService.projected_moments(specs, pipelines, model, labels, threads)
        w = OOCPCAService.solve_projected(acc, lambda_)
        return OOCPCAService._finish(w, model, acc.label_mean, acc.mean, lambda_)

    @staticmethod
    def solve_projected(acc: MomentAccumulator, lambda_: float) -> np.ndarray:
        """
        Solve the dense ridge system of projected moments by Cholesky.

        Returns:
            np.ndarray: (D_kept, c) weights

        Raises:
            SingularError: If the regularized system is not positive definite
        """
        system = acc.centered() + lambda_ * np.eye(acc.dims)
        rhs = acc.v - np.outer(acc.m, acc.label_mean)
        try:
            factor = linalg.cho_factor(system)
        except linalg.LinAlgError:
            index = int(np.argmin(linalg.eigvalsh(system)))
            raise SingularError("projected ridge system is not positive definite", index) from None
        return linalg.cho_solve(factor, rhs)

    @staticmethod
    def _finish(w: np.ndarray, model: PCAModel, label_mean: np.ndarray, offset: np.ndarray,
                lambda_: float) -> RidgeModel:
        # offset: mean of the training rows in projected coordinates
        w_orig = model.U_bar @ w
        bias = label_mean - w_orig.T @ model.mean - w.T @ offset
        return RidgeModel(w=w, bias=bias, lambda_=float(lambda_), w_orig=w_orig)

    # ========================================================================
    # PREDICTION
    # ========================================================================

    @staticmethod
    def predict(model: RidgeModel, pca: PCAModel, Z_new: np.ndarray) -> np.ndarray:
        """
        Score unprojected features with the back-projected weights.

        Args:
            model: Ridge model
            pca: PCA model the ridge model was trained on
            Z_new: (rows, D) features

        Returns:
            np.ndarray: (rows, classes) scores Z_new w_orig + bias
        """
        Z_new = np.atleast_2d(Z_new)
        if Z_new.shape[1] != pca.dims or model.w_orig.shape[0] != pca.dims:
            raise DimensionError(f"features have {Z_new.shape[1]} columns, model expects {pca.dims}")
        return Z_new @ model.w_orig + model.bias

    @staticmethod
    def predict_projected(model: RidgeModel, pca: PCAModel, Z_new: np.ndarray) -> np.ndarray:
        """
        Score by projecting explicitly: (Z_new - mean) U_bar w + label mean.

        Matches ``predict`` up to round-off.
        """
        label_mean = model.bias + model.w_orig.T @ pca.mean
        return pca.project(np.atleast_2d(Z_new)) @ model.w + label_mean

    @staticmethod
    def predict_stream(spec: Union[ChunkSpec, Sequence[ChunkSpec]],
                       pipelines: Union[FeaturePipeline, Sequence[FeaturePipeline]],
                       model: RidgeModel, pca: PCAModel, threads: int = 1) -> np.ndarray:
        """
        Score a chunked matrix.

        Returns:
            np.ndarray: (rows, classes) scores
        """
        specs, pipelines = _as_lists(spec, pipelines)

        def score(item: tuple[int, list[HistogramMatrix]]) -> np.ndarray:
            return OOCPCAService.predict(model, pca, PipelineService.transform_many(pipelines, item[1]))

        parts = []
        for batch in _batches(_zip_chunks(specs), max(threads, 1)):
            parts.extend(map_ordered(score, batch, threads))
        return np.vstack(parts)

    @staticmethod
    def calibrate_scores(scores: np.ndarray, rank: int) -> np.ndarray:
        """
        Shift each class's scores so its rank-th highest score is 0.

        Args:
            scores: (rows, classes) scores
            rank: 1-based rank, at most the number of rows

        Returns:
            np.ndarray: Calibrated scores

        Raises:
            ParameterError: If rank is outside [1, rows]
        """
        scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
        if not 1 <= rank <= scores.shape[0]:
            raise ParameterError(f"rank must lie in [1, {scores.shape[0]}], got {rank}")
        kth = -np.partition(-scores, rank - 1, axis=0)[rank - 1]
        return scores - kth
