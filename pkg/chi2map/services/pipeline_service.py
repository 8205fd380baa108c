"""
Feature pipeline service.

A feature pipeline chains a chi2 embedding (direct series or Chebyshev) with
an optional random Fourier lifting. The same pipeline object must be used for
the PCA pass, the training pass and prediction; its fingerprint identifies it
across passes and model files.
"""

import hashlib
import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from chi2map.exceptions import DimensionError, ParameterError
from chi2map.models.basis import RFBasis
from chi2map.models.histogram import ChunkSpec, HistogramMatrix
from chi2map.models.params import ParamVector
from chi2map.schemas.pipeline_schema import EmbeddingMethod, KernelRecord, PipelineConfig
from chi2map.services.chebyshev_service import DEFAULT_FLOOR, ChebyshevService
from chi2map.services.chi2direct_service import Chi2DirectService
from chi2map.services.histio_service import HistIOService
from chi2map.services.rfmap_service import RFMapService

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeaturePipeline:
    """
    Histogram rows -> chi2 embedding -> (optional) random Fourier features.

    Attributes:
        method: Chi2 embedding
        input_dims: Columns d of the histograms
        terms: Series terms N
        params: Direct-series parameters (direct method only)
        basis: Random Fourier basis, or None to learn on the chi2 embedding
        floor: Zero threshold of the Chebyshev map
    """

    method: EmbeddingMethod
    input_dims: int
    terms: int
    params: Optional[ParamVector] = None
    basis: Optional[RFBasis] = None
    floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        object.__setattr__(self, "method", EmbeddingMethod(self.method))
        if self.method is EmbeddingMethod.DIRECT:
            if self.params is None or self.params.terms != self.terms:
                raise ParameterError(f"direct pipeline needs {self.terms} fitted parameters")
        if self.basis is not None and self.basis.embed_dim != self.embed_dim:
            raise DimensionError(
                f"basis lifts {self.basis.embed_dim} dims, embedding has {self.embed_dim}"
            )

    @property
    def embed_dim(self) -> int:
        """Length of the chi2 embedding of one row."""
        per_value = self.terms if self.method is EmbeddingMethod.DIRECT else self.terms + 1
        return self.input_dims * per_value

    @property
    def out_dims(self) -> int:
        """Length of the output feature vector."""
        return self.basis.dims if self.basis is not None else self.embed_dim

    @property
    def fingerprint(self) -> str:
        """SHA-256 over the method, term count, parameters and basis."""
        digest = hashlib.sha256()
        digest.update(f"{self.method.value}:{self.input_dims}:{self.terms}".encode())
        if self.params is not None:
            digest.update(self.params.k.astype("<f8").tobytes())
        if self.basis is not None:
            digest.update(self.basis.fingerprint.encode())
        return digest.hexdigest()

    def embed(self, X: HistogramMatrix, threads: int = 1) -> np.ndarray:
        """
        Chi2-embed a chunk of rows.

        Returns:
            np.ndarray: (rows, embed_dim) embedding
        """
        if X.cols != self.input_dims:
            raise DimensionError(f"chunk has {X.cols} columns, pipeline expects {self.input_dims}")
        if self.method is EmbeddingMethod.DIRECT:
            return Chi2DirectService.embed_matrix(X, self.params, threads)
        return ChebyshevService.cheb_embed_matrix(X, self.terms, self.floor, threads)

    def transform(self, X: HistogramMatrix, threads: int = 1) -> np.ndarray:
        """
        Compute the output features of a chunk of rows.

        Returns:
            np.ndarray: (rows, out_dims) features
        """
        C = self.embed(X, threads)
        if self.basis is None:
            return C
        return RFMapService.rf_transform(C, self.basis, threads)


class PipelineService:
    """
    Service class for building feature pipelines.

    Provides methods for:
    - Building a pipeline from explicit settings (fitting direct parameters on the data)
    - Building from a PipelineConfig or a multi-kernel record
    - Stacking the outputs of several pipelines
    """

    @staticmethod
    def build(source: Union[ChunkSpec, HistogramMatrix], method: Union[EmbeddingMethod, str],
              terms: int, rf_dims: Optional[int], gamma: float, seed: int,
              bins: int = 1000, params: Optional[ParamVector] = None,
              floor: float = DEFAULT_FLOOR) -> FeaturePipeline:
        """
        Build a pipeline for the matrix behind ``source``.

        Args:
            source: Chunked matrix (or in-memory matrix) used to fit parameters
            method: ``direct`` or ``chebyshev``
            terms: Series terms N
            rf_dims: Random Fourier dimension D; None skips the lifting
            gamma: Gaussian parameter of the lifting
            seed: Basis seed
            bins: Histogram bins for parameter fitting
            params: Precomputed direct parameters; fitted from ``source`` if omitted
            floor: Zero threshold of the Chebyshev map

        Returns:
            FeaturePipeline: Ready-to-use pipeline

        Example:
            spec = HistIOService.chunk_spec("train.bin", 4096)
            pipeline = PipelineService.build(spec, "direct", 5, 7000, 0.75, 0)
        """
        method = EmbeddingMethod(method)
        if isinstance(source, HistogramMatrix):
            spec = HistIOService.chunk_spec(source, source.rows)
        else:
            spec = source
        input_dims = HistIOService.column_count(spec)

        if method is EmbeddingMethod.DIRECT and params is None:
            params = Chi2DirectService.fit_params_stream(spec, terms, bins)
        if method is EmbeddingMethod.CHEBYSHEV:
            params = None

        per_value = terms if method is EmbeddingMethod.DIRECT else terms + 1
        basis = None
        if rf_dims is not None:
            basis = RFMapService.sample_basis(input_dims * per_value, rf_dims, gamma, seed)
        pipeline = FeaturePipeline(method=method, input_dims=input_dims, terms=terms,
                                   params=params, basis=basis, floor=floor)
        logger.info("built %s pipeline: d=%d N=%d -> %d features", method.value, input_dims,
                    terms, pipeline.out_dims)
        return pipeline

    @staticmethod
    def from_config(config: PipelineConfig, source: Union[ChunkSpec, HistogramMatrix],
                    bins: int = 1000, rf_dims: Optional[int] = None) -> FeaturePipeline:
        """
        Build the pipeline described by a PipelineConfig.

        Args:
            config: Pipeline configuration
            source: Matrix used to fit parameters
            bins: Histogram bins for parameter fitting
            rf_dims: Override of ``config.rf_dims`` (e.g. the oversampled PCA dimension)

        Returns:
            FeaturePipeline: The pipeline; no lifting when ``config.rf`` is false
        """
        dims = (rf_dims or config.rf_dims) if config.rf else None
        return PipelineService.build(source, config.method, config.terms, dims,
                                     config.gamma, config.seed, bins)

    @staticmethod
    def from_record(record: KernelRecord, chunk_rows: int, bins: int = 1000) -> tuple[FeaturePipeline, ChunkSpec]:
        """
        Build the pipeline of one multi-kernel record.

        Returns:
            tuple: (pipeline, chunk spec of the record's matrix)
        """
        spec = HistIOService.chunk_spec(record.path, chunk_rows)
        pipeline = PipelineService.build(spec, record.method, record.terms, record.rf_dims,
                                         record.gamma, record.seed, bins)
        return pipeline, spec

    @staticmethod
    def transform_many(pipelines: list[FeaturePipeline], chunks: list[HistogramMatrix],
                       threads: int = 1) -> np.ndarray:
        """
        Concatenate the features of several pipelines, one chunk per pipeline.

        Returns:
            np.ndarray: (rows, sum of out_dims) features
        """
        if len(pipelines) != len(chunks):
            raise DimensionError(f"{len(pipelines)} pipelines but {len(chunks)} chunks")
        parts = [p.transform(chunk, threads) for p, chunk in zip(pipelines, chunks)]
        return parts[0] if len(parts) == 1 else np.hstack(parts)

