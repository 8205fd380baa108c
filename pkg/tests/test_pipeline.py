"""
Tests for feature pipelines.
"""

import numpy as np
import pytest

from chi2map.exceptions import DimensionError, ParameterError
from chi2map.models.histogram import HistogramMatrix
from chi2map.schemas.pipeline_schema import EmbeddingMethod, KernelRecord, PipelineConfig
from chi2map.services.chi2direct_service import Chi2DirectService
from chi2map.services.histio_service import HistIOService
from chi2map.services.pipeline_service import FeaturePipeline, PipelineService
from chi2map.services.rfmap_service import RFMapService


class TestBuild:
    """Tests for building pipelines."""

    def test_direct_with_lifting(self, dirichlet_matrix):
        pipeline = PipelineService.build(dirichlet_matrix, "direct", 4, 64, 0.75, 1)
        assert pipeline.method is EmbeddingMethod.DIRECT
        assert pipeline.embed_dim == 16 * 4
        assert pipeline.out_dims == 64
        np.testing.assert_array_equal(pipeline.params.k, Chi2DirectService.fit_params(dirichlet_matrix, 4).k)

    def test_chebyshev_without_lifting(self, dirichlet_matrix):
        pipeline = PipelineService.build(dirichlet_matrix, EmbeddingMethod.CHEBYSHEV, 3, None, 0.75, 0)
        assert pipeline.params is None and pipeline.basis is None
        assert pipeline.out_dims == pipeline.embed_dim == 16 * 4

    def test_streamed_source_fits_same_parameters(self, tmp_path, dirichlet_matrix):
        path = HistIOService.write_matrix(dirichlet_matrix, tmp_path / "m.bin")
        spec = HistIOService.chunk_spec(path, 9)
        streamed = PipelineService.build(spec, "direct", 3, 32, 0.75, 0, bins=100)
        in_memory = PipelineService.build(dirichlet_matrix, "direct", 3, 32, 0.75, 0, bins=100)
        assert streamed.fingerprint == in_memory.fingerprint

    def test_fingerprint_tracks_seed(self, dirichlet_matrix):
        a = PipelineService.build(dirichlet_matrix, "direct", 3, 32, 0.75, 0)
        b = PipelineService.build(dirichlet_matrix, "direct", 3, 32, 0.75, 0)
        c = PipelineService.build(dirichlet_matrix, "direct", 3, 32, 0.75, 1)
        assert a.fingerprint == b.fingerprint != c.fingerprint

    def test_direct_needs_parameters(self):
        with pytest.raises(ParameterError):
            FeaturePipeline(method="direct", input_dims=4, terms=3)

    def test_basis_must_match_embedding(self, dirichlet_matrix):
        params = Chi2DirectService.fit_params(dirichlet_matrix, 3)
        basis = RFMapService.sample_basis(10, 8, 0.75, 0)
        with pytest.raises(DimensionError):
            FeaturePipeline(method="direct", input_dims=16, terms=3, params=params, basis=basis)

    def test_from_config(self, dirichlet_matrix):
        config = PipelineConfig(method="chebyshev", terms=2, rf_dims=40, rf=True)
        assert PipelineService.from_config(config, dirichlet_matrix).out_dims == 40
        assert PipelineService.from_config(config, dirichlet_matrix, rf_dims=12).out_dims == 12
        flat = PipelineService.from_config(config.model_copy(update={"rf": False}), dirichlet_matrix)
        assert flat.basis is None and flat.out_dims == 16 * 3

    def test_from_record(self, tmp_path, dirichlet_matrix):
        path = HistIOService.write_matrix(dirichlet_matrix, tmp_path / "k.bin")
        record = KernelRecord(path=path, method="direct", terms=2, rf_dims=24, gamma=0.5, seed=4)
        pipeline, spec = PipelineService.from_record(record, chunk_rows=16)
        assert spec.total_rows == 40 and spec.chunk_rows == 16
        assert pipeline.out_dims == 24 and pipeline.basis.seed == 4


class TestTransform:
    """Tests for applying pipelines to chunks."""

    def test_transform_is_lifted_embedding(self, dirichlet_matrix):
        pipeline = PipelineService.build(dirichlet_matrix, "direct", 3, 32, 0.75, 0)
        expected = RFMapService.rf_transform(Chi2DirectService.embed_matrix(dirichlet_matrix, pipeline.params),
                                             pipeline.basis)
        np.testing.assert_array_equal(pipeline.transform(dirichlet_matrix), expected)

    def test_chunkwise_equals_whole(self, dirichlet_matrix):
        pipeline = PipelineService.build(dirichlet_matrix, "chebyshev", 3, 32, 0.75, 0)
        spec = HistIOService.chunk_spec(dirichlet_matrix, 6)
        chunked = np.vstack([pipeline.transform(c) for c in HistIOService.stream_chunks(spec)])
        np.testing.assert_allclose(chunked, pipeline.transform(dirichlet_matrix), rtol=1e-12, atol=1e-15)

    def test_column_mismatch(self, dirichlet_matrix):
        pipeline = PipelineService.build(dirichlet_matrix, "chebyshev", 3, None, 0.75, 0)
        with pytest.raises(DimensionError):
            pipeline.transform(HistogramMatrix(np.ones((2, 5))))

    def test_transform_many_stacks(self, dirichlet_matrix):
        a = PipelineService.build(dirichlet_matrix, "direct", 2, 10, 0.75, 0)
        b = PipelineService.build(dirichlet_matrix, "chebyshev", 2, None, 0.75, 0)
        Z = PipelineService.transform_many([a, b], [dirichlet_matrix, dirichlet_matrix])
        assert Z.shape == (40, 10 + 16 * 3)
        np.testing.assert_array_equal(Z[:, :10], a.transform(dirichlet_matrix))
        with pytest.raises(DimensionError):
            PipelineService.transform_many([a, b], [dirichlet_matrix])
