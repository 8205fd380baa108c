"""
Schemas package initialization.

This module imports and exports all Pydantic schemas for easy access.
"""

from chi2map.schemas.pipeline_schema import (
    EmbeddingMethod, PipelineConfig, KernelRecord, read_kernel_config
)
from chi2map.schemas.bench_schema import (
    BENCH_HEADER, BENCH_COLUMNS, BenchRow, BenchReport
)
from chi2map.schemas.model_schema import (
    BUNDLE_VERSION, ArrayEntry, PipelineEntry, BundleHeader
)

__all__ = [
    # Pipeline schemas
    "EmbeddingMethod", "PipelineConfig", "KernelRecord", "read_kernel_config",
    # Benchmark schemas
    "BENCH_HEADER", "BENCH_COLUMNS", "BenchRow", "BenchReport",
    # Model bundle schemas
    "BUNDLE_VERSION", "ArrayEntry", "PipelineEntry", "BundleHeader",
]
