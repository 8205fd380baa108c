"""
Services package initialization.

This module imports and exports all computation services.
"""

from chi2map.services.histio_service import HistIOService
from chi2map.services.chi2direct_service import Chi2DirectService
from chi2map.services.chebyshev_service import ChebyshevService
from chi2map.services.rfmap_service import RFMapService
from chi2map.services.pipeline_service import FeaturePipeline, PipelineService
from chi2map.services.oocpca_service import OOCPCAService
from chi2map.services.model_io_service import ModelBundle, ModelIOService
from chi2map.services.bench_service import BenchService

__all__ = [
    "HistIOService",
    "Chi2DirectService",
    "ChebyshevService",
    "RFMapService",
    "FeaturePipeline",
    "PipelineService",
    "OOCPCAService",
    "ModelBundle",
    "ModelIOService",
    "BenchService",
]
