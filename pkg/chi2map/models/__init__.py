"""
Models package initialization.

This module imports and exports all domain models for easy access.
"""

from chi2map.models.base import ArrayModel
from chi2map.models.histogram import HistogramMatrix, ChunkSpec, LabelMatrix, MatrixFormat
from chi2map.models.params import ParamVector, KernelParams
from chi2map.models.basis import RFBasis
from chi2map.models.pca import MomentAccumulator, PCAModel, RidgeModel
from chi2map.models.series import FourierCoeffs, ConvergenceProfile

__all__ = [
    # Base
    "ArrayModel",
    # Histogram data
    "HistogramMatrix",
    "ChunkSpec",
    "LabelMatrix",
    "MatrixFormat",
    # Kernel parameters
    "ParamVector",
    "KernelParams",
    # Random Fourier basis
    "RFBasis",
    # Learning
    "MomentAccumulator",
    "PCAModel",
    "RidgeModel",
    # Chebyshev series
    "FourierCoeffs",
    "ConvergenceProfile",
]
