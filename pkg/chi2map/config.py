"""
Configuration management for chi2map.

This module handles loading environment variables and library defaults
using Pydantic Settings for type-safe configuration management.
"""

from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Library and CLI settings loaded from environment variables.

    Every field can be overridden with a ``CHI2MAP_``-prefixed environment
    variable or an entry in a local ``.env`` file. CLI flags take precedence
    over both.

    Attributes:
        BINS: Number of log-spaced bins for the value histogram
        TERMS: Number of series terms per input dimension
        RF_DIMS: Number of random Fourier features
        GAMMA: Gaussian kernel parameter of the RF lifting (2*GAMMA = beta)
        SEED: Default seed for the random Fourier basis
        CHUNK_ROWS: Rows loaded per chunk when streaming matrices
        OVERSAMPLE: RF oversampling factor for the PCA pass
        RIDGE_LAMBDA: Ridge regularization strength
        THREADS: Worker threads for row/chunk parallelism
        CHEB_FLOOR: Values below this are treated as zero by the Chebyshev map
        L1_TOLERANCE: Tolerance of the strict-L1 row check
        LOG_LEVEL: Logging level name
        LOG_FORMAT: Logging format string
    """

    model_config = SettingsConfigDict(
        env_prefix="CHI2MAP_",
        env_file=".env",
        case_sensitive=True,
        extra="ignore",
    )

    BINS: int = Field(1000, ge=1)
    TERMS: int = Field(5, ge=0)
    RF_DIMS: int = Field(7000, ge=1)
    GAMMA: float = Field(0.75, gt=0)
    SEED: int = Field(0, ge=0)
    CHUNK_ROWS: int = Field(4096, ge=1)
    OVERSAMPLE: int = Field(3, ge=1)
    RIDGE_LAMBDA: float = Field(1.0, ge=0)
    THREADS: int = Field(1, ge=1)
    CHEB_FLOOR: float = Field(1e-12, ge=0)
    L1_TOLERANCE: float = Field(1e-6, gt=0)
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(asctime)s %(levelname)s %(name)s: %(message)s"


@lru_cache()
def get_settings() -> Settings:
    """
    Get cached settings instance.

    Returns:
        Settings: The settings loaded from the environment

    Note:
        This function uses lru_cache to ensure settings are loaded only once;
        tests call ``get_settings.cache_clear()`` after patching the environment.
    """
    return Settings()
