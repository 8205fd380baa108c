"""
Shared fixtures for the chi2map tests.
"""

import numpy as np
import pytest

from chi2map.config import get_settings
from chi2map.models.histogram import HistogramMatrix, LabelMatrix
from chi2map.services.bench_service import BenchService


@pytest.fixture(autouse=True)
def _fresh_settings():
    """Reload settings for every test so environment patches take effect."""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def dirichlet_matrix(rng):
    """40 L1-normalized histograms with 16 bins."""
    return HistogramMatrix(rng.dirichlet(np.ones(16), size=40))


@pytest.fixture
def log_uniform_matrix():
    """Values spread log-uniformly over [0.01, 1]."""
    rng = np.random.default_rng(7)
    return HistogramMatrix(10.0 ** rng.uniform(-2.0, 0.0, size=(200, 100)))


@pytest.fixture
def labeled_task():
    """A small, well separated 3-class Dirichlet task: (X, ids, labels)."""
    X, ids = BenchService.synthetic_dirichlet(n=240, d=8, classes=3, boost=3.0, seed=1)
    return X, ids, LabelMatrix.one_vs_all(ids, 3)
