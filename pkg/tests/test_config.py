"""
Tests for settings.
"""

import pytest
from pydantic import ValidationError

from chi2map.config import Settings, get_settings


def test_defaults(monkeypatch):
    monkeypatch.delenv("CHI2MAP_TERMS", raising=False)
    settings = Settings(_env_file=None)
    assert settings.TERMS == 5
    assert settings.RF_DIMS == 7000
    assert settings.GAMMA == 0.75
    assert settings.OVERSAMPLE == 3


def test_environment_override(monkeypatch):
    monkeypatch.setenv("CHI2MAP_RF_DIMS", "128")
    monkeypatch.setenv("CHI2MAP_LOG_LEVEL", "DEBUG")
    settings = get_settings()
    assert settings.RF_DIMS == 128
    assert settings.LOG_LEVEL == "DEBUG"
    assert get_settings() is settings


def test_invalid_value(monkeypatch):
    monkeypatch.setenv("CHI2MAP_GAMMA", "0")
    with pytest.raises(ValidationError):
        Settings(_env_file=None)
