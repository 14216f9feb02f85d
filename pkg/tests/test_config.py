"""Tests for aggmin.config module."""

import logging

import pytest
from pydantic import ValidationError

from aggmin.config import LOG_LEVEL_ENV, OUT_ENV, THREADS_ENV, TOLERANCE_ENV, Settings
from aggmin.errors import ParameterError


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in (THREADS_ENV, LOG_LEVEL_ENV, OUT_ENV, TOLERANCE_ENV):
        monkeypatch.delenv(name, raising=False)


class TestFromEnv:
    """Tests for Settings.from_env."""

    def test_defaults(self):
        """Test unset variables keep the defaults."""
        settings = Settings.from_env()
        assert settings.threads == 1
        assert settings.log_level == "INFO"
        assert settings.out_dir == "aggmin-out"
        assert settings.tolerance == 1e-10

    def test_threads(self, monkeypatch):
        """Test an integer thread count is read."""
        monkeypatch.setenv(THREADS_ENV, "4")
        assert Settings.from_env().threads == 4

    @pytest.mark.parametrize("value", ["abc", "1.5", "0", "-2"])
    def test_bad_threads(self, monkeypatch, value):
        """Test non-integer and nonpositive thread counts are rejected."""
        monkeypatch.setenv(THREADS_ENV, value)
        with pytest.raises(ParameterError) as exc:
            Settings.from_env()
        assert THREADS_ENV in str(exc.value)
        assert exc.value.code == 2

    def test_empty_is_unset(self, monkeypatch):
        """Test an empty variable is treated as unset."""
        monkeypatch.setenv(THREADS_ENV, "")
        assert Settings.from_env().threads == 1

    def test_log_level(self, monkeypatch):
        """Test log levels are upper-cased."""
        monkeypatch.setenv(LOG_LEVEL_ENV, "debug")
        settings = Settings.from_env()
        assert settings.log_level == "DEBUG"
        assert logging.getLevelName(settings.log_level) == logging.DEBUG

    def test_bad_log_level(self, monkeypatch):
        """Test unknown log levels are rejected."""
        monkeypatch.setenv(LOG_LEVEL_ENV, "chatty")
        with pytest.raises(ParameterError):
            Settings.from_env()

    def test_out_dir(self, monkeypatch):
        """Test the output directory variable."""
        monkeypatch.setenv(OUT_ENV, "/tmp/runs")
        assert Settings.from_env().out_dir == "/tmp/runs"

    def test_tolerance(self, monkeypatch):
        """Test the tolerance is parsed as a float."""
        monkeypatch.setenv(TOLERANCE_ENV, "1e-8")
        assert Settings.from_env().tolerance == 1e-8

    def test_bad_tolerance(self, monkeypatch):
        """Test a non-numeric tolerance is rejected."""
        monkeypatch.setenv(TOLERANCE_ENV, "tight")
        with pytest.raises(ParameterError):
            Settings.from_env()

    def test_custom_names(self, monkeypatch):
        """Test variable names can be overridden."""
        monkeypatch.setenv("MY_THREADS", "3")
        assert Settings.from_env(threads_env="MY_THREADS").threads == 3


class TestWorkerCount:
    """Tests for Settings.worker_count."""

    def test_unrequested(self):
        """Test no request gives the configured thread count."""
        assert Settings(threads=3).worker_count() == 3

    def test_capped(self):
        """Test requests above the thread count are capped."""
        assert Settings(threads=2).worker_count(8) == 2

    def test_below_cap(self):
        """Test smaller requests are honoured."""
        assert Settings(threads=8).worker_count(3) == 3

    def test_minimum(self):
        """Test at least one worker is used."""
        assert Settings(threads=4).worker_count(0) == 1


class TestSettingsModel:
    """Tests for the settings model itself."""

    def test_frozen(self):
        """Test settings cannot be reassigned."""
        settings = Settings()
        with pytest.raises(ValidationError):
            settings.threads = 5

    def test_copy_with_update(self):
        """Test model_copy gives an updated copy and leaves the original alone."""
        settings = Settings()
        copy = settings.model_copy(update={"threads": 6})
        assert copy.threads == 6
        assert settings.threads == 1
