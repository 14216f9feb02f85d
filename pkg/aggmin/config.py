import logging
import os
from typing import Optional

from pydantic import BaseModel, ConfigDict

from .errors import ParameterError

THREADS_ENV = "AGGMIN_THREADS"
LOG_LEVEL_ENV = "AGGMIN_LOG_LEVEL"
OUT_ENV = "AGGMIN_OUT"
TOLERANCE_ENV = "AGGMIN_TOLERANCE"


class Settings(BaseModel):
    """Process-wide settings, normally read from the environment."""

    model_config = ConfigDict(frozen=True)

    threads: int = 1
    log_level: str = "INFO"
    out_dir: str = "aggmin-out"
    tolerance: float = 1e-10

    @classmethod
    def from_env(
        cls,
        threads_env: str = THREADS_ENV,
        log_level_env: str = LOG_LEVEL_ENV,
        out_env: str = OUT_ENV,
        tolerance_env: str = TOLERANCE_ENV,
    ):
        """Create settings from environment variables, keeping defaults for unset ones"""
        values = {}
        threads = os.getenv(threads_env)
        if threads:
            try:
                values["threads"] = int(threads)
            except ValueError:
                raise ParameterError("{} must be an integer, got {!r}".format(threads_env, threads))
            if values["threads"] < 1:
                raise ParameterError("{} must be >= 1, got {}".format(threads_env, threads))
        level = os.getenv(log_level_env)
        if level:
            if not isinstance(logging.getLevelName(level.upper()), int):
                raise ParameterError("{} is not a log level: {!r}".format(log_level_env, level))
            values["log_level"] = level.upper()
        out_dir = os.getenv(out_env)
        if out_dir:
            values["out_dir"] = out_dir
        tolerance = os.getenv(tolerance_env)
        if tolerance:
            try:
                values["tolerance"] = float(tolerance)
            except ValueError:
                raise ParameterError(
                    "{} must be a number, got {!r}".format(tolerance_env, tolerance)
                )
        return cls(**values)

    def worker_count(self, requested: Optional[int] = None) -> int:
        # AGGMIN_THREADS caps whatever a command asks for
        if requested is None:
            return self.threads
        return max(1, min(requested, self.threads))
