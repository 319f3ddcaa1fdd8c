"""
Environment settings for macro-ipm.

Values come from MACROIPM_* environment variables or a local .env file.
They tune how a run executes (log level, thread count, where artifacts go),
never what is computed; numerical choices live in the run configuration.
"""

from __future__ import annotations

from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

__all__ = ["Settings", "get_settings"]


class Settings(BaseSettings):
    """Configuration from environment variables."""

    model_config = SettingsConfigDict(env_prefix="MACROIPM_", env_file=".env", extra="ignore")

    log_level: str = "INFO"
    workers: int = Field(default=1, ge=1)
    output_root: str = "runs"


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()
