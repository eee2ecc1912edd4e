"""Configuration helpers.

`Settings` holds the process-level values read from `ROUTING_LAB_*`
environment variables (after an optional `.env` file has been loaded).
Domain-specific configuration (environment, training, experiments) lives
next to the code that uses it.
"""
from __future__ import annotations

from functools import lru_cache
from pathlib import Path

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

ENV_PREFIX = "ROUTING_LAB_"


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix=ENV_PREFIX, extra="ignore")

    output_dir: Path = Path("runs")
    log_level: str = "INFO"
    default_seed: int = Field(default=0, ge=0)


@lru_cache(maxsize=1)
def get_config() -> Settings:
    """Return the settings, loading `.env` from the working directory once."""
    load_dotenv()
    return Settings()
