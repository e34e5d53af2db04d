"""
Configuration settings for the CTPP toolkit.
This file manages process-level settings read from the environment.
"""

from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Process settings loaded from environment variables.

    You can create a .env file in your project root to set these values:
    CTPP_OUTPUT_DIR=./runs
    CTPP_LOG_LEVEL=DEBUG
    """

    model_config = SettingsConfigDict(env_prefix="CTPP_", env_file=".env", extra="ignore")

    # Where train/eval/synth write their artifacts when no --output-dir is given
    output_dir: Path = Path("./runs")

    # Shard workers per batch; 1 keeps runs reproducible bit for bit
    threads: int = 1

    log_level: str = "INFO"

    # App settings
    app_name: str = "CTPP"
    app_version: str = "1.0.0"


# Create a global settings instance
settings = Settings()


def get_settings() -> Settings:
    """Get process settings."""
    return settings
