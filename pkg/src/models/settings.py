from pathlib import Path
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-level defaults read from CANVAS_DRAWER_* environment variables or a .env file."""

    model_config = SettingsConfigDict(env_prefix="CANVAS_DRAWER_", env_file=".env", extra="ignore")

    data_dir: Path = Field(Path("data"), description="Where datasets and rollouts are read from and cached")
    checkpoint_dir: Path = Field(Path("checkpoints"), description="Default checkpoint location")
    output_dir: Path = Field(Path("outputs"), description="Default location for inference and eval outputs")
    log_level: str = Field("INFO", description="Root log level")
    json_logs: bool = Field(True, description="Render logs as JSON lines")
    threads: int = Field(1, ge=1, description="Upper bound on worker and BLAS threads")


_settings: Optional[Settings] = None


def get_settings() -> Settings:
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings
