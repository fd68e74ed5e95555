from pathlib import Path
from typing import Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from pose_pipeline.skeleton import DEFAULT_SKELETON_PATH


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="POSEREFINE_", env_file=".env", case_sensitive=False, extra="ignore"
    )

    # Application
    app_name: str = Field(default="PoseRefine")
    app_version: str = Field(default="1.0.0")
    debug: bool = Field(default=False)
    environment: str = Field(default="development")

    # API
    api_host: str = Field(default="0.0.0.0")
    api_port: int = Field(default=8000)
    api_prefix: str = Field(default="/api/v1")

    # Artifacts served by the API
    skeleton_path: str = Field(default=str(DEFAULT_SKELETON_PATH))
    prior_path: Optional[str] = Field(default=None)
    model_path: Optional[str] = Field(default=None)

    # Runs
    default_seed: int = Field(default=0)
    max_unprocessable_fraction: float = Field(default=0.1, ge=0.0, le=1.0)
    throughput_log: bool = Field(default=True)

    # Logging
    log_level: str = Field(default="INFO")
    log_file: str = Field(default="./logs/poserefine.log")

    @field_validator("log_file", mode="before")
    @classmethod
    def create_log_directory(cls, v: str) -> str:
        path = Path(v)
        path.parent.mkdir(parents=True, exist_ok=True)
        return str(path)


# Singleton
settings = Settings()
