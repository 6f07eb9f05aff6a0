"""
Curvscope Process Settings

Centralized configuration management using Pydantic Settings.
All settings can be overridden via environment variables (prefix CURVSCOPE_)
or a local .env file.
"""

from pathlib import Path

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-level settings with environment variable support."""

    model_config = SettingsConfigDict(
        env_prefix="CURVSCOPE_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
        env_parse_none_str="null",
    )

    # -------------------------------------------------------------------------
    # Logging
    # -------------------------------------------------------------------------
    log_level: str = Field(default="INFO", description="Logging level (DEBUG, INFO, WARNING, ERROR)")
    log_format: str = Field(default="text", description="Log format: 'json' (machine) or 'text' (terminal)")

    # -------------------------------------------------------------------------
    # Runs
    # -------------------------------------------------------------------------
    default_seed: int = Field(default=0, ge=0, description="Seed used when a command gets no --seed")
    output_dir: Path = Field(default=Path("./out"), description="Default directory for generated files")
    max_qverify_points: int = Field(
        default=32,
        ge=2,
        le=64,
        description="Largest cloud the dense block-encoding simulator accepts",
    )

    @field_validator("log_level", mode="before")
    @classmethod
    def normalize_log_level(cls, v):
        """Accept lower-case level names."""
        level = str(v).upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"log_level must be a logging level name, got '{v}'")
        return level

    @field_validator("log_format", mode="before")
    @classmethod
    def check_log_format(cls, v):
        """Only 'json' and 'text' are understood."""
        fmt = str(v).lower()
        if fmt not in {"json", "text"}:
            raise ValueError("log_format must be 'json' or 'text'")
        return fmt

    @property
    def json_logs(self) -> bool:
        """Whether logs are emitted as JSON lines."""
        return self.log_format == "json"

    def ensure_output_dir(self) -> Path:
        """Create the output directory on first use and return it."""
        self.output_dir.mkdir(parents=True, exist_ok=True)
        return self.output_dir


# Global settings instance
settings = Settings()
