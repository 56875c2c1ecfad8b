"""Library configuration module."""

from __future__ import annotations

from pydantic_settings import BaseSettings, SettingsConfigDict


class BinsenseSettings(BaseSettings):
    """Configuration settings for the binsense library."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Parallelism (BINSENSE_THREADS)
    binsense_threads: int = 1

    # Memory / size caps
    binsense_dense_budget_mb: float = 256.0
    binsense_validator_max_n: int = 256
    binsense_brute_force_max_n: int = 20

    @property
    def dense_budget_bytes(self) -> int:
        """Dense materialization budget in bytes."""
        return int(self.binsense_dense_budget_mb * 1024 * 1024)


_settings: BinsenseSettings | None = None


def get_settings() -> BinsenseSettings:
    """Get the singleton library settings instance."""
    global _settings
    if _settings is None:
        _settings = BinsenseSettings()
    return _settings
