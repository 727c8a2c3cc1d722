from __future__ import annotations

import warnings
from functools import lru_cache
from typing import Literal, Optional

import psutil
from pydantic import Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.exceptions.custom_exceptions import ConfigurationException


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", extra="allow")

    # App
    APP_NAME: str = "rootsum-toolkit"
    PROJECT_VERSION: str = "1.0.0"
    LOG_LEVEL: str = "info"
    ENVIRONMENT: Literal["development", "production"] = "development"

    # Certified arithmetic
    DEFAULT_PRECISION_BITS: int = 128
    MIN_PRECISION_BITS: int = 32
    MAX_PRECISION_BITS: int = 1 << 16

    # Execution
    PARALLELISM: Optional[int] = None

    # Feasibility ceilings
    SEARCH_MAX_TUPLES: int = 10**9
    MITM_MAX_TABLE_ENTRIES: int = 2 * 10**7
    COUNT_MAX_TUPLES: int = 10**9
    GAPS_MAX_POINTS: int = 10**8

    # Exponential sums
    EXPSUM_PRECISION_BITS: int = 40
    EXPSUM_GUARD_BITS: int = 20

    # Metrics
    METRICS_TEXTFILE: Optional[str] = Field(default=None)

    def resolve_parallelism(self, requested: Optional[int] = None) -> int:
        """Flag wins over the environment, which wins over the core count."""
        if requested is not None:
            return requested
        if self.PARALLELISM is not None:
            return self.PARALLELISM
        return psutil.cpu_count(logical=True) or 1

    @model_validator(mode="after")
    def _check_settings(self) -> "Settings":
        if self.MIN_PRECISION_BITS < 1:
            raise ValueError("MIN_PRECISION_BITS must be positive")
        if self.DEFAULT_PRECISION_BITS < self.MIN_PRECISION_BITS:
            raise ValueError(
                f"DEFAULT_PRECISION_BITS must be at least {self.MIN_PRECISION_BITS}"
            )
        if self.MAX_PRECISION_BITS < self.DEFAULT_PRECISION_BITS:
            raise ValueError("MAX_PRECISION_BITS must not be below DEFAULT_PRECISION_BITS")

        if self.PARALLELISM is not None:
            if self.PARALLELISM < 1:
                raise ValueError("PARALLELISM must be at least 1")
            cores = psutil.cpu_count(logical=True) or 1
            if self.PARALLELISM > cores:
                warnings.warn(
                    f"PARALLELISM={self.PARALLELISM} exceeds the {cores} logical cores "
                    "of this machine; shards will be oversubscribed.",
                    UserWarning,
                )

        # Machine trigonometry limits per-term accuracy to about 2^-48.
        if not 0 <= self.EXPSUM_PRECISION_BITS <= 48:
            raise ValueError("EXPSUM_PRECISION_BITS must lie in [0, 48]")
        return self


@lru_cache()
def get_settings() -> Settings:
    try:
        return Settings()
    except ValidationError as e:
        raise ConfigurationException(
            "Invalid configuration",
            details={"errors": [error["msg"] for error in e.errors()]},
        ) from e
