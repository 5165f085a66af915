"""
Core configuration module for the conjugacy laboratory.
conjulab/core/config.py
"""

from pydantic import Field
from pydantic_settings import BaseSettings
from typing import List
from functools import lru_cache

from conjulab.core.exceptions import ConfigurationError


class Settings(BaseSettings):
    """Application settings with validation."""

    # Application (hardcoded)
    APP_NAME: str = "conjulab"
    APP_VERSION: str = "1.0.0"

    # Logging Configuration
    LOG_LEVEL: str = Field(default="INFO", validation_alias="CONJULAB_LOG")
    LOG_TO_FILE: bool = False
    LOG_FILE: str = "logs/conjulab.log"
    # Hardcoded log settings
    LOG_ROTATION: str = "100 MB"
    LOG_RETENTION: str = "10 days"
    LOG_FORMAT: str = "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"

    # Certification
    CERT_HORIZON: int = 200
    T_GRID_FRACTIONS: List[float] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]

    # Budget caps (overridable per scenario)
    MAX_K: int = 200
    MAX_M: int = 60
    MAX_ORBIT_LOG10: float = 300.0  # largest orbit magnitude a budget may reach, as a power of ten

    # Numerics
    ADMISSIBILITY_MARGIN: float = 1e-12  # relative, for strict inequalities
    NUMERIC_SLACK: float = 1e-9
    INVERSION_MAX_ITER: int = 10_000

    # Sampling
    DEFAULT_SAMPLE_COUNT: int = 100
    DEFAULT_SAMPLE_RADIUS: float = 10.0
    DEFAULT_SEED: int = 20240917
    SPARSE_WINDOW: int = 6  # half-width of random sparse supports around the split index

    # Performance Configuration
    DEFAULT_JOBS: int = 1
    OUTPUT_DIR: str = "results"

    class Config:
        env_prefix = "CONJULAB_"
        env_file = ".env"
        case_sensitive = True
        populate_by_name = True
        extra = "ignore"


@lru_cache()
def get_settings() -> Settings:
    """
    Get cached settings instance.

    Returns:
        Settings: Application settings
    """
    return Settings()


# Create a global settings instance
settings = get_settings()


# Validation functions
def validate_settings(current: Settings = None) -> bool:
    """Validate numeric settings before any computation."""
    current = current or settings
    errors = []

    if current.LOG_LEVEL.upper() not in {"TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL"}:
        errors.append(f"unknown log level {current.LOG_LEVEL!r}")

    if current.CERT_HORIZON < 1:
        errors.append("CERT_HORIZON must be positive")

    if current.MAX_K < 1 or current.MAX_M < 1:
        errors.append("MAX_K and MAX_M must be positive")

    if not current.MAX_ORBIT_LOG10 > 0:
        errors.append("MAX_ORBIT_LOG10 must be positive")

    if not 0 < current.ADMISSIBILITY_MARGIN < 1:
        errors.append("ADMISSIBILITY_MARGIN must lie in (0, 1)")

    if not all(0 < f < 1 for f in current.T_GRID_FRACTIONS):
        errors.append("T_GRID_FRACTIONS must lie in (0, 1)")

    if current.NUMERIC_SLACK < 0:
        errors.append("NUMERIC_SLACK must be non-negative")

    if errors:
        raise ConfigurationError(f"Configuration errors: {', '.join(errors)}")

    return True


# Export commonly used configurations
__all__ = [
    'settings',
    'get_settings',
    'validate_settings',
    'Settings'
]
