"""Process-wide settings.

Settings are loaded from environment variables (prefix ``AEMBENCH_``) and
optionally a local `.env` file. Extra env vars are ignored so one `.env`
can be shared with other tools.
"""

from __future__ import annotations

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Pydantic v2 settings configuration.
    model_config = SettingsConfigDict(
        env_file=".env", env_prefix="AEMBENCH_", extra="ignore"
    )

    # Root directory for datasets, checkpoints, run records and reports.
    DATA_DIR: str = "runs"
    LOG_LEVEL: str = "INFO"

    # Desk-scale training budget.
    EPOCHS: int = 50
    BATCH_SIZE: int = 256
    T_MAX: int = 50
    TRAIN_SIZE: int = 4000
    VAL_SIZE: int = 1000
    TEST_SIZE: int = 100

    # Stack task: graphene sheets on Si3N4 spacers.
    FERMI_LEVEL_EV: float = 0.5
    SCATTERING_TIME_FS: float = 100.0
    TEMPERATURE_K: float = 300.0
    DIELECTRIC_INDEX: float = 2.0
    SUBSTRATE_INDEX: float = 1.45
    STACK_THICKNESS_NM: tuple[float, float] = (20.0, 100.0)

    # Shell task: alternating TiO2 / silica shells in air.
    SHELL_INDEX_HIGH: float = 2.5
    SHELL_INDEX_LOW: float = 1.45
    HOST_INDEX: float = 1.0
    SHELL_THICKNESS_NM: tuple[float, float] = (30.0, 70.0)

    # Relative size of the last Mie term accepted as converged.
    MIE_TAIL_TOL: float = 1e-8


# Singleton settings used throughout the package.
settings = Settings()
