from pathlib import Path
from typing import Optional, Tuple

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", env_prefix="SRSIM_")

    # Storage
    DATABASE_URL: str = "sqlite:///sweep_results.db"
    LOGS_DIR: Path = Path("logs")
    RESULTS_DIR: Path = Path("results")
    DEFAULT_SCENARIO: Path = Path("scenarios/reference.conf")

    # Feasibility
    RATE_FLOOR: float = 1e-9  # bits/s, stands in for "rate > 0"
    MIN_TIME_SHARE: float = 1e-3  # sizes the derived device power cap
    FEASIBILITY_TOL: float = 1e-9  # relative slack accepted on C1/C2/C4
    LP_TOLERANCE: float = 1e-9

    # Block-coordinate ascent
    OUTER_MAX_ITER: int = 200
    OUTER_REL_TOL: float = 1e-6
    LINE_GRID_POINTS: int = 7
    GOLDEN_ITERS: int = 18
    SCREEN_KEEP: int = 3
    START_ALPHAS: Tuple[float, ...] = (0.25, 0.5, 0.75, 1.0)
    START_Q_FRACTIONS: Tuple[float, ...] = (0.0, 0.25, 0.5, 1.0)

    # Sweep presets
    P_MAX_RANGE: Tuple[float, float] = (0.01, 10.0)
    P_MAX_POINTS: int = 10
    P_MAX_FIXED: float = 1.0
    G_MIN_FIXED: float = 0.0
    G_MIN_POINTS: int = 8
    G_MIN_RANGE_MAX: Optional[float] = None  # None: derived from the max achievable gain
    G_MIN_AUTO_FRACTION: float = 0.9
    # Positions between the unconstrained optimum's gain and the max gain
    BINDING_G_MIN_FRACTIONS: Tuple[float, ...] = (0.25, 0.5, 0.75)

    # Typical A-IoT rate envelope
    ENVELOPE_LOW: float = 100.0
    ENVELOPE_HIGH: float = 5000.0

    WORKERS: int = 1


settings = Settings()


def ensure_directories():
    """Create the log and result directories if they don't exist"""
    for directory in [settings.LOGS_DIR, settings.RESULTS_DIR]:
        directory.mkdir(parents=True, exist_ok=True)
