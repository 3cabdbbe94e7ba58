from contextlib import contextmanager
from typing import Iterator, Literal

import numpy as np
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # App
    APP_NAME: str = "RangeLoop Place Recognition"
    LOG_LEVEL: str = "INFO"

    # Numerik: float32 = Produktionsmodus, float64 = Testmodus (Gradient-Checks, exakte Äquivarianz)
    PRECISION: Literal["float32", "float64"] = "float32"

    # Reproduzierbarkeit
    DEFAULT_SEED: int = 0

    # Threads für Projektion, Labeling und Deskriptor-Extraktion
    WORKERS: int = 1

    # Minimale gültige Distanz (filtert Eigenreflexionen am Sensor)
    MIN_RANGE: float = 1e-3

    class Config:
        env_file = ".env"
        env_prefix = "RANGELOOP_"
        case_sensitive = True
        extra = "ignore"  # Allow extra fields in .env without errors


settings = Settings()

_active_dtype = np.dtype(settings.PRECISION)


def set_precision(name: str) -> np.dtype:
    """
    Setzt den globalen Präzisionsmodus für alle neu erzeugten Tensoren.

    Args:
        name: "float32" oder "float64"

    Returns:
        Der neue aktive numpy dtype
    """
    global _active_dtype
    if name not in ("float32", "float64"):
        raise ValueError(f"Unknown precision '{name}' (expected float32 or float64)")
    _active_dtype = np.dtype(name)
    return _active_dtype


def get_dtype() -> np.dtype:
    return _active_dtype


@contextmanager
def precision(name: str) -> Iterator[np.dtype]:
    """Temporär anderen Präzisionsmodus aktivieren (z.B. für Gradient-Checks)."""
    previous = _active_dtype.name
    try:
        yield set_precision(name)
    finally:
        set_precision(previous)
