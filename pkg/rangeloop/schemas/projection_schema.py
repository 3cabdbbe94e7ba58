import math
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..config import settings


class ProjectionParams(BaseModel):
    """
    Geometrie des Range-Bilds.

    Zeilenformel: v = floor(h * (1 - (asin(z/|p|) + f_up) / f)). Damit decken die Zeilen
    Elevationen im Intervall (-f_up, f_down] ab.
    """
    model_config = ConfigDict(frozen=True)

    w: int = Field(900, ge=1, description="Image width (columns)")
    h: int = Field(64, ge=1, description="Image height (rows)")
    f_up: float = Field(..., ge=0, description="Elevation bound f_up in radians")
    f_down: float = Field(..., ge=0, description="Depression bound f_down in radians")
    min_range: float = Field(default_factory=lambda: settings.MIN_RANGE, gt=0, description="Points closer than this are dropped (meters)")

    @model_validator(mode="after")
    def validate_fov(self):
        if self.f_up + self.f_down <= 0:
            raise ValueError("vertical field of view f = f_up + f_down must be > 0")
        return self

    @property
    def f(self) -> float:
        return self.f_up + self.f_down

    @classmethod
    def from_degrees(cls, w: int, h: int, f_up_deg: float, f_down_deg: float,
                     min_range: Optional[float] = None) -> "ProjectionParams":
        extra = {} if min_range is None else {"min_range": min_range}
        return cls(w=w, h=h, f_up=math.radians(f_up_deg), f_down=math.radians(f_down_deg), **extra)


class ProjectionStats(BaseModel):
    """Statistik einer Punktwolken-Projektion"""
    total: int = 0
    projected: int = 0
    below_min_range: int = 0
    outside_fov: int = 0
