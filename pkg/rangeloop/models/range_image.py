from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..schemas.projection_schema import ProjectionParams


class PointCloud(BaseModel):
    """LiDAR-Scan im Sensor-Frame: N×3 Koordinaten in Metern, Intensität optional (wird nicht verwendet)"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    points: np.ndarray = Field(..., description="N x 3 array (x, y, z) in meters")
    intensity: Optional[np.ndarray] = Field(None, description="Optional N intensities")

    @field_validator("points", mode="before")
    @classmethod
    def validate_points(cls, v):
        v = np.asarray(v, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(v)):
            raise ValueError("point cloud contains NaN or inf coordinates")
        return v

    @field_validator("intensity", mode="before")
    @classmethod
    def coerce_intensity(cls, v):
        return None if v is None else np.asarray(v, dtype=np.float32).reshape(-1)

    @model_validator(mode="after")
    def validate_intensity(self):
        if self.intensity is not None and len(self.intensity) != len(self.points):
            raise ValueError("intensity length must match number of points")
        return self

    def __len__(self) -> int:
        return len(self.points)


class RangeImage(BaseModel):
    """h×w Raster mit Distanzen in Metern; 0 markiert ungültige Pixel"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    params: ProjectionParams
    pixels: np.ndarray = Field(..., description="h x w float32 ranges")

    @field_validator("pixels", mode="before")
    @classmethod
    def validate_pixels(cls, v):
        v = np.asarray(v, dtype=np.float32)
        if v.ndim != 2:
            raise ValueError(f"range image must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("range image contains non-finite values")
        if np.any(v < 0):
            raise ValueError("range image contains negative ranges")
        return v

    @model_validator(mode="after")
    def validate_shape(self):
        if self.pixels.shape != (self.params.h, self.params.w):
            raise ValueError(f"pixels shape {self.pixels.shape} does not match params {self.params.h}x{self.params.w}")
        return self

    @property
    def valid_mask(self) -> np.ndarray:
        return self.pixels > 0

    @property
    def valid_count(self) -> int:
        return int(np.count_nonzero(self.pixels > 0))

    def with_pixels(self, pixels: np.ndarray) -> "RangeImage":
        return RangeImage(params=self.params, pixels=pixels)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RangeImage):
            return NotImplemented
        return self.params == other.params and np.array_equal(self.pixels, other.pixels)
