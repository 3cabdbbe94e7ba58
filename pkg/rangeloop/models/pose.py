import math
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

ORTHONORMAL_TOLERANCE = 1e-6


def nearest_rotation(matrix: np.ndarray) -> np.ndarray:
    """Projektion auf die nächste Rotationsmatrix (SVD, det = +1)."""
    u, _, vt = np.linalg.svd(matrix)
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def rotation_error(matrix: np.ndarray) -> float:
    """Max. Abweichung von R^T R = I und det(R) = 1."""
    return float(max(np.abs(matrix.T @ matrix - np.eye(3)).max(), abs(np.linalg.det(matrix) - 1.0)))


class Pose(BaseModel):
    """Starrkörper-Transformation Sensor-Frame -> Welt-Frame"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    rotation: np.ndarray = Field(default_factory=lambda: np.eye(3), description="3x3 orthonormal matrix")
    translation: np.ndarray = Field(default_factory=lambda: np.zeros(3), description="3-vector in meters")

    @field_validator("rotation", mode="before")
    @classmethod
    def coerce_rotation(cls, v):
        v = np.array(v, dtype=np.float64).reshape(3, 3)
        if not np.all(np.isfinite(v)):
            raise ValueError("rotation contains non-finite values")
        return v

    @field_validator("translation", mode="before")
    @classmethod
    def coerce_translation(cls, v):
        v = np.array(v, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(v)):
            raise ValueError("translation contains non-finite values")
        return v

    @model_validator(mode="after")
    def validate_orthonormal(self):
        error = rotation_error(self.rotation)
        if error > ORTHONORMAL_TOLERANCE:
            raise ValueError(f"rotation is not orthonormal with det +1 (error {error:.2e})")
        return self

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def from_yaw(cls, yaw: float, translation: Sequence[float] = (0.0, 0.0, 0.0)) -> "Pose":
        c, s = math.cos(yaw), math.sin(yaw)
        return cls(rotation=[[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]], translation=translation)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "Pose":
        matrix = np.asarray(matrix, dtype=np.float64)
        return cls(rotation=matrix[:3, :3], translation=matrix[:3, 3])

    def matrix(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.rotation
        out[:3, 3] = self.translation
        return out

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rotation=rt, translation=-rt @ self.translation)

    def __matmul__(self, other: "Pose") -> "Pose":
        return Pose(
            rotation=self.rotation @ other.rotation,
            translation=self.rotation @ other.translation + self.translation,
        )

    def transform_points(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def distance_to(self, other: "Pose") -> float:
        return float(np.linalg.norm(self.translation - other.translation))

    @property
    def yaw(self) -> float:
        return math.atan2(self.rotation[1, 0], self.rotation[0, 0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Pose):
            return NotImplemented
        return np.array_equal(self.rotation, other.rotation) and np.array_equal(self.translation, other.translation)
