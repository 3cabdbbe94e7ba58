import enum
import math
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .pose import Pose


class PrimitiveKind(str, enum.Enum):
    """Geometrische Grundkörper der synthetischen Welt"""
    BOX = "box"
    CYLINDER = "cylinder"
    SPHERE = "sphere"


class Primitive(BaseModel):
    """
    Grundkörper in Weltkoordinaten (Meter).

    half_extents: Box (hx, hy, hz) im eigenen, um yaw gedrehten Frame; Zylinder (r, r, halbe Höhe)
    mit vertikaler Achse; Kugel (r, r, r).
    """
    model_config = ConfigDict(frozen=True)

    kind: PrimitiveKind
    center: Tuple[float, float, float]
    half_extents: Tuple[float, float, float]
    yaw: float = 0.0
    movable: bool = False
    presence: List[bool] = Field(default_factory=list, description="Per-visit presence (movable only)")

    @field_validator("center", "half_extents", "yaw")
    @classmethod
    def validate_finite(cls, v):
        values = v if isinstance(v, tuple) else (v,)
        if not all(math.isfinite(x) for x in values):
            raise ValueError("primitive geometry must be finite")
        return v

    @field_validator("half_extents")
    @classmethod
    def validate_positive(cls, v):
        if any(x <= 0 for x in v):
            raise ValueError(f"primitive sizes must be positive, got {v}")
        return v

    def present(self, visit_index: int) -> bool:
        if not self.movable:
            return True
        return visit_index < len(self.presence) and self.presence[visit_index]


class SyntheticWorld(BaseModel):
    """Statische und bewegliche Objekte, optionale Bodenebene und eine Trajektorie mit Revisits"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    primitives: List[Primitive] = Field(default_factory=list)
    ground_z: Optional[float] = Field(None, description="Height of the ground plane (None = no ground)")
    max_range: float = Field(80.0, gt=0, description="Rays beyond this distance count as misses")
    trajectory: List[Pose]
    visits: List[int] = Field(..., description="Visit index per trajectory pose")
    revisit_of: List[Optional[int]] = Field(..., description="First-pass pose id revisited by this pose")
    seed: int = 0

    @model_validator(mode="after")
    def validate_trajectory(self):
        if not self.trajectory:
            raise ValueError("trajectory must contain at least one pose")
        if not (len(self.visits) == len(self.revisit_of) == len(self.trajectory)):
            raise ValueError("visits and revisit_of must have one entry per trajectory pose")
        return self

    @property
    def static(self) -> List[Primitive]:
        return [p for p in self.primitives if not p.movable]

    @property
    def movable(self) -> List[Primitive]:
        return [p for p in self.primitives if p.movable]
