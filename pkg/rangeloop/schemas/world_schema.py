from typing import Dict, Optional

from pydantic import BaseModel, ConfigDict, Field


class WorldSpec(BaseModel):
    """Parameter der synthetischen Welt (Key-Value-Datei)"""
    model_config = ConfigDict(frozen=True)

    static_count: int = Field(12, ge=0)
    movable_count: int = Field(4, ge=0)
    extent: float = Field(20.0, gt=0, description="Primitives are placed in [-extent, extent]^2")
    loop_radius: float = Field(8.0, gt=0, description="Radius of the circular trajectory (meters)")
    poses_per_loop: int = Field(60, ge=1)
    revisit_passes: int = Field(1, ge=0, description="Additional passes over the loop")
    reverse_revisit: bool = Field(False, description="Drive revisit passes with reversed heading")
    clearance: float = Field(1.5, ge=0, description="Free corridor around the trajectory (meters)")
    ground_z: Optional[float] = Field(-1.7, description="Ground plane height relative to the sensor")
    max_range: float = Field(80.0, gt=0)
    seed: int = 0

    @property
    def visit_count(self) -> int:
        return self.revisit_passes + 1

    @classmethod
    def from_key_values(cls, values: Dict[str, str]) -> "WorldSpec":
        data = {k: v for k, v in values.items() if k in cls.model_fields}
        if str(data.get("ground_z", "")).lower() == "none":
            data["ground_z"] = None
        return cls(**data)

    def to_key_values(self) -> Dict[str, str]:
        return {k: str(v) if v is not None else "none" for k, v in self.model_dump().items()}
