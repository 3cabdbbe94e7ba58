import enum
from typing import Dict, Optional

from pydantic import BaseModel, ConfigDict, Field


class LossKind(str, enum.Enum):
    """Regressionsverlust zwischen Ähnlichkeit und Overlap"""
    L1 = "l1"
    SQUARED = "squared"


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_q: int = Field(6, ge=1, description="Queries per batch")
    n_r: int = Field(6, ge=1, description="References per batch")
    lr: float = Field(1e-3, gt=0, description="Constant Adam learning rate")
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)
    epochs: int = Field(30, ge=0)
    seed: int = Field(0)
    checkpoint_interval: int = Field(10, ge=1, description="Save a checkpoint every N epochs")
    loss: LossKind = Field(LossKind.L1)
    batches_per_epoch: Optional[int] = Field(None, ge=1, description="Default: ceil(#scans / n_q)")
    neighbor_fraction: float = Field(0.5, ge=0, le=1, description="Share of references drawn from labeled neighbors")
    prefetch: int = Field(0, ge=0, description="Bounded queue size for background batch assembly (0 = inline)")

    @classmethod
    def from_key_values(cls, values: Dict[str, str]) -> "TrainConfig":
        return cls(**{k: v for k, v in values.items() if k in cls.model_fields})

    def to_key_values(self) -> Dict[str, str]:
        return {k: (v.value if isinstance(v, enum.Enum) else str(v)) for k, v in self.model_dump().items() if v is not None}
