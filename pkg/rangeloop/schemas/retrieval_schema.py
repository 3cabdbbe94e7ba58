import enum
from typing import Dict, List

from pydantic import BaseModel, ConfigDict, Field, field_validator


class PositiveRule(str, enum.Enum):
    """Wann eine Referenz als korrekter Loop zählt"""
    OVERLAP = "overlap"
    DISTANCE = "distance"


class EvalProtocol(BaseModel):
    model_config = ConfigDict(frozen=True)

    rule: PositiveRule = Field(PositiveRule.OVERLAP)
    threshold: float = Field(0.3, gt=0, lt=1, description="Positive if overlap > threshold")
    radius: float = Field(4.0, gt=0, description="Positive if distance < radius (meters)")
    exclusion_window: int = Field(100, ge=0, description="Exclude ids with |id - query_id| <= window")
    ks: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5, 10], description="k values for AR@k")

    @field_validator("ks", mode="before")
    @classmethod
    def parse_ks(cls, v):
        if isinstance(v, str):
            v = [int(k) for k in v.split(",") if k.strip()]
        v = sorted(set(int(k) for k in v))
        if not v or v[0] < 1:
            raise ValueError("ks must contain positive integers")
        return v

    @classmethod
    def from_key_values(cls, values: Dict[str, str]) -> "EvalProtocol":
        return cls(**{k: v for k, v in values.items() if k in cls.model_fields})


class EvalReport(BaseModel):
    """Ergebnis einer Place-Recognition-Evaluation"""
    queries_total: int
    queries_evaluated: int = Field(..., description="Queries with at least one true positive")
    database_size: int
    recall_at_1: float
    recall_at_1pct: float
    ar_at_k: Dict[int, float] = Field(default_factory=dict)
    search_ms_per_query: float = 0.0

    def metrics(self) -> Dict[str, float]:
        values = {"Recall@1": self.recall_at_1, "Recall@1%": self.recall_at_1pct}
        values.update({f"AR@{k}": v for k, v in sorted(self.ar_at_k.items())})
        return values

    def as_lines(self) -> List[str]:
        lines = [f"{name} {round(value, 6)}" for name, value in self.metrics().items()]
        lines += [
            f"queries_evaluated {self.queries_evaluated}",
            f"queries_total {self.queries_total}",
            f"database_size {self.database_size}",
            f"search_ms_per_query {self.search_ms_per_query:.4f}",
        ]
        return lines
