from pydantic import BaseModel, ConfigDict, Field, model_validator


class OverlapLabel(BaseModel):
    """Regressionsziel für ein (Query, Referenz)-Paar"""
    model_config = ConfigDict(frozen=True)

    query_id: int = Field(..., ge=0, description="Query scan index")
    reference_id: int = Field(..., ge=0, description="Reference scan index")
    overlap: float = Field(..., ge=0.0, le=1.0, description="Overlap in [0, 1]")

    @model_validator(mode="after")
    def validate_self_overlap(self):
        if self.query_id == self.reference_id and self.overlap != 1.0:
            raise ValueError(f"overlap of scan {self.query_id} with itself must be 1, got {self.overlap}")
        return self
