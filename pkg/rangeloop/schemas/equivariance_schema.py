from typing import List

from pydantic import BaseModel, Field

from ..models.conv import PadKind


class EquivarianceRow(BaseModel):
    """Maximale Abweichung pro Verschiebung k, über alle geprüften Bilder"""
    shift: int
    ccm: float = Field(..., ge=0)
    rtm: float = Field(..., ge=0)
    descriptor: float = Field(..., ge=0)


class EquivarianceReport(BaseModel):
    mode: PadKind
    precision: str
    image_count: int
    tolerance: float
    rows: List[EquivarianceRow]
    max_ccm: float
    max_rtm: float
    max_descriptor: float
    as_expected: bool = Field(..., description="Circular mode: within tolerance; zero mode: control exceeded 1e-3")
    verdict: str
