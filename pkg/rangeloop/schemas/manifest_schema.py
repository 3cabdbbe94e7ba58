from typing import Dict, List

from pydantic import BaseModel, Field


class RunManifest(BaseModel):
    """Protokoll eines CLI-Laufs: reicht aus, um jede Ausgabe aus Konfiguration und Seed zu reproduzieren"""
    command: str
    argv: List[str]
    profile: str
    seed: int
    precision: str
    config: Dict[str, Dict[str, str]] = Field(default_factory=dict, description="Resolved configuration sections")
    versions: Dict[str, str] = Field(default_factory=dict)
    outputs: List[str] = Field(default_factory=list, description="Files written, relative to the output directory")
