from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class CriterionResult(BaseModel):
    """Outcome of one acceptance criterion."""
    name: str
    description: str
    passed: bool
    measured: Dict[str, float] = Field(default_factory=dict)
    thresholds: Dict[str, float] = Field(default_factory=dict)
    detail: Optional[str] = None


class AcceptanceReport(BaseModel):
    """Outcome of the acceptance suite."""
    passed: bool
    criteria: List[CriterionResult]
    scale: Dict[str, int]
    workers: int

    @property
    def failures(self) -> List[str]:
        return [c.name for c in self.criteria if not c.passed]
