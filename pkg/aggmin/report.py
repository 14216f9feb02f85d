from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field


class DiagnosticRecord(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    op: str
    params: Dict[str, Any] = Field(default_factory=dict)
    residuals: Dict[str, Any] = Field(default_factory=dict)
    passed: Optional[bool] = Field(None, alias="pass")


class DiagnosticsReport(BaseModel):
    """Ordered records {op, params, residuals, pass} from one command."""

    records: List[DiagnosticRecord] = Field(default_factory=list)

    def add(
        self, op: str, params=None, residuals=None, passed: Optional[bool] = None
    ) -> DiagnosticRecord:
        record = DiagnosticRecord(
            op=op, params=params or {}, residuals=residuals or {}, passed=passed
        )
        self.records.append(record)
        return record

    @property
    def failed(self) -> List[DiagnosticRecord]:
        return [r for r in self.records if r.passed is False]

    def to_json(self) -> str:
        return self.model_dump_json(by_alias=True, indent=2)


class RunManifest(BaseModel):
    command: str
    config: Dict[str, Any]
    inputs: List[str] = Field(default_factory=list)
    outputs: List[str] = Field(default_factory=list)
    version: str
    seed: Optional[int] = None
    duration: float
    exit_code: int = 0
