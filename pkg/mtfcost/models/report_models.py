from typing import Optional, List, Dict, Any
from pydantic import BaseModel, ConfigDict, Field


class AnalyticSummary(BaseModel):
    family: str
    ordering: str
    t: Optional[float] = None  # None means stationary
    mu: float
    phi_t: float
    threshold: float
    out_mass: float
    tv_exact: float
    tv_bound: float


class BatchHeader(BaseModel):
    n: int
    ordering: str
    t: Optional[float] = None
    t_unit_rate: Optional[float] = None
    t_original: Optional[float] = None
    seed: int
    m: int
    family: str
    sampler: str
    quenched: bool = False


class ValidationReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    statistic: str
    value: float
    threshold: float
    passed: bool = Field(alias="pass")
    details: Dict[str, Any] = Field(default_factory=dict)


class ConvergenceRow(BaseModel):
    n: int
    w1: float
    ks: float
    out_mass_error: float
    dkw_band: float


class FaultReport(BaseModel):
    family: str
    ordering: str
    t: Optional[float] = None
    delta: float
    probability: float
    pac: Optional[float] = None
    tail_quadrature: Optional[float] = None
    agreement: Optional[float] = None


class CommandResult(BaseModel):
    command: str
    files: List[str] = Field(default_factory=list)
    reports: List[ValidationReport] = Field(default_factory=list)
    summary: Optional[Dict[str, Any]] = None
    config: Optional[Dict[str, Any]] = None

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)
