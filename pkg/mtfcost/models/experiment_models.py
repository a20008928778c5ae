from typing import Optional, List, Any
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from mtfcost.config import SIMULATION

from .law_models import LawDescriptor, ORDERING_ALIASES

COMMANDS = ("analytic", "simulate", "exact", "convergence", "lru", "order-check")
SAMPLERS = ("fast", "event")


class ExperimentConfig(BaseModel):
    """Fully resolved experiment settings; written verbatim into every JSON sidecar."""

    model_config = ConfigDict(populate_by_name=True)

    command: str
    family: LawDescriptor = Field(default_factory=lambda: LawDescriptor(name="exp", params=[1.0]))
    n: int = Field(default=1000, ge=1)
    ordering: str = "exchangeable"
    t: Optional[float] = None
    stationary: bool = False
    m: int = Field(default_factory=lambda: SIMULATION["default_m"], ge=1)
    seed: int = Field(default_factory=lambda: SIMULATION["default_seed"])
    delta: Optional[float] = None
    ladder: List[int] = Field(default_factory=list)
    grid: int = Field(default=201, ge=2)
    sampler: str = "fast"
    quenched: bool = False
    validate_batch: bool = Field(default=False, alias="validate")
    pac: bool = False
    out: str = "results"
    metrics_file: Optional[str] = None

    @field_validator('command')
    def validate_command(cls, v):
        if v not in COMMANDS:
            raise ValueError(f"Unknown command '{v}'")
        return v

    @field_validator('family', mode='before')
    def parse_family(cls, v):
        if isinstance(v, str):
            return LawDescriptor.parse(v)
        return v

    @field_validator('ordering', mode='before')
    def parse_ordering(cls, v):
        key = str(v).strip().lower()
        if key not in ORDERING_ALIASES:
            raise ValueError(f"Unknown ordering '{v}' (use ex, dec or inc)")
        return ORDERING_ALIASES[key]

    @field_validator('sampler')
    def validate_sampler(cls, v):
        if v not in SAMPLERS:
            raise ValueError(f"Unknown sampler '{v}'")
        return v

    @field_validator('ladder', mode='before')
    def parse_ladder(cls, v):
        if isinstance(v, str):
            return [int(float(part)) for part in v.replace(";", ",").split(",") if part.strip()]
        return v

    @model_validator(mode='before')
    @classmethod
    def parse_stationary_time(cls, data: Any):
        if isinstance(data, dict) and isinstance(data.get("t"), str):
            if data["t"].strip().lower() in ("stationary", "inf", "infinity"):
                data = {**data, "t": None, "stationary": True}
        return data

    @model_validator(mode='after')
    def validate_ranges(self):
        if self.t is not None and not self.t >= 0:
            raise ValueError('t must be nonnegative')
        if self.t is not None and self.stationary:
            raise ValueError('Pass either t or stationary, not both')
        if self.t is None and not self.stationary:
            raise ValueError('Pass t or stationary')
        if self.t == 0 and self.command not in ("exact", "simulate"):
            raise ValueError('Limiting laws need t > 0; use stationary for t = infinity')
        if self.t == 0 and self.validate_batch:
            raise ValueError('validate compares with a limiting law and needs t > 0')
        if self.delta is not None and not 0 < self.delta < 1:
            raise ValueError('delta must lie in (0, 1)')
        if self.command == "lru" and self.delta is None:
            raise ValueError('lru needs delta')
        if self.pac and self.pac_alpha is None:
            raise ValueError('pac requires family pareto(alpha) or zipf(alpha) with -1 < alpha < 0')
        if any(v < 1 for v in self.ladder):
            raise ValueError('ladder sizes must be positive')
        return self

    @property
    def time(self) -> float:
        """Scaled time, +inf for the stationary regime."""
        return float("inf") if self.stationary else float(self.t)

    @property
    def pac_alpha(self) -> Optional[float]:
        """Pareto exponent of the incomplete-gamma fault formula; zipf(alpha) with alpha in (-1, 0) has the same one."""
        if self.family.name == "pareto" and self.family.params:
            return self.family.params[0]
        if self.family.name == "zipf" and self.family.params and -1 < self.family.params[0] < 0:
            return self.family.params[0]
        return None
