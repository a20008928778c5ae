import re
from typing import Optional, List
from pydantic import BaseModel, Field, field_validator, model_validator

# name -> (min params, max params)
FAMILY_ARITY = {
    "dirac": (1, 1),
    "bernoulli": (1, 1),
    "exp": (0, 1),
    "gamma": (1, 2),
    "geometric": (1, 1),
    "pareto": (1, 1),
    "beta": (2, 2),
    "zipf": (1, 1),
    "linear": (1, 1),
    "ramp": (1, 1),
    "uniform": (1, 1),
}

IID_FAMILIES = {"dirac", "bernoulli", "exp", "gamma", "geometric", "pareto", "beta"}
DENSITY_FAMILIES = {"linear", "ramp", "uniform"}

_DESCRIPTOR_PATTERN = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


class LawDescriptor(BaseModel):
    name: str
    params: List[float] = Field(default_factory=list)

    @field_validator('name')
    def validate_name(cls, v):
        v = v.strip().lower()
        if v not in FAMILY_ARITY:
            raise ValueError(f"Unknown family '{v}' (known: {', '.join(sorted(FAMILY_ARITY))})")
        return v

    @model_validator(mode='after')
    def validate_params(self):
        low, high = FAMILY_ARITY[self.name]
        if not low <= len(self.params) <= high:
            raise ValueError(f"{self.name} takes {low}..{high} parameters, got {len(self.params)}")
        p = self.params
        if self.name == "dirac" and not p[0] > 0:
            raise ValueError('dirac location must be positive')
        if self.name == "bernoulli" and not 0 < p[0] <= 1:
            raise ValueError('bernoulli p must lie in (0, 1]')
        if self.name == "exp" and p and not p[0] > 0:
            raise ValueError('exp rate must be positive')
        if self.name == "gamma" and not all(v > 0 for v in p):
            raise ValueError('gamma shape and rate must be positive')
        if self.name == "geometric" and not 0 < p[0] < 1:
            raise ValueError('geometric p must lie in (0, 1)')
        if self.name == "pareto" and not -1 < p[0] < 0:
            raise ValueError('pareto alpha must lie in (-1, 0)')
        if self.name == "beta" and not (p[0] > 0 and p[1] > 0):
            raise ValueError('beta parameters must be positive')
        if self.name == "zipf" and not p[0] > -1:
            raise ValueError('zipf alpha must exceed -1')
        if self.name in DENSITY_FAMILIES and not p[0] > 0:
            raise ValueError(f'{self.name} support length must be positive')
        return self

    @classmethod
    def parse(cls, text: str) -> "LawDescriptor":
        """Parse 'name(p1, p2)' text such as 'exp(1)' or 'beta(1,2)'."""
        match = _DESCRIPTOR_PATTERN.match(text.lower())
        if not match:
            raise ValueError(f"Cannot parse family descriptor '{text}'")
        name, args = match.group(1), match.group(2)
        params = [float(a) for a in args.split(",") if a.strip()] if args else []
        return cls(name=name, params=params)

    @property
    def kind(self) -> str:
        if self.name == "zipf":
            return "zipf"
        if self.name in DENSITY_FAMILIES:
            return "density"
        return "iid"

    def label(self) -> str:
        return f"{self.name}({','.join(f'{v:g}' for v in self.params)})"


class ProfileDescriptor(BaseModel):
    n: int = Field(ge=1)
    ordering: str
    seed: Optional[int] = None
    scale: float = 1.0
    kind: str = "explicit"
    family: Optional[LawDescriptor] = None
    weights_hex: Optional[List[str]] = None  # float.hex encoding, bit-exact

    @model_validator(mode='after')
    def validate_weights(self):
        if self.weights_hex is not None and len(self.weights_hex) != self.n:
            raise ValueError(f"Expected {self.n} weights, got {len(self.weights_hex)}")
        if self.weights_hex is None and self.family is None:
            raise ValueError('A profile needs explicit weights or a family to regenerate them')
        return self


ORDERING_ALIASES = {
    "ex": "exchangeable",
    "exchangeable": "exchangeable",
    "dec": "decreasing",
    "decreasing": "decreasing",
    "inc": "increasing",
    "increasing": "increasing",
}
