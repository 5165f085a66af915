"""
Pydantic schemas for scenario files.
"""

from enum import Enum
from typing import Annotated, Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from conjulab.core.config import settings


# Operator descriptors

class DiagonalSpec(BaseModel):
    """T(x)_i = w_i x_i"""
    kind: Literal["diagonal"]
    weights: List[float] = Field(min_length=1)


class BlockSpec(BaseModel):
    """T = P diag(A_M, A_N) P^-1"""
    kind: Literal["block"]
    P: List[List[float]]
    A_M: List[List[float]]
    A_N: List[List[float]]


class ShiftSpec(BaseModel):
    """Two-level weighted shift on bilateral sequences"""
    kind: Literal["shift"]
    lambda_minus: float
    lambda_plus: float
    m0: int = 0


OperatorSpec = Annotated[Union[DiagonalSpec, BlockSpec, ShiftSpec], Field(discriminator="kind")]


# Perturbation descriptors

class ConstSpec(BaseModel):
    kind: Literal["const"]
    c: Union[List[float], Dict[str, float]]


class SineSpec(BaseModel):
    kind: Literal["sine"]
    i: int
    A: float
    w: float
    target: Optional[int] = None


class ClampLinearSpec(BaseModel):
    kind: Literal["clamp_linear"]
    B: List[List[float]]
    R: float = Field(gt=0)
    window: Optional[List[int]] = None


class SumSpec(BaseModel):
    kind: Literal["sum"]
    args: List["PerturbationSpec"] = Field(min_length=1)


class ScaleSpec(BaseModel):
    kind: Literal["scale"]
    alpha: float
    arg: "PerturbationSpec"


class ComposeSpec(BaseModel):
    """[f, g] is x -> f(x + g(x))"""
    kind: Literal["compose"]
    args: List["PerturbationSpec"] = Field(min_length=2, max_length=2)


PerturbationSpec = Annotated[
    Union[ConstSpec, SineSpec, ClampLinearSpec, SumSpec, ScaleSpec, ComposeSpec],
    Field(discriminator="kind")
]

SumSpec.model_rebuild()
ScaleSpec.model_rebuild()
ComposeSpec.model_rebuild()


# Run options

class BudgetSpec(BaseModel):
    tau: float = Field(default=1e-8, gt=0)
    max_K: int = Field(default=settings.MAX_K, ge=1)
    max_m: int = Field(default=settings.MAX_M, ge=1)


class SampleSpec(BaseModel):
    count: int = Field(default=settings.DEFAULT_SAMPLE_COUNT, ge=0)
    radius: float = Field(default=settings.DEFAULT_SAMPLE_RADIUS, gt=0)
    seed: int = settings.DEFAULT_SEED
    corners: bool = True


class SweepAxis(str, Enum):
    EPS_FRACTION = "eps_fraction"
    P = "p"
    K = "K"
    M = "m"


class SweepSpec(BaseModel):
    axis: SweepAxis
    values: List[float] = Field(min_length=1)


class NonuniquenessSpec(BaseModel):
    """Seed vector y in M and T(N), fixed-point window K and the family parameters."""
    y: Dict[str, float] = Field(default_factory=lambda: {"0": 1.0})
    K: int = Field(default=40, ge=1)
    lambdas: List[float] = Field(default_factory=lambda: [0.1, 1.0])


class VerifierName(str, Enum):
    CONJUGACY = "conjugacy"
    INVERSE_PAIR = "inverse_pair"
    FRANKS = "franks"
    CORRESPONDENCE = "correspondence"
    SERIES_ROUNDTRIP = "series_roundtrip"
    CONTRACTION = "contraction"
    DOUBLING = "doubling"
    MEMBERSHIP_Y = "membership_Y"
    NONUNIQUENESS = "nonuniqueness"
    UNIQUENESS = "uniqueness"


class Scenario(BaseModel):
    """One experiment: operator, perturbation tuple and what to run on it."""
    id: str = Field(min_length=1)
    operator: OperatorSpec
    t: Union[float, Literal["auto"]] = "auto"
    p: int = Field(default=1, ge=1)
    perturbations: List[PerturbationSpec] = Field(min_length=1)
    alt_perturbations: Optional[List[PerturbationSpec]] = None
    mode: Literal["A", "B"] = "A"
    delta: float = Field(default=0.5, gt=0, lt=1)
    budget: BudgetSpec = Field(default_factory=BudgetSpec)
    samples: SampleSpec = Field(default_factory=SampleSpec)
    verifiers: List[VerifierName] = Field(
        default_factory=lambda: [VerifierName.CONJUGACY, VerifierName.INVERSE_PAIR, VerifierName.FRANKS]
    )
    points: List[Any] = Field(default_factory=list)
    sweep: Optional[SweepSpec] = None
    nonuniqueness: Optional[NonuniquenessSpec] = None

    @field_validator("t")
    @classmethod
    def _check_t(cls, value):
        if value != "auto" and not 0 < value < 1:
            raise ValueError("t must lie in (0, 1) or be 'auto'")
        return value

    @model_validator(mode="after")
    def _check_tuple_lengths(self) -> "Scenario":
        for name in ("perturbations", "alt_perturbations"):
            maps = getattr(self, name)
            if maps is not None and len(maps) not in (1, self.p):
                raise ValueError(f"{name} must have length 1 or p={self.p}, got {len(maps)}")
        if VerifierName.CORRESPONDENCE in self.verifiers and self.alt_perturbations is None:
            raise ValueError("the correspondence verifier needs alt_perturbations")
        return self


class ScenarioFile(BaseModel):
    """Top-level scenario file: {"schema": 1, "scenarios": [...]}"""
    schema_version: Literal[1] = Field(alias="schema")
    scenarios: List[Scenario] = Field(min_length=1)

    class Config:
        populate_by_name = True

    @model_validator(mode="after")
    def _check_unique_ids(self) -> "ScenarioFile":
        ids = [s.id for s in self.scenarios]
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        if duplicates:
            raise ValueError(f"duplicate scenario ids: {', '.join(duplicates)}")
        return self
