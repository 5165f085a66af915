"""
Pydantic schemas for the machine-readable outputs.
"""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class ResidualReport(BaseModel):
    """One verifier run on one scenario; passed <=> max_residual <= bound."""
    scenario: str
    verifier: str
    mode: Optional[str] = None
    p: int
    samples: int
    residuals: List[float] = Field(default_factory=list)
    max_residual: float
    bound: float
    passed: bool = Field(alias="pass")
    seed: int
    budget: Dict[str, Any] = Field(default_factory=dict)
    wall_time: float = 0.0
    flags: List[str] = Field(default_factory=list)
    extra: Dict[str, Any] = Field(default_factory=dict)

    class Config:
        populate_by_name = True


class ConstantsReport(BaseModel):
    """Certified constants of one scenario's operator."""
    scenario: str
    kind: str
    a: float
    t: float
    b: float
    inv: float
    n0: int
    op_norm: float
    hyperbolic: bool
    delta: float
    eps: float
    C: float
    corr: float


class SolveReport(BaseModel):
    """h(x) and h^-1(x) at one requested point."""
    scenario: str
    point: Any
    h: Any
    h_error: float
    h_inverse: Any
    h_inverse_error: float
    K: int
    m: int
    mode: Optional[str] = None
    wall_time: float = 0.0


class SweepRow(BaseModel):
    """One row of sweep.csv."""
    scenario: str
    axis: str
    value: float
    max_residual: float
    bound: float
    wall_time: float
    contraction_ratio: Optional[float] = None
    passed: bool = Field(alias="pass")

    class Config:
        populate_by_name = True
