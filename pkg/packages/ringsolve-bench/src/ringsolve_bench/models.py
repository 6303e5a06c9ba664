"""Pydantic models for benchmark configuration and reports."""

from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class VerifyLevel(str, Enum):
    """How much of the check suite to run."""

    QUICK = "quick"
    FULL = "full"


class ErrorMetrics(BaseModel):
    """Errors of a computed boundary operator against reference solvers.

    A metric is None when its oracle was not run at this size.
    """

    e1: Optional[float] = Field(None, ge=0, description="Largest entry error of the inverse")
    e2: Optional[float] = Field(None, ge=0, description="Operator 2-norm error of the inverse")
    e3: Optional[float] = Field(None, ge=0, description="2-norm error for a random unit load")
    e4: Optional[float] = Field(None, ge=0, description="2-norm error of the first column")

    @property
    def dense_ran(self) -> bool:
        return self.e1 is not None

    @property
    def cg_ran(self) -> bool:
        return self.e3 is not None


class RunReport(BaseModel):
    """One benchmark row: a grid size and seed."""

    n: int = Field(..., description="Number of interior nodes, m * m")
    m: int = Field(..., ge=2, description="Interior grid side")
    eps: float = Field(..., gt=0, description="HSS truncation accuracy")
    leaf_max: int = Field(..., ge=1, description="Largest HSS leaf block")
    seed: int = Field(..., description="Grid generator seed")
    t_invert_s: float = Field(..., ge=0, description="Wall seconds to build the boundary operator")
    t_apply_s: float = Field(..., ge=0, description="Median wall seconds to apply it once")
    mem_floats: int = Field(..., ge=0, description="Peak floats held by the sweep")
    step_times: list[float] = Field(default_factory=list, description="Wall seconds per ring")
    retessellations: list[int] = Field(
        default_factory=list, description="Rings whose Schur term was re-tessellated"
    )
    errors: ErrorMetrics = Field(default_factory=ErrorMetrics)

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "n": 10000,
                "m": 100,
                "eps": 1e-7,
                "leaf_max": 64,
                "seed": 1,
                "t_invert_s": 2.1,
                "t_apply_s": 0.0004,
                "mem_floats": 61234,
                "step_times": [0.0001, 0.0002],
                "retessellations": [33],
                "errors": {"e1": 1.3e-8, "e2": 1.4e-7, "e3": 2.6e-8, "e4": 3.3e-8},
            }
        }
    )

    @model_validator(mode="after")
    def n_is_m_squared(self) -> "RunReport":
        if self.n != self.m * self.m:
            raise ValueError(f"n must equal m * m = {self.m * self.m}, got {self.n}")
        if any(t < 0 for t in self.step_times):
            raise ValueError("step times must be non-negative")
        return self


class BenchConfig(BaseModel):
    """Parameters of a benchmark run."""

    sizes: list[int] = Field(..., min_length=1, description="Grid sizes m")
    seeds: list[int] = Field(default=[1], min_length=1, description="Grid generator seeds")
    eps: float = Field(default=1e-7, gt=0, description="HSS truncation accuracy")
    leaf_max: int = Field(default=64, ge=1, description="Largest HSS leaf block")
    cond_low: float = Field(default=1.0, gt=0, description="Lower conductivity bound")
    cond_high: float = Field(default=2.0, gt=0, description="Upper conductivity bound")
    apply_repeats: int = Field(default=3, ge=1, description="Timed applications per row")
    oracle_cap: int = Field(default=200, ge=0, description="Largest m for e1/e2")
    cg_cap: int = Field(default=700, ge=0, description="Largest m for e3/e4")
    cg_tol: float = Field(default=1e-12, gt=0, description="CG relative residual")
    cg_maxiter_factor: int = Field(default=20, ge=1, description="CG iteration cap per unit m")
    power_iterations: int = Field(default=50, ge=1, description="Power iterations for e2")
    power_rtol: float = Field(default=1e-3, gt=0, description="Convergence of the e2 estimate")
    densify_cap: int = Field(default=8192, ge=1, description="Largest densified HSS size")

    @field_validator("sizes")
    @classmethod
    def sizes_must_be_even(cls, v: list[int]) -> list[int]:
        bad = [m for m in v if m < 2 or m % 2]
        if bad:
            raise ValueError(f"grid sizes must be even and >= 2, got {bad}")
        return v

    @model_validator(mode="after")
    def interval_is_ordered(self) -> "BenchConfig":
        if self.cond_low > self.cond_high:
            raise ValueError(
                f"cond_low ({self.cond_low}) must not exceed cond_high ({self.cond_high})"
            )
        return self


class CheckResult(BaseModel):
    """Outcome of one verification check."""

    name: str
    passed: bool
    detail: str = ""
    seconds: float = Field(0.0, ge=0)
