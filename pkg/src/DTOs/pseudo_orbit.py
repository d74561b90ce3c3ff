import math
from enum import Enum
from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, Field, computed_field, field_serializer

from src.DTOs.inner import InnerState, ResonanceRegion
from src.DTOs.scattering import ScatteringState


class DiffusionPolicy(BaseModel):
    """Budget constants of the pseudo-orbit construction, derived from the tolerances and eps."""

    side: Literal["right", "left"] = Field(
        description="right: window (rho, theta_plus(I)) for a1 > 0; left: (theta_minus(I), 2pi - rho) for a1 < 0"
    )
    rho: float
    margin: float = Field(description="distance kept from both window ends")
    level_budget: float = Field(description="largest accepted |L*(after) - L*(before)| of a scatter leg")
    torus_budget: float = Field(description="largest accepted torus-function drift of an inner leg")
    t_max: float = Field(description="search horizon of one inner leg")
    max_legs: int


class ScatterLeg(BaseModel):
    kind: Literal["scatter"] = "scatter"
    before: ScatteringState
    after: ScatteringState
    tau_star: float
    level_residual: float = Field(description="|L*(after) - L*(before)|")


class InnerLeg(BaseModel):
    kind: Literal["inner"] = "inner"
    start: InnerState
    end: InnerState
    duration: float = Field(description="integration time, a multiple of 2pi")
    region: ResonanceRegion
    torus_drift: float = Field(description="|F(end) - F(start)| with F the torus function of the start region")


Leg = Annotated[Union[ScatterLeg, InnerLeg], Field(discriminator="kind")]


class PseudoOrbit(BaseModel):
    """
    Alternating scatter and inner legs from I_start to I_end.

    Scatter legs live on the section s = 0 (mod 2pi) of the (possibly conjugated) system, where theta = phi.
    """

    legs: List[Leg] = Field(default_factory=list)
    policy: DiffusionPolicy
    I_start: float
    I_end: float
    eps: float
    s_section: float = Field(0.0, description="time section of the stored orbit in the original system (pi for a2 < 0)")

    @property
    def scatter_legs(self) -> List[ScatterLeg]:
        return [leg for leg in self.legs if leg.kind == "scatter"]

    @property
    def inner_legs(self) -> List[InnerLeg]:
        return [leg for leg in self.legs if leg.kind == "inner"]

    @property
    def final_action(self) -> float:
        if not self.legs:
            return self.I_start
        _last = self.legs[-1]
        return _last.after.I if _last.kind == "scatter" else _last.end.I


class BracketVerdict(str, Enum):
    TRANSVERSAL = "transversal"
    TANGENT_LINE = "tangent-line"


class TransversalityReport(BaseModel):
    I: float
    theta: float
    region: ResonanceRegion
    bracket: float = Field(description="Poisson bracket {F, L*} at (I, theta)")
    verdict: BracketVerdict


class CheckResult(BaseModel):
    name: str
    passed: bool
    detail: str = ""
    value: Optional[float] = None

    @field_serializer("value")
    def _finite_value(self, value: Optional[float]) -> Optional[float]:
        # failed recomputations are stored as inf, which JSON cannot carry
        return value if value is None or math.isfinite(value) else None


class VerificationReport(BaseModel):
    checks: List[CheckResult] = Field(default_factory=list)

    @computed_field
    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def failed(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]
