from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field


class CrestKind(str, Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"
    SINGULAR = "singular"


class CrestBranch(BaseModel):
    """
    One unwrapped branch of a crest.

    Even ``k`` belong to the crest C_M (through (0, 0)), odd ``k`` to C_m (through (pi, pi)).
    """

    k: int = Field(description="unwrapped branch index", examples=[0, 1, 2])
    kind: CrestKind
    I: float = Field(description="action")

    class Config:
        frozen = True


class CrestPoint(BaseModel):
    I: float
    phi: float
    sigma: float
    branch: CrestBranch


class TangencyPoint(BaseModel):
    I: float
    angle: float = Field(description="phi for horizontal crests, sigma for vertical crests (in [0, 2pi))")
    branch: CrestBranch
    slope: float = Field(description="slope of the crest at the point, in the crest's own parameterization")


class ThresholdInterval(BaseModel):
    lower: float
    upper: float
    kind: CrestKind
    tangency: bool


class MissingThreshold(BaseModel):
    """A threshold that does not exist for this mu, or lies outside the analysis window."""

    name: str
    family: str = Field(examples=["alpha", "beta"])
    reason: str
    asymptote: Optional[float] = Field(None, description="limit of |alpha| or |beta| on the component, if finite")


class ClassificationReport(BaseModel):
    """
    Thresholds in I where |alpha(I)| = 1/|mu| (crest kind changes) and |beta(I)| = 1/|mu| (tangencies appear),
    together with the labelled intervals between them.
    """

    mu: float
    r: float
    window: tuple[float, float]
    alpha_thresholds: List[float] = Field(default_factory=list)
    beta_thresholds: List[float] = Field(default_factory=list)
    labels: dict[str, float] = Field(
        default_factory=dict,
        description="named thresholds I_b < I_a < I_c <= I_C < I_A < I_B (only the existing ones, r = 1 only)",
    )
    intervals: List[ThresholdInterval] = Field(default_factory=list)
    missing: List[MissingThreshold] = Field(default_factory=list)

    def interval_of(self, action: float) -> Optional[ThresholdInterval]:
        for _interval in self.intervals:
            if _interval.lower <= action <= _interval.upper:
                return _interval
        return None
