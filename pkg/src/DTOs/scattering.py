import math
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from src.DTOs.crest import CrestBranch
from src.errors import ConfigurationError

TWO_PI = 2.0 * math.pi


class CriterionKind(str, Enum):
    DOWN = "down"
    UP = "up"
    MINIMAL_ABS = "minabs"
    BRANCH = "branch"


class TauCriterion(BaseModel):
    """
    Selection rule for tau* along a NHIM line.

    - ``down`` / ``up``: first crossing with the crest C_M (even branches) going down / up from the diagonal
    - ``minabs``: crossing with the smallest |tau*| among all branches
    - ``branch=k``: crossing with the fixed unwrapped branch k (smallest |tau*| if several)
    """

    kind: CriterionKind
    k: Optional[int] = Field(None, description="branch index, only for kind 'branch'")

    class Config:
        frozen = True

    @model_validator(mode="after")
    def _check_branch_index(self):
        if self.kind == CriterionKind.BRANCH and self.k is None:
            raise ValueError("criterion 'branch' needs a branch index k")
        if self.kind != CriterionKind.BRANCH and self.k is not None:
            raise ValueError(f"criterion '{self.kind.value}' takes no branch index")
        return self

    @classmethod
    def parse(cls, text: str) -> "TauCriterion":
        """
        Parses the command-line notation: ``down``, ``up``, ``minabs`` or ``branch=k``.

        :raises ConfigurationError: for anything else
        """
        _text = text.strip().lower()
        if _text.startswith("branch"):
            _, _, _index = _text.partition("=")
            try:
                return cls(kind=CriterionKind.BRANCH, k=int(_index))
            except ValueError as ve:
                raise ConfigurationError(f"invalid branch criterion '{text}', expected branch=<int>") from ve
        try:
            return cls(kind=CriterionKind(_text))
        except ValueError as ve:
            raise ConfigurationError(f"unknown tau* criterion '{text}'") from ve

    def __str__(self) -> str:
        if self.kind == CriterionKind.BRANCH:
            return f"branch={self.k}"
        return self.kind.value


DOWN = TauCriterion(kind=CriterionKind.DOWN)
UP = TauCriterion(kind=CriterionKind.UP)
MINIMAL_ABS = TauCriterion(kind=CriterionKind.MINIMAL_ABS)


def branch(k: int) -> TauCriterion:
    return TauCriterion(kind=CriterionKind.BRANCH, k=k)


class TauSolution(BaseModel):
    tau_star: float
    branch_hit: CrestBranch
    theta: float
    I: float
    criterion: TauCriterion
    transversality: float = Field(description="|d residual / d tau| at tau* (normalized residual)")
    degenerate: bool = Field(description="True if the crossing is closer to a tangency than tol_degen")
    tie: bool = Field(False, description="True if another crossing had the same |tau*| within tol_tie")

    @property
    def phi_star(self) -> float:
        return self.theta - self.I * self.tau_star


class ScatteringState(BaseModel):
    """A point (I, theta) of the reduced outer dynamics, theta = phi - I*s, stored in [0, 2pi)."""

    I: float
    theta: float

    @field_validator("theta")
    @classmethod
    def _wrap_theta(cls, value: float) -> float:
        _wrapped = math.fmod(value, TWO_PI)
        if _wrapped < 0:
            _wrapped += TWO_PI
        # fmod of values just below 2pi may round up
        return 0.0 if _wrapped >= TWO_PI else _wrapped


class AtlasRegion(str, Enum):
    I = "I"
    II = "II"
    III = "III"


class AtlasPiece(BaseModel):
    region: AtlasRegion
    lower: float
    upper: float
    branch: int = Field(description="branch of the extended scattering map used in this region")


class PiecewiseMapAtlas(BaseModel):
    """The minimal-|tau*| global scattering map as a union of three extended maps."""

    pieces: List[AtlasPiece]
    discontinuities: List[float]


MINIMAL_ABS_ATLAS = PiecewiseMapAtlas(
    pieces=[
        AtlasPiece(region=AtlasRegion.I, lower=0.0, upper=math.pi / 2, branch=0),
        AtlasPiece(region=AtlasRegion.II, lower=math.pi / 2, upper=3 * math.pi / 2, branch=1),
        AtlasPiece(region=AtlasRegion.III, lower=3 * math.pi / 2, upper=TWO_PI, branch=2),
    ],
    discontinuities=[math.pi / 2, 3 * math.pi / 2],
)


class ScatteringStepResult(BaseModel):
    before: ScatteringState
    after: ScatteringState
    criterion: TauCriterion
    tau_star: float
    branch_hit: int
    level_before: float = Field(description="reduced Poincare function at the start point")
    level_after: Optional[float] = Field(None, description="reduced Poincare function at the image (same criterion)")
    region: Optional[AtlasRegion] = None
