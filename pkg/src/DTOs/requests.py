from typing import Optional

from pydantic import BaseModel, Field

from src.DTOs.scattering import MINIMAL_ABS, TauCriterion, branch
from src.DTOs.system_params import SystemParams


class SystemRequest(BaseModel):
    """
    Common part of every computation request: the system and optional tolerance overrides.

    Keys of ``tol_overrides`` are the tolerance field names (``tol_root``, ``delta_sing``, ...).
    """

    params: SystemParams = Field(default_factory=SystemParams)
    tol_overrides: dict[str, float] = Field(
        default_factory=dict, description="tolerance fields to override", examples=[{"tol_root": 1e-13}]
    )


class ThresholdRequest(SystemRequest):
    pass


class TauStarRequest(SystemRequest):
    I: float = Field(..., description="reduced action", examples=[0.5])
    theta: float = Field(..., description="angle theta = phi - I s", examples=[3.5])
    criterion: TauCriterion = Field(MINIMAL_ABS, examples=[{"kind": "branch", "k": 1}])


class ScatteringStepRequest(TauStarRequest):
    pass


class BracketRequest(TauStarRequest):
    criterion: TauCriterion = Field(
        branch(1), description="criterion of the scattering map", examples=[{"kind": "minabs"}]
    )


class DiffusionRequest(SystemRequest):
    I_start: float = Field(-1.0, examples=[-1.0])
    I_end: float = Field(1.0, examples=[1.0])
    theta_start: Optional[float] = Field(None, description="start angle, middle of the drift window if omitted")
