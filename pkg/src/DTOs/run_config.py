import os
from enum import Enum
from typing import Optional

from pydantic import BaseModel, Field, model_validator

from src.DTOs.scattering import MINIMAL_ABS, TauCriterion
from src.DTOs.system_params import SystemParams
from src.settings import Tolerances


class OutputFormat(str, Enum):
    CSV = "csv"
    JSONL = "jsonl"


class RunConfig(BaseModel):
    """
    Everything one CLI command needs: the system, the grids, the output sink and the tolerances.
    """

    command: str = Field(examples=["thresholds", "portrait", "diffuse"])
    params: SystemParams = Field(default_factory=SystemParams)
    tol: Tolerances = Field(default_factory=Tolerances)
    criterion: TauCriterion = MINIMAL_ABS
    I_min: float = Field(-2.0, description="lower end of the action grid")
    I_max: float = Field(2.0, description="upper end of the action grid")
    grid_n: int = Field(101, ge=2, description="number of points per grid axis")
    angles_n: int = Field(8, ge=1, description="start angles per action of inner-portrait orbits")
    I_start: float = Field(-1.0, description="start action of a diffusion run")
    I_end: float = Field(1.0, description="target action of a diffusion run")
    t_final: float = Field(200.0, gt=0, description="integration time of inner-portrait orbits")
    out: Optional[str] = Field(None, description="output path, stdout if omitted")
    format: OutputFormat = OutputFormat.CSV
    threads: int = Field(
        default_factory=lambda: os.cpu_count() or 1, ge=1, description="worker processes for grid sweeps"
    )
    inject: Optional[str] = Field(
        None, description="deliberate fault for the verify command", examples=["a2-sign-flip"]
    )

    @model_validator(mode="after")
    def _check_grid(self):
        if not self.I_min < self.I_max:
            raise ValueError(f"empty action grid: I_min={self.I_min} must be smaller than I_max={self.I_max}")
        return self
