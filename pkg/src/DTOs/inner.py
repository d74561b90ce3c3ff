from enum import Enum
from typing import List

from pydantic import BaseModel, Field


class ResonanceRegion(str, Enum):
    RES0 = "res0"
    RES1 = "res1"
    NON_RESONANT = "non_resonant"


class InnerState(BaseModel):
    """A point (I, phi, s) of the NHIM; phi and s are unwrapped reals."""

    I: float
    phi: float
    s: float = Field(0.0, description="time angle")


class TorusModel(BaseModel):
    region: ResonanceRegion
    value: float = Field(description="truncated first-order torus function F^region at the state")


class InnerSample(BaseModel):
    t: float
    state: InnerState


class InnerOrbit(BaseModel):
    """Stroboscopic samples (s = s0 + 2pi n) of one inner trajectory."""

    start: InnerState
    samples: List[InnerSample] = Field(default_factory=list)
