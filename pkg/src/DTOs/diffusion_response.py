from pydantic import BaseModel, Field

from src.DTOs.pseudo_orbit import PseudoOrbit, VerificationReport


class RunMetadata(BaseModel):
    """
    Metadata of one diffusion run
    """

    version: str = Field(description="API version that built the orbit")
    created_at: str = Field(description="ISO timestamp of the request")
    duration_seconds: float = Field(description="wall time of construction and verification")
    mu: float = Field(description="a1/a2 of the reduced system")
    eps: float = Field(description="reduced perturbation size")
    scatter_legs: int
    inner_legs: int


class DiffusionResponse(BaseModel):
    """
    Pseudo-orbit together with its independent verification
    """

    metadata: RunMetadata
    orbit: PseudoOrbit
    verification: VerificationReport
