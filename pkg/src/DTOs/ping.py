from pydantic import BaseModel, Field


class Ping(BaseModel):
    """Health-check answer of the scattering API."""

    status: str = Field("ok", description="'ok' while the service accepts requests", examples=["ok"])
    version: str = Field("", description="API version of the running server", examples=["0.1.0"])
    output_schema: int = Field(1, description="schema version of the CLI output files", examples=[1])
