import math
import os
from functools import lru_cache

from dotenv import load_dotenv
from loguru import logger
from pydantic import BaseModel, Field, ValidationError

from src.errors import ConfigurationError

load_dotenv()

ENV_PREFIX = "ARNOLD_"


def get_log_level() -> str:
    """Log level for the CLI and the API, read from ``ARNOLD_LOG_LEVEL``."""
    return os.getenv(f"{ENV_PREFIX}LOG_LEVEL", "INFO")


class Tolerances(BaseModel):
    """
    Numerical tolerances and policy constants shared by every module.

    Each field can be overridden through an environment variable ``ARNOLD_<FIELD_NAME_UPPERCASE>``
    (or a ``.env`` file) and, on the command line, through ``--tol-override KEY=VAL``.
    """

    delta_sing: float = Field(1e-4, gt=0, le=1e-2, description="Taylor patch radius around removable singularities")
    tol_cls: float = Field(1e-9, gt=0, description="band around |mu*alpha| = 1 classified as singular")
    tol_threshold: float = Field(1e-10, gt=0, description="root tolerance for the crest thresholds in I")
    tol_root: float = Field(1e-12, gt=0, description="root tolerance for tau*")
    tol_degen: float = Field(1e-6, gt=0, description="minimum |d residual / d tau| of a transversal crossing")
    tol_disc: float = Field(1e-9, gt=0, description="exclusion band around the atlas discontinuity lines")
    tol_tie: float = Field(1e-9, gt=0, description="|tau*| difference below which two crossings are tied")
    tol_ode: float = Field(1e-10, gt=0, description="relative/absolute tolerance of the inner-flow integrator")
    tol_bracket: float = Field(1e-6, gt=0, description="|{F, L*}| below which the verdict is tangent-line")
    quad_abs: float = Field(1e-10, gt=0, description="absolute error target of the Melnikov quadrature")
    h_march_cap: float = Field(0.05, gt=0, le=0.5, description="upper bound of the tau-march step")
    tau_window_factor: float = Field(8 * math.pi, gt=0, description="tau_max = factor * max(1, 1/min-frequency)")
    tau_freq_floor: float = Field(1e-3, gt=0, description="frequencies below this count as this value for tau_max")
    i_min: float = Field(-5.0, description="lower end of the threshold analysis window")
    i_max: float = Field(5.0, description="upper end of the threshold analysis window")
    a_bar: float = Field(0.25, gt=0, lt=0.5, description="half-width of the resonant regions of the inner dynamics")
    rho_delta: float = Field(0.05, gt=0, lt=math.pi / 2, description="rho = pi + rho_delta (diffusion window start)")
    c_level: float = Field(10.0, gt=0, description="level residual budget of a scatter leg in units of eps^2")
    c_margin: float = Field(10.0, ge=0, description="window margin in units of eps^2")
    c_torus: float = Field(10.0, gt=0, description="torus drift budget of an inner leg in units of eps")
    eps_cap: float = Field(0.05, gt=0, description="largest eps accepted for diffusion runs")
    t_max_factor: float = Field(1e3, gt=0, description="inner-leg search horizon t_max = factor / eps")
    max_legs: int = Field(20000, ge=1, description="upper bound on the number of legs of one pseudo-orbit")

    class Config:
        frozen = True


def load_tolerances() -> Tolerances:
    """
    Builds the tolerances from the environment (``ARNOLD_TOL_ROOT=1e-13`` etc.).

    :raises ConfigurationError: if an environment value is not a valid number for its field
    """
    _overrides: dict[str, str] = {}
    for _name in Tolerances.model_fields:
        _value = os.getenv(f"{ENV_PREFIX}{_name.upper()}")
        if _value is not None:
            _overrides[_name] = _value
    if _overrides:
        logger.debug(f"Tolerance overrides from environment: {_overrides}")
    try:
        return Tolerances(**_overrides)
    except ValidationError as ve:
        raise ConfigurationError(f"Invalid tolerance in environment: {ve}") from ve


@lru_cache(maxsize=1)
def get_tolerances() -> Tolerances:
    return load_tolerances()


def apply_overrides(tol: Tolerances, overrides: dict[str, str]) -> Tolerances:
    """
    Returns a copy of ``tol`` with the given fields replaced (values are validated like environment values).

    :raises ConfigurationError: for unknown keys or invalid values
    """
    _unknown = [key for key in overrides if key not in Tolerances.model_fields]
    if _unknown:
        raise ConfigurationError(f"Unknown tolerance key(s): {', '.join(sorted(_unknown))}")
    try:
        return Tolerances.model_validate({**tol.model_dump(), **overrides})
    except ValidationError as ve:
        raise ConfigurationError(f"Invalid tolerance override: {ve}") from ve
