import pytest

from src.DTOs.system_params import SystemParams
from src.settings import Tolerances


@pytest.fixture
def tol() -> Tolerances:
    return Tolerances()


@pytest.fixture
def params_half() -> SystemParams:
    """mu = 0.5, the classification example."""
    return SystemParams(a1=0.5, a2=1.0, eps=0.01)


@pytest.fixture
def params_diffusion() -> SystemParams:
    """mu = 0.75, eps = 0.01: the desk-scale diffusion setting."""
    return SystemParams(a1=0.75, a2=1.0, eps=0.01)


@pytest.fixture
def params_unit() -> SystemParams:
    """a1 = a2 = 1, used by the Melnikov quadrature comparison."""
    return SystemParams(a1=1.0, a2=1.0, eps=0.01)
