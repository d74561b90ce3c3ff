import pytest

from src.DTOs.pseudo_orbit import CheckResult, VerificationReport
from src.DTOs.system_params import SystemParams
from src.errors import ConfigurationError
from src.verification_helper import (
    INJECTIONS,
    alpha_limit_check,
    injected_closed_form,
    melnikov_oracle_check,
    symmetry_check,
)


def test_melnikov_check_passes_on_a_small_grid(params_unit: SystemParams) -> None:
    _check = melnikov_oracle_check(params_unit, n=3)
    assert _check.passed, _check.detail
    assert _check.name == "melnikov-quadrature"


@pytest.mark.parametrize("inject", INJECTIONS)
def test_injected_fault_is_caught(inject: str, params_unit: SystemParams) -> None:
    _check = melnikov_oracle_check(params_unit, n=3, closed=injected_closed_form(inject))
    assert not _check.passed
    assert _check.value > 1.0


def test_unknown_injection_is_a_configuration_error() -> None:
    with pytest.raises(ConfigurationError):
        injected_closed_form("swap-everything")


def test_alpha_limits() -> None:
    assert alpha_limit_check().passed


def test_branch_symmetry_on_a_coarse_grid(params_half: SystemParams) -> None:
    _check = symmetry_check(params_half, n=6)
    assert _check.passed, _check.detail


def test_report_fails_if_any_check_fails() -> None:
    _report = VerificationReport(
        checks=[CheckResult(name="good", passed=True), CheckResult(name="bad", passed=False, value=float("inf"))]
    )
    assert not _report.passed
    assert [check.name for check in _report.failed()] == ["bad"]
    _dumped = _report.model_dump(mode="json")
    assert _dumped["passed"] is False
    assert _dumped["checks"][1]["value"] is None
