import math

import pytest

from src.diffusion_helper import (
    DIFFUSION_CRITERION,
    build_pseudo_orbit,
    diffusion_policy,
    diffusion_system,
    drift_window,
    non_transversality_curve,
    poisson_bracket,
    resonant_bracket_approximation,
    transversality_report,
    verify_pseudo_orbit,
)
from src.DTOs.pseudo_orbit import BracketVerdict
from src.DTOs.system_params import SystemParams
from src.errors import ConfigurationError, OutOfDomain
from src.settings import Tolerances


def test_bracket_at_the_resonance_center(params_diffusion: SystemParams) -> None:
    _bracket = poisson_bracket(0.0, math.pi / 2, DIFFUSION_CRITERION, params_diffusion)
    assert _bracket == pytest.approx(-0.0208, abs=5e-4)
    assert resonant_bracket_approximation(0.0, math.pi / 2, params_diffusion) == pytest.approx(-0.02075, abs=1e-4)


@pytest.mark.parametrize("theta", [0.0, math.pi])
def test_bracket_vanishes_on_the_symmetry_lines(theta: float, params_diffusion: SystemParams) -> None:
    assert poisson_bracket(0.0, theta, DIFFUSION_CRITERION, params_diffusion) == pytest.approx(0.0, abs=1e-8)
    _report = transversality_report(0.0, theta, DIFFUSION_CRITERION, params_diffusion)
    assert _report.verdict == BracketVerdict.TANGENT_LINE


@pytest.mark.parametrize("I, theta", [(0.01, 2.0), (-0.01, 4.0), (0.005, 2.5)])
def test_resonant_approximation_tracks_the_exact_bracket(
    I: float, theta: float, params_diffusion: SystemParams
) -> None:
    _exact = poisson_bracket(I, theta, DIFFUSION_CRITERION, params_diffusion)
    _approximate = resonant_bracket_approximation(I, theta, params_diffusion)
    # the approximation drops O(I^2) and O(eps I) terms
    assert _approximate == pytest.approx(_exact, abs=2e-3)


@pytest.mark.parametrize("theta", [1.0, 2.0, 2.8])
def test_non_transversality_curve_zeroes_the_approximation(theta: float, params_diffusion: SystemParams) -> None:
    _I = non_transversality_curve(theta, params_diffusion)
    assert abs(_I) < 0.25
    assert resonant_bracket_approximation(_I, theta, params_diffusion) == pytest.approx(0.0, abs=1e-12)


def test_approximation_is_only_defined_in_a_resonance(params_diffusion: SystemParams) -> None:
    with pytest.raises(OutOfDomain):
        resonant_bracket_approximation(0.5, 2.0, params_diffusion)


def test_transversal_verdict(params_diffusion: SystemParams) -> None:
    assert transversality_report(0.0, math.pi / 2, DIFFUSION_CRITERION, params_diffusion).verdict == (
        BracketVerdict.TRANSVERSAL
    )


@pytest.mark.parametrize(
    "params",
    [
        SystemParams(a1=0.75, a2=1.0, eps=0.0),
        SystemParams(a1=0.0, a2=1.0, eps=0.01),
        SystemParams(a1=0.75, a2=1.0, eps=0.5),
        SystemParams(a1=0.75, a2=1.0, eps=0.01, k1=2),
    ],
    ids=["eps-zero", "a1-zero", "eps-above-cap", "r-half"],
)
def test_diffusion_hypotheses(params: SystemParams) -> None:
    with pytest.raises(ConfigurationError):
        diffusion_system(params)


def test_negative_second_amplitude_moves_the_section() -> None:
    _system, _section = diffusion_system(SystemParams(a1=0.75, a2=-1.0, eps=0.01))
    assert _system.a2 == 1.0
    assert _section == math.pi


def test_policy_side_follows_the_first_amplitude(tol: Tolerances) -> None:
    _right, _ = diffusion_system(SystemParams(a1=0.75, a2=1.0, eps=0.01))
    _left, _ = diffusion_system(SystemParams(a1=-0.75, a2=1.0, eps=0.01))
    assert diffusion_policy(_right, tol).side == "right"
    _policy = diffusion_policy(_left, tol)
    assert _policy.side == "left"
    _lower, _upper = drift_window(-1.0, _left, _policy, tol)
    assert _lower == pytest.approx(0.5 * math.pi + _policy.margin)
    assert _upper == pytest.approx(math.pi - tol.rho_delta - _policy.margin)


def test_policy_budgets_scale_with_eps(tol: Tolerances) -> None:
    _system, _ = diffusion_system(SystemParams(a1=0.75, a2=1.0, eps=0.01))
    _policy = diffusion_policy(_system, tol)
    assert _policy.level_budget == pytest.approx(tol.c_level * 1e-4)
    assert _policy.torus_budget == pytest.approx(tol.c_torus * 1e-2)
    assert _policy.t_max == pytest.approx(tol.t_max_factor / 0.01)


def test_target_must_exceed_the_start(params_diffusion: SystemParams) -> None:
    with pytest.raises(ConfigurationError):
        build_pseudo_orbit(0.5, 0.4, params_diffusion)


def test_short_pseudo_orbit_verifies(params_diffusion: SystemParams) -> None:
    _orbit = build_pseudo_orbit(-1.0, -0.95, params_diffusion)
    assert _orbit.final_action >= -0.95
    assert _orbit.scatter_legs
    assert all(leg.after.I > leg.before.I for leg in _orbit.scatter_legs)
    _report = verify_pseudo_orbit(_orbit, params_diffusion)
    assert _report.passed, [check.name for check in _report.failed()]


def test_pseudo_orbit_for_negative_first_amplitude_verifies() -> None:
    _params = SystemParams(a1=-0.75, a2=1.0, eps=0.01)
    _orbit = build_pseudo_orbit(-1.0, -0.94, _params)
    assert _orbit.policy.side == "left"
    assert _orbit.final_action >= -0.94
    assert all(leg.after.I > leg.before.I for leg in _orbit.scatter_legs)
    _report = verify_pseudo_orbit(_orbit, _params)
    assert _report.passed, [check.name for check in _report.failed()]


def test_tampered_orbit_fails_verification(params_diffusion: SystemParams) -> None:
    _orbit = build_pseudo_orbit(-1.0, -0.95, params_diffusion)
    _leg = _orbit.scatter_legs[0]
    _tampered = _leg.model_copy(update={"after": _leg.after.model_copy(update={"I": _leg.after.I + 1e-3})})
    _legs = [_tampered if leg is _leg else leg for leg in _orbit.legs]
    _report = verify_pseudo_orbit(_orbit.model_copy(update={"legs": _legs}), params_diffusion)
    assert not _report.passed
    assert "scatter-steps" in [check.name for check in _report.failed()]


@pytest.mark.slow
def test_full_diffusion_run_verifies(params_diffusion: SystemParams) -> None:
    _orbit = build_pseudo_orbit(-1.0, 1.0, params_diffusion)
    assert _orbit.final_action >= 1.0
    assert _orbit.inner_legs
    assert verify_pseudo_orbit(_orbit, params_diffusion).passed
