import math

import numpy as np
import pytest

from src.crest_helper import classify, crest_residual, find_thresholds
from src.DTOs.crest import CrestKind
from src.DTOs.scattering import DOWN, MINIMAL_ABS, UP, AtlasRegion, ScatteringState, TauCriterion, branch
from src.DTOs.system_params import SystemParams
from src.errors import ConfigurationError, OnDiscontinuity, TangencyDegenerate
from src.scattering_helper import (
    conjugate_negative_mu,
    extended_map_domain,
    grad_reduced_poincare,
    melnikov_closed,
    melnikov_quadrature,
    piecewise_global_map,
    ray_scan_oracle,
    reduced_poincare,
    scattering_step,
    scattering_step_detail,
    scattering_step_unreduced,
    solve_tau_star,
    star_angles,
    theta_derivative_forms,
    theta_minus,
    theta_plus,
)

ALL_CRITERIA = [DOWN, UP, MINIMAL_ABS, branch(1)]


@pytest.mark.parametrize("I, phi, s", [(0.0, 0.3, 1.1), (-2.5, 4.0, 0.2), (1.0, 2.0, 5.5), (3.0, 1.0, 3.0)])
def test_melnikov_closed_form_matches_quadrature(I: float, phi: float, s: float, params_unit: SystemParams) -> None:
    _expected = melnikov_quadrature(I, phi, s, params_unit)
    assert melnikov_closed(I, phi, s, params_unit) == pytest.approx(_expected, abs=1e-8)


def test_melnikov_sign_convention(params_unit: SystemParams) -> None:
    assert melnikov_quadrature(0.0, 0.0, math.pi / 2, params_unit) == pytest.approx(4.0 * params_unit.a1, abs=1e-9)


@pytest.mark.parametrize(
    "text, expected", [("down", DOWN), ("UP", UP), ("minabs", MINIMAL_ABS), ("branch=3", branch(3))]
)
def test_criterion_parsing(text: str, expected: TauCriterion) -> None:
    assert TauCriterion.parse(text) == expected
    assert TauCriterion.parse(str(expected)) == expected


@pytest.mark.parametrize("text", ["sideways", "branch=x", "branch"])
def test_criterion_parsing_rejects_garbage(text: str) -> None:
    with pytest.raises(ConfigurationError):
        TauCriterion.parse(text)


@pytest.mark.parametrize("criterion", ALL_CRITERIA, ids=str)
@pytest.mark.parametrize("I, theta", [(0.3, 4.0), (-1.2, 2.0), (2.5, 0.7)])
def test_tau_star_lands_on_the_crest(
    criterion: TauCriterion, I: float, theta: float, params_half: SystemParams
) -> None:
    _solution = solve_tau_star(I, theta, criterion, params_half)
    _phi, _sigma = star_angles(_solution, params_half)
    assert crest_residual(I, _phi, _sigma, params_half) == pytest.approx(0.0, abs=1e-9)


def test_tau_star_branch_selection(params_half: SystemParams) -> None:
    _down = solve_tau_star(0.3, 4.0, DOWN, params_half)
    _up = solve_tau_star(0.3, 4.0, UP, params_half)
    _minabs = solve_tau_star(0.3, 4.0, MINIMAL_ABS, params_half)
    _fixed = solve_tau_star(0.3, 4.0, branch(1), params_half)
    assert _down.branch_hit.k % 2 == 0 and _up.branch_hit.k % 2 == 0
    assert _down.tau_star * _up.tau_star < 0
    assert _fixed.branch_hit.k == 1
    assert abs(_minabs.tau_star) <= min(abs(s.tau_star) for s in (_down, _up, _fixed)) + 1e-12


def test_diagonal_point_on_the_crest_has_zero_tau(params_half: SystemParams) -> None:
    _solution = solve_tau_star(0.3, math.pi, MINIMAL_ABS, params_half)
    assert _solution.tau_star == pytest.approx(0.0, abs=1e-12)
    assert _solution.branch_hit.k == 1


@pytest.mark.parametrize("criterion", [DOWN, MINIMAL_ABS, branch(1)], ids=str)
def test_tau_star_matches_the_ray_scan(criterion: TauCriterion, params_half: SystemParams) -> None:
    _solution = solve_tau_star(0.3, 4.0, criterion, params_half)
    assert _solution.tau_star == pytest.approx(ray_scan_oracle(0.3, 4.0, criterion, params_half), abs=1e-6)


def test_gradient_matches_finite_differences(params_half: SystemParams) -> None:
    _I, _theta, _h = 0.3, 4.0, 1e-5
    _d_action, _d_theta = grad_reduced_poincare(_I, _theta, branch(1), params_half)

    def _level(I: float, theta: float) -> float:
        return reduced_poincare(I, theta, branch(1), params_half)

    _fd_action = (_level(_I + _h, _theta) - _level(_I - _h, _theta)) / (2 * _h)
    _fd_theta = (_level(_I, _theta + _h) - _level(_I, _theta - _h)) / (2 * _h)
    assert _d_action == pytest.approx(_fd_action, rel=1e-5)
    assert _d_theta == pytest.approx(_fd_theta, rel=1e-5)


def test_both_theta_derivative_forms_agree(params_half: SystemParams) -> None:
    _first, _second = theta_derivative_forms(solve_tau_star(-1.2, 2.0, MINIMAL_ABS, params_half), params_half)
    assert _first == pytest.approx(_second, abs=1e-9)


def test_branch_zero_and_two_are_mirror_images(params_half: SystemParams) -> None:
    _I, _theta = 0.3, 2.0
    _zero = solve_tau_star(_I, _theta, branch(0), params_half)
    _two = solve_tau_star(_I, 2 * math.pi - _theta, branch(2), params_half)
    assert _zero.tau_star == pytest.approx(-_two.tau_star, abs=1e-10)
    _, _d_zero = grad_reduced_poincare(_I, _theta, branch(0), params_half)
    _, _d_two = grad_reduced_poincare(_I, 2 * math.pi - _theta, branch(2), params_half)
    assert _d_zero + _d_two == pytest.approx(0.0, abs=1e-8)


def _level_residual(I: float, theta: float, eps: float) -> float:
    _params = SystemParams(a1=0.5, a2=1.0, eps=eps)
    _after = scattering_step(ScatteringState(I=I, theta=theta), branch(1), _params)
    _before_level = reduced_poincare(I, theta, branch(1), _params)
    return abs(reduced_poincare(_after.I, _after.theta, branch(1), _params) - _before_level)


def test_scattering_step_follows_the_level_sets_to_second_order() -> None:
    _points = [(0.3, 4.0), (0.3, 3.6), (0.5, 4.4), (-0.4, 3.9), (2.5, 3.8)]
    _residuals = np.array([[_level_residual(I, theta, eps) for eps in (1e-2, 1e-3, 1e-4)] for I, theta in _points])
    _slopes = np.log10(_residuals[:, :-1] / _residuals[:, 1:])
    for _median in np.median(_slopes, axis=0):
        assert 1.8 < _median < 2.2


def test_scattering_step_detail(params_half: SystemParams) -> None:
    _result = scattering_step_detail(ScatteringState(I=0.3, theta=4.0), MINIMAL_ABS, params_half)
    assert _result.region is not None
    assert abs(_result.after.I - _result.before.I) < 0.1
    assert _result.level_after == pytest.approx(_result.level_before, abs=1e-3)


def test_unreduced_step_keeps_the_time_angle(params_half: SystemParams) -> None:
    _I, _phi, _s = scattering_step_unreduced(0.3, 4.3, 1.0, branch(1), params_half)
    _after = scattering_step(ScatteringState(I=0.3, theta=4.0), branch(1), params_half)
    assert _s == 1.0
    assert _I == pytest.approx(_after.I)
    assert math.remainder(_phi - _I * _s - _after.theta, 2 * math.pi) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize(
    "theta, region", [(0.1, AtlasRegion.I), (math.pi, AtlasRegion.II), (2 * math.pi - 0.1, AtlasRegion.III)]
)
def test_piecewise_global_map_regions(theta: float, region: AtlasRegion, params_half: SystemParams) -> None:
    _, _region = piecewise_global_map(ScatteringState(I=0.3, theta=theta), params_half)
    assert _region == region


def test_piecewise_global_map_refuses_the_discontinuity(params_half: SystemParams) -> None:
    with pytest.raises(OnDiscontinuity):
        piecewise_global_map(ScatteringState(I=0.3, theta=math.pi / 2), params_half)


def test_extended_map_is_defined_everywhere_for_horizontal_crests(params_half: SystemParams) -> None:
    assert extended_map_domain(0.3, 1.0, params_half)


@pytest.mark.parametrize(
    "I, expected",
    [(-2.0, 1.5), (-0.3, 1.5), (0.3, 1.7), (0.8, 1.8), (1.0, 2.0), (1.2, 1.5), (1.45, 1.45), (2.0, 1.5)],
)
def test_theta_plus_closed_forms(I: float, expected: float, params_half: SystemParams) -> None:
    assert theta_plus(I, params_half) == pytest.approx(expected * math.pi)
    assert theta_minus(I, params_half) == pytest.approx((2.0 - expected) * math.pi)


@pytest.mark.parametrize("I", [-0.3, 0.3])
def test_theta_plus_for_vertical_crests_near_zero(I: float) -> None:
    assert theta_plus(I, SystemParams(a1=10.0, a2=1.0)) == pytest.approx((1.0 + abs(I)) * math.pi)


def test_theta_plus_needs_unit_ratio() -> None:
    with pytest.raises(ConfigurationError):
        theta_plus(0.3, SystemParams(k1=2, k2=1))


@pytest.mark.parametrize("theta", [1.1 * math.pi, 1.35 * math.pi, 1.65 * math.pi])
def test_branch_one_map_increases_the_action_in_the_window(theta: float, params_half: SystemParams) -> None:
    _, _d_theta = grad_reduced_poincare(0.3, theta, branch(1), params_half)
    assert _d_theta > 0


def test_negative_second_amplitude_is_conjugated() -> None:
    _system, _section = conjugate_negative_mu(SystemParams(a1=0.5, a2=-1.0))
    assert (_system.a2, _section) == (1.0, math.pi)
    _same, _zero = conjugate_negative_mu(SystemParams(a1=0.5, a2=1.0))
    assert (_same.a2, _zero) == (1.0, 0.0)


def test_piecewise_global_map_matches_the_branch_maps_inside_each_region() -> None:
    _params = SystemParams(a1=0.6, a2=1.0, eps=0.01)
    _checked = 0
    for _I in (-1.5, -0.4, 0.3, 0.8, 1.3):
        for _theta in np.linspace(0.05, 2 * math.pi - 0.05, 24):
            _state = ScatteringState(I=_I, theta=float(_theta))
            try:
                _after, _region = piecewise_global_map(_state, _params)
            except (OnDiscontinuity, TangencyDegenerate):
                continue
            _k = solve_tau_star(_I, float(_theta), MINIMAL_ABS, _params).branch_hit.k
            assert _region == (AtlasRegion.II if _k % 2 else AtlasRegion.I if _k <= 0 else AtlasRegion.III)
            _expected = scattering_step(_state, branch(_k), _params)
            assert _after.I == pytest.approx(_expected.I, abs=1e-10)
            assert _after.theta == pytest.approx(_expected.theta, abs=1e-10)
            _checked += 1
    assert _checked > 60


# a1 = 10, I = 0.3: the NHIM line enters the sigma band of branch 1 at phi = 1.4286 theta - 0.673 and
# meets the vertical crests inside the band only if that phi lies in (0.20, 1.15) or (2.94, 4.69) mod 2 pi
@pytest.mark.parametrize("theta, expected", [(0.942, True), (1.871, False), (3.131, True), (4.251, False)])
def test_extended_map_domain_on_vertical_crests(theta: float, expected: bool) -> None:
    _params = SystemParams(a1=10.0, a2=1.0)
    assert classify(0.3, _params) == CrestKind.VERTICAL
    assert extended_map_domain(0.3, theta, _params) is expected


def test_branch_zero_level_is_continuous_across_the_crest_bifurcation(params_half: SystemParams) -> None:
    _threshold = find_thresholds(params_half).labels["I_C"]
    _below, _above = _threshold - 1e-6, _threshold + 1e-6
    assert classify(_below, params_half) == CrestKind.HORIZONTAL
    assert classify(_above, params_half) == CrestKind.VERTICAL
    for _theta in (0.1, 0.3):
        _gap = reduced_poincare(_above, _theta, branch(0), params_half) - reduced_poincare(
            _below, _theta, branch(0), params_half
        )
        assert abs(_gap) < 1e-4
