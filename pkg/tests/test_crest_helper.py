import math
from typing import Optional

import numpy as np
import pytest

from src.crest_helper import (
    classify,
    crest_residual,
    crest_slope,
    crest_sigma,
    find_thresholds,
    has_tangency,
    nhim_slope,
    require_threshold,
    sample_crest,
    tangency_points,
)
from src.DTOs.crest import CrestKind
from src.DTOs.system_params import SystemParams
from src.errors import ConfigurationError, NoSolutionInWindow, OutOfDomain


def test_thresholds_for_mu_one_half(params_half: SystemParams) -> None:
    _report = find_thresholds(params_half)
    assert _report.alpha_thresholds == pytest.approx([-1.807, 0.701, 1.367], abs=5e-3)
    assert _report.beta_thresholds == pytest.approx([-2.942, 0.595, 1.85], abs=5e-3)
    assert list(_report.labels) == ["I_b", "I_a", "I_A", "I_B", "I_c", "I_C"]
    assert _report.labels["I_c"] < _report.labels["I_C"]
    assert not _report.missing


def test_threshold_intervals_for_mu_one_half(params_half: SystemParams) -> None:
    _report = find_thresholds(params_half)
    _summary = [(i.kind, i.tangency) for i in _report.intervals]
    assert _summary == [
        (CrestKind.VERTICAL, False),
        (CrestKind.VERTICAL, True),
        (CrestKind.HORIZONTAL, False),
        (CrestKind.HORIZONTAL, True),
        (CrestKind.VERTICAL, False),
        (CrestKind.HORIZONTAL, True),
        (CrestKind.HORIZONTAL, False),
    ]
    assert _report.interval_of(0.65).tangency


def test_large_mu_misses_the_outer_thresholds() -> None:
    # 1/|mu| = 0.1 is below exp(-pi/2), so |alpha| stays above it right of the pole
    _report = find_thresholds(SystemParams(a1=10.0, a2=1.0))
    _right = next(m for m in _report.missing if m.name == "alpha-right")
    assert _right.asymptote == pytest.approx(math.exp(-math.pi / 2))
    with pytest.raises(NoSolutionInWindow):
        require_threshold(_report, "I_A")


def test_thresholds_reject_mu_zero() -> None:
    with pytest.raises(ConfigurationError):
        find_thresholds(SystemParams(a1=0.0, a2=1.0))


@pytest.mark.parametrize(
    "I, kind",
    [
        (0.0, CrestKind.HORIZONTAL),
        (0.68, CrestKind.HORIZONTAL),
        (0.72, CrestKind.VERTICAL),
        (1.0, CrestKind.VERTICAL),
        (-2.0, CrestKind.VERTICAL),
        (1.5, CrestKind.HORIZONTAL),
    ],
)
def test_classify(I: float, kind: CrestKind, params_half: SystemParams) -> None:
    assert classify(I, params_half) == kind


@pytest.mark.parametrize("I", [-2.5, 0.3, 0.72, 1.0, 1.6])
@pytest.mark.parametrize("k", [0, 1])
def test_sampled_crest_points_solve_the_crest_equation(I: float, k: int, params_half: SystemParams) -> None:
    for _point in sample_crest(I, k, params_half, n=64):
        assert crest_residual(I, _point.phi, _point.sigma, params_half) == pytest.approx(0.0, abs=1e-12)


def test_crest_at_the_pole_is_two_vertical_lines(params_half: SystemParams) -> None:
    _phis = {round(p.phi, 12) for k in (0, 1) for p in sample_crest(1.0, k, params_half, n=16)}
    assert _phis == {0.0, round(math.pi, 12)}


def test_crest_sigma_through_the_origin(params_half: SystemParams) -> None:
    assert crest_sigma(0.3, 0.0, 0, params_half) == 0.0
    assert crest_sigma(0.3, math.pi, 1, params_half) == pytest.approx(math.pi)


def test_horizontal_parameterization_fails_on_vertical_crests(params_half: SystemParams) -> None:
    with pytest.raises(OutOfDomain):
        crest_sigma(0.9, math.pi / 2, 0, params_half)


@pytest.mark.parametrize(
    "I, expected", [(-2.5, True), (-1.0, False), (0.65, True), (0.9, False), (1.6, True), (3.0, False)]
)
def test_has_tangency(I: float, expected: bool, params_half: SystemParams) -> None:
    assert has_tangency(I, params_half) is expected


@pytest.mark.parametrize("I", [-2.5, 0.65, 1.6])
def test_tangency_points_touch_the_nhim_lines(I: float, params_half: SystemParams) -> None:
    _points = tangency_points(I, params_half)
    assert _points
    for _point in _points:
        _target = nhim_slope(I, _point.branch.kind, params_half)
        assert _point.slope == pytest.approx(_target, rel=1e-6)


def test_no_tangency_points_without_tangency(params_half: SystemParams) -> None:
    assert tangency_points(-1.0, params_half) == []


@pytest.mark.parametrize("mu", [0.1, 0.5, 0.7, 1.0, 2.0, 2.9, 3.0])
def test_thresholds_with_default_tolerances(mu: float) -> None:
    _report = find_thresholds(SystemParams(a1=mu, a2=1.0))
    assert _report.alpha_thresholds == sorted(_report.alpha_thresholds)
    assert _report.beta_thresholds == sorted(_report.beta_thresholds)
    assert all(abs(x - 1.0) > 1e-4 for x in _report.alpha_thresholds + _report.beta_thresholds)
    assert _report.intervals[0].lower == -5.0
    assert _report.intervals[-1].upper == 5.0


@pytest.mark.parametrize(
    "mu, names",
    [
        # 1/mu above exp(pi/2): nothing left of zero
        (0.1, ["I_c", "I_C", "I_A", "I_B"]),
        (0.5, ["I_b", "I_a", "I_c", "I_C", "I_A", "I_B"]),
        # 1/mu below exp(-pi/2): nothing right of the pole
        (10.0, ["I_b", "I_a", "I_c", "I_C"]),
    ],
)
def test_threshold_labels_in_each_regime(mu: float, names: list[str]) -> None:
    _labels = find_thresholds(SystemParams(a1=mu, a2=1.0)).labels
    assert sorted(_labels, key=_labels.get) == names
    assert all(_labels[n] < 0 for n in ("I_b", "I_a") if n in _labels)
    assert all(0 < _labels[n] < 1 for n in ("I_c", "I_C"))
    assert all(_labels[n] > 1 for n in ("I_A", "I_B") if n in _labels)


def _random_points(seed: int, n: int):
    _rng = np.random.default_rng(seed)
    for _ in range(n):
        _mu = float(_rng.uniform(0.2, 6.0)) * float(_rng.choice([-1.0, 1.0]))
        _I = float(_rng.uniform(-4.0, 4.0))
        if abs(_I) < 0.05 or abs(_I - 1.0) < 0.05:
            continue
        yield SystemParams(a1=_mu, a2=1.0), _I


def test_classify_agrees_with_the_threshold_intervals() -> None:
    _checked = 0
    for _params, _I in _random_points(seed=11, n=60):
        _report = find_thresholds(_params)
        _edges = _report.alpha_thresholds + _report.beta_thresholds
        if any(abs(_I - x) < 1e-3 for x in _edges):
            continue
        assert classify(_I, _params) == _report.interval_of(_I).kind
        assert has_tangency(_I, _params) is _report.interval_of(_I).tangency
        _checked += 1
    assert _checked > 30


def _slope_range_contains(I: float, params: SystemParams, target: float) -> Optional[bool]:
    """Brute-force scan of the crest slopes; None if the target sits on the edge of the range."""
    _kind = classify(I, params)
    _slopes = [
        crest_slope(I, float(a), k, _kind, params) for k in (0, 1) for a in np.linspace(0.0, 2 * math.pi, 721)
    ]
    _edge = max(abs(s) for s in _slopes)
    if abs(abs(target) - _edge) < 1e-3 * max(1.0, _edge):
        return None
    return min(_slopes) < target < max(_slopes)


def test_has_tangency_matches_a_slope_scan() -> None:
    _checked = 0
    for _params, _I in _random_points(seed=5, n=40):
        if classify(_I, _params) == CrestKind.SINGULAR:
            continue
        _scan = _slope_range_contains(_I, _params, nhim_slope(_I, classify(_I, _params), _params))
        if _scan is None:
            continue
        assert has_tangency(_I, _params) is _scan, (_params.a1, _I)
        _checked += 1
    assert _checked > 25
