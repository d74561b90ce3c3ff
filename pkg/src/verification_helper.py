import math
from typing import Callable, List, Optional

import numpy as np
from loguru import logger

from src.crest_helper import has_tangency
from src.DTOs.pseudo_orbit import CheckResult, VerificationReport
from src.DTOs.scattering import DOWN, MINIMAL_ABS, UP, TauCriterion, branch
from src.errors import ArnoldDiffusionError, ConfigurationError
from src.model_helper import Params, alpha, alpha_limit_ratio, as_reduced, resolve_tolerances
from src.scattering_helper import (
    gradient_from_solution,
    melnikov_closed,
    melnikov_quadrature,
    ray_scan_oracle,
    solve_tau_star,
    theta_plus,
)
from src.settings import Tolerances

TWO_PI = 2.0 * math.pi

MelnikovForm = Callable[..., float]

INJECTIONS = ("a2-sign-flip",)


def injected_closed_form(inject: Optional[str]) -> MelnikovForm:
    """
    Closed Melnikov form used by the quadrature check, optionally with a deliberate fault.

    :raises ConfigurationError: for an unknown injection name
    """
    if inject is None:
        return melnikov_closed
    if inject == "a2-sign-flip":

        def _flipped(I: float, phi: float, s: float, params: Params, tol: Optional[Tolerances] = None) -> float:
            _sys = as_reduced(params)
            return melnikov_closed(I, phi, s, _sys.model_copy(update={"a2": -_sys.a2}), tol)

        return _flipped
    raise ConfigurationError(f"Unknown fault injection '{inject}'", known=", ".join(INJECTIONS))


def melnikov_oracle_check(
    params: Params,
    tol: Optional[Tolerances] = None,
    n: int = 20,
    closed: MelnikovForm = melnikov_closed,
    bound: float = 1e-8,
) -> CheckResult:
    """Closed-form Melnikov potential vs adaptive quadrature on an n x n x n grid of [-3, 3] x [0, 2pi)^2."""
    _tolerances = resolve_tolerances(tol)
    _sys = as_reduced(params)
    _angles = np.linspace(0.0, TWO_PI, n, endpoint=False)
    _worst = 0.0
    for _I in np.linspace(-3.0, 3.0, n):
        for _phi in _angles:
            for _s in _angles:
                _args = (float(_I), float(_phi), float(_s), _sys, _tolerances)
                _worst = max(_worst, abs(closed(*_args) - melnikov_quadrature(*_args)))
    return CheckResult(
        name="melnikov-quadrature",
        passed=_worst <= bound,
        value=_worst,
        detail=f"max |closed - quadrature| over {n ** 3} points, bound {bound:g}",
    )


def alpha_limit_check(tol: Optional[Tolerances] = None, bound: float = 1e-6) -> CheckResult:
    """Limits of the sinh ratio of alpha at -/+1e3 and the patched value alpha(0) = 0."""
    _errors = [
        abs(alpha_limit_ratio(-1e3) - math.exp(math.pi / 2)),
        abs(alpha_limit_ratio(1e3) - math.exp(-math.pi / 2)),
        abs(alpha(0.0, tol)),
    ]
    return CheckResult(
        name="alpha-limits", passed=max(_errors) <= bound, value=max(_errors), detail="e^(+-pi/2) limits and alpha(0)"
    )


def tau_oracle_check(
    params: Params,
    tol: Optional[Tolerances] = None,
    samples: int = 200,
    seed: int = 7,
    h: float = 1e-5,
    bound: float = 1e-6,
) -> CheckResult:
    """
    ``solve_tau_star`` vs the brute-force ray scan for random (I, theta) and all four criterion kinds.

    Queries near the pole I = 1/r, on singular crests, or with degenerate or tied crossings are skipped.
    """
    _tolerances = resolve_tolerances(tol)
    _sys = as_reduced(params)
    _rng = np.random.default_rng(seed)
    _criteria: List[TauCriterion] = [DOWN, UP, MINIMAL_ABS, branch(1)]
    _worst, _compared, _skipped = 0.0, 0, 0
    for _i in range(samples):
        _I = float(_rng.uniform(-2.0, 2.0))
        _theta = float(_rng.uniform(0.0, TWO_PI))
        _criterion = _criteria[_i % len(_criteria)]
        if abs(_sys.r * _I - 1.0) < 0.02:
            _skipped += 1
            continue
        try:
            _solution = solve_tau_star(_I, _theta, _criterion, _sys, _tolerances)
            if _solution.degenerate or _solution.tie:
                _skipped += 1
                continue
            _reference = ray_scan_oracle(_I, _theta, _criterion, _sys, h=h, tol=_tolerances)
        except ArnoldDiffusionError as e:
            logger.debug(f"tau oracle query skipped at I={_I}, theta={_theta}: {e}")
            _skipped += 1
            continue
        _worst = max(_worst, abs(_solution.tau_star - _reference))
        _compared += 1
    return CheckResult(
        name="tau-star-oracle",
        passed=_worst <= bound and _compared > 0,
        value=_worst,
        detail=f"{_compared} queries compared, {_skipped} skipped, bound {bound:g}",
    )


def _theta_gradient(I: float, theta: float, criterion: TauCriterion, params: Params, tol: Tolerances):
    _solution = solve_tau_star(I, theta, criterion, params, tol)
    if _solution.degenerate or _solution.tie:
        return None
    return gradient_from_solution(_solution, params, tol)[1]


def symmetry_check(params: Params, tol: Optional[Tolerances] = None, n: int = 50, bound: float = 1e-8) -> CheckResult:
    """
    ``dL*_0/dtheta (I, theta) = -dL*_2/dtheta (I, 2pi - theta)`` on an n x n grid of [-2, 2] x (0, 2pi),
    skipping actions with tangencies and degenerate points.
    """
    _tolerances = resolve_tolerances(tol)
    _sys = as_reduced(params)
    _worst, _compared = 0.0, 0
    for _I in np.linspace(-2.0, 2.0, n):
        _I = float(_I)
        if abs(_sys.r * _I - 1.0) < 0.02 or has_tangency(_I, _sys, _tolerances):
            continue
        for _theta in np.linspace(0.0, TWO_PI, n + 2)[1:-1]:
            _theta = float(_theta)
            try:
                _left = _theta_gradient(_I, _theta, branch(0), _sys, _tolerances)
                _right = _theta_gradient(_I, TWO_PI - _theta, branch(2), _sys, _tolerances)
            except ArnoldDiffusionError as e:
                logger.debug(f"symmetry point skipped at I={_I}, theta={_theta}: {e}")
                continue
            if _left is None or _right is None:
                continue
            _worst = max(_worst, abs(_left + _right))
            _compared += 1
    return CheckResult(
        name="branch-symmetry",
        passed=_worst <= bound and _compared > 0,
        value=_worst,
        detail=f"{_compared} points compared, bound {bound:g}",
    )


def drift_sign_check(
    params: Params, tol: Optional[Tolerances] = None, n_actions: int = 81, n_angles: int = 50
) -> CheckResult:
    """
    The branch-1 scattering map increases I on (pi, theta_plus(I)) for a1, a2 > 0 and r = 1:
    dL*/dtheta > 0 at ``n_angles`` interior angles per action, actions in [-2, 2] away from I = 0 and I = 1.
    """
    _tolerances = resolve_tolerances(tol)
    _sys = as_reduced(params)
    _sys = _sys.model_copy(update={"a1": abs(_sys.a1), "a2": abs(_sys.a2)})
    _criterion = branch(1)
    _failures: List[str] = []
    _checked = 0
    for _I in np.linspace(-2.0, 2.0, n_actions):
        _I = float(_I)
        if abs(_I) < 0.01 or abs(_I - 1.0) < 0.01:
            continue
        _upper = theta_plus(_I, _sys, _tolerances)
        for _theta in np.linspace(math.pi + 1e-3, _upper - 1e-3, n_angles):
            _theta = float(_theta)
            _checked += 1
            try:
                _solution = solve_tau_star(_I, _theta, _criterion, _sys, _tolerances)
                _d_theta = gradient_from_solution(_solution, _sys, _tolerances)[1]
            except ArnoldDiffusionError as e:
                _failures.append(f"({_I:.3f}, {_theta:.3f}): {e}")
                continue
            if not _d_theta > 0.0:
                _failures.append(f"({_I:.3f}, {_theta:.3f}): dL*/dtheta={_d_theta:.3e}")
    for _failure in _failures[:5]:
        logger.warning(f"drift sign failure at {_failure}")
    return CheckResult(
        name="drift-sign",
        passed=not _failures and _checked > 0,
        value=float(len(_failures)),
        detail=f"{_checked - len(_failures)}/{_checked} points with increasing action",
    )


def run_oracle_suite(
    params: Params, tol: Optional[Tolerances] = None, inject: Optional[str] = None
) -> VerificationReport:
    """
    Runs the oracle checks that do not depend on a particular orbit:
    Melnikov quadrature, alpha limits, tau* ray scan, branch symmetry and (r = 1) the drift sign.

    :raises ConfigurationError: for an unknown injection name
    """
    _tolerances = resolve_tolerances(tol)
    _sys = as_reduced(params)
    _closed = injected_closed_form(inject)
    if inject:
        logger.warning(f"Fault injection active: {inject}")
    _checks = [
        melnikov_oracle_check(_sys, _tolerances, closed=_closed),
        alpha_limit_check(_tolerances),
        tau_oracle_check(_sys, _tolerances),
        symmetry_check(_sys, _tolerances),
    ]
    if _sys.r == 1.0:
        _checks.append(drift_sign_check(_sys, _tolerances))
    else:
        logger.info(f"drift sign check skipped for r={_sys.r}")
    _report = VerificationReport(checks=_checks)
    for _check in _report.checks:
        logger.info(f"{_check.name}: {'passed' if _check.passed else 'FAILED'} ({_check.detail})")
    return _report
