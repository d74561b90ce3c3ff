import math
from typing import Callable, Iterator, List, NamedTuple, Optional

import numpy as np
from loguru import logger
from scipy.integrate import quad
from scipy.optimize import brentq

from src.crest_helper import classify
from src.DTOs.crest import CrestBranch, CrestKind
from src.DTOs.scattering import (
    MINIMAL_ABS,
    MINIMAL_ABS_ATLAS,
    AtlasRegion,
    CriterionKind,
    ScatteringState,
    ScatteringStepResult,
    TauCriterion,
    TauSolution,
)
from src.DTOs.system_params import ReducedSystem
from src.errors import (
    ArnoldDiffusionError,
    ConfigurationError,
    OnDiscontinuity,
    QuadratureNotConverged,
    SingularCrest,
    TangencyDegenerate,
    UnreachableBranch,
)
from src.model_helper import (
    Params,
    amplitude_A1,
    amplitude_A1_prime,
    amplitude_A2,
    amplitude_A2_prime,
    as_reduced,
    perturbation,
    resolve_tolerances,
    separatrix_kernel,
)
from src.settings import Tolerances

TWO_PI = 2.0 * math.pi

# grid points evaluated per vectorized march chunk
_CHUNK = 4096
# 2 sech^2(T) < 1e-16 beyond this time
_QUAD_HORIZON = 0.5 * math.log(8.0e16)


# ------------------------------------------------------------------------------
# Melnikov potential
# ------------------------------------------------------------------------------
def melnikov_closed(I: float, phi: float, s: float, params: Params, tol: Optional[Tolerances] = None) -> float:
    """``L(I, phi, s) = A1(I) cos(phi) + A2(I) cos(r phi - s)`` in reduced coordinates."""
    _sys = as_reduced(params)
    return amplitude_A1(I, _sys, tol) * math.cos(phi) + amplitude_A2(I, _sys, tol) * math.cos(_sys.r * phi - s)


def melnikov_quadrature(I: float, phi: float, s: float, params: Params, tol: Optional[Tolerances] = None) -> float:
    """
    Evaluates the Melnikov integral ``int (f(0) - f(q0(sigma))) g(phi + I sigma, s + sigma) d sigma``
    with ``f = cos`` by adaptive quadrature, truncated where the kernel drops below 1e-16.

    This is the independent oracle for the closed form; it fixes the sign convention A1(0) = +4 a1.

    :raises QuadratureNotConverged: if the integrator reports a problem
    """
    _tolerances = resolve_tolerances(tol)
    _sys = as_reduced(params)

    def _integrand(sigma: float) -> float:
        return float(separatrix_kernel(sigma)) * float(perturbation(phi + I * sigma, s + sigma, _sys))

    _result = quad(
        _integrand,
        -_QUAD_HORIZON,
        _QUAD_HORIZON,
        epsabs=_tolerances.quad_abs,
        epsrel=0.0,
        limit=500,
        points=[0.0],
        full_output=1,
    )
    if len(_result) > 3:
        raise QuadratureNotConverged(_result[3], I=I, phi=phi, s=s, abserr=_result[1])
    logger.debug(f"Melnikov quadrature at I={I}: value={_result[0]}, abserr={_result[1]}")
    return _result[0]


# ------------------------------------------------------------------------------
# tau* along the NHIM lines
# ------------------------------------------------------------------------------
class _Crossing(NamedTuple):
    tau: float
    k: int
    slope: float


class NhimRay:
    """
    The NHIM line through the diagonal point (theta, r*theta) in the (phi, sigma) plane:
    ``phi(tau) = theta - I tau``, ``sigma(tau) = r theta - (rI - 1) tau``.

    The crest residual along the ray is ``I A1 sin(phi) + (rI - 1) A2 sin(sigma)`` (the derivative of
    tau -> L(I, phi(tau), sigma(tau))), normalized by the sum of the absolute coefficients.
    """

    def __init__(self, I: float, theta: float, system: ReducedSystem, tol: Tolerances):
        self.I = I
        self.theta = theta
        self.w = system.r * I - 1.0
        self.sigma0 = system.r * theta
        _c1 = I * amplitude_A1(I, system, tol)
        _c2 = self.w * amplitude_A2(I, system, tol)
        _norm = abs(_c1) + abs(_c2)
        self.c1 = _c1 / _norm
        self.c2 = _c2 / _norm
        self.kind = classify(I, system, tol)
        if self.kind == CrestKind.SINGULAR:
            raise SingularCrest("|mu alpha(I)| = 1: the crests are singular", I=I)

    def angles(self, tau):
        return self.theta - self.I * tau, self.sigma0 - self.w * tau

    def residual(self, tau):
        _phi, _sigma = self.angles(tau)
        return self.c1 * np.sin(_phi) + self.c2 * np.sin(_sigma)

    def residual_prime(self, tau: float) -> float:
        _phi, _sigma = self.angles(tau)
        return -(self.c1 * self.I * math.cos(_phi) + self.c2 * self.w * math.cos(_sigma))

    def label(self, tau: float) -> int:
        """Branch index of the crest point hit at ``tau``."""
        _phi, _sigma = self.angles(tau)
        if self.kind == CrestKind.VERTICAL:
            return int(round(_phi / math.pi))
        return int(round(_sigma / math.pi))

    def label_rate(self) -> tuple[float, float]:
        """(value at tau = 0, speed) of the angle that carries the branch label."""
        if self.kind == CrestKind.VERTICAL:
            return self.theta, self.I
        return self.sigma0, self.w


def march_step(I: float, system: ReducedSystem, tol: Tolerances) -> float:
    return min(tol.h_march_cap, 0.5 / max(abs(I), abs(system.r * I - 1.0), 1.0))


def tau_window(I: float, system: ReducedSystem, tol: Tolerances) -> float:
    _frequency = max(min(abs(I), abs(system.r * I - 1.0)), tol.tau_freq_floor)
    return tol.tau_window_factor * max(1.0, 1.0 / _frequency)


def _crossings(ray: NhimRay, tau_from: float, tau_to: float, h: float, xtol: float) -> Iterator[_Crossing]:
    """
    Yields the zeros of the crest residual on [tau_from, tau_to] in marching order (from ``tau_from``).

    Sign changes are detected on a uniform grid of step <= h, evaluated in vectorized chunks, and refined
    with brentq.
    """
    _span = tau_to - tau_from
    if _span == 0.0:
        return
    _steps = max(1, math.ceil(abs(_span) / h))
    for _start in range(0, _steps, _CHUNK):
        _stop = min(_start + _CHUNK, _steps)
        _taus = tau_from + _span * np.arange(_start, _stop + 1) / _steps
        _values = ray.residual(_taus)
        _hits = np.nonzero((_values[:-1] == 0.0) | (_values[:-1] * _values[1:] < 0.0))[0]
        for _i in _hits:
            if _values[_i] == 0.0:
                _root = float(_taus[_i])
            else:
                _a, _b = sorted((float(_taus[_i]), float(_taus[_i + 1])))
                _root = brentq(ray.residual, _a, _b, xtol=xtol)
            yield _Crossing(tau=_root, k=ray.label(_root), slope=ray.residual_prime(_root))


def _pick_smallest(candidates: List[_Crossing], tol: Tolerances) -> tuple[_Crossing, bool]:
    """Smallest |tau|; crossings tied within tol_tie are resolved by the larger |slope| and flagged."""
    _unique: List[_Crossing] = []
    for _c in sorted(candidates, key=lambda c: abs(c.tau)):
        if any(abs(_c.tau - u.tau) <= 10 * tol.tol_root and _c.k == u.k for u in _unique):
            continue
        _unique.append(_c)
    _best = _unique[0]
    _tied = [c for c in _unique if abs(abs(c.tau) - abs(_best.tau)) <= tol.tol_tie]
    if len(_tied) > 1:
        _best = max(_tied, key=lambda c: abs(c.slope))
        return _best, True
    return _best, False


def _directional_first_even(ray: NhimRay, direction: int, system: ReducedSystem, tol: Tolerances) -> _Crossing:
    _h = march_step(ray.I, system, tol)
    _limit = tau_window(ray.I, system, tol)
    for _crossing in _crossings(ray, 0.0, direction * _limit, _h, tol.tol_root):
        if _crossing.k % 2 == 0:
            return _crossing
    raise UnreachableBranch("no crossing with the crest C_M inside the tau window", I=ray.I, theta=ray.theta)


def _minimal_abs(ray: NhimRay, system: ReducedSystem, tol: Tolerances) -> tuple[_Crossing, bool]:
    _h = march_step(ray.I, system, tol)
    _limit = tau_window(ray.I, system, tol)
    _radius = min(TWO_PI / max(abs(ray.I), abs(ray.w)), _limit)
    _inner = 0.0
    _found: List[_Crossing] = []
    while True:
        _found.extend(_crossings(ray, _inner, _radius, _h, tol.tol_root))
        _found.extend(_crossings(ray, -_inner, -_radius, _h, tol.tol_root))
        if _found:
            _best = min(abs(c.tau) for c in _found)
            # a tie partner may sit just outside the scanned annulus
            if _best < _radius - tol.tol_tie or _radius >= _limit:
                return _pick_smallest(_found, tol)
        if _radius >= _limit:
            raise UnreachableBranch("no crest crossing inside the tau window", I=ray.I, theta=ray.theta)
        _inner, _radius = _radius, min(2.0 * _radius, _limit)


def _fixed_branch(ray: NhimRay, k: int, system: ReducedSystem, tol: Tolerances) -> tuple[_Crossing, bool]:
    _h = march_step(ray.I, system, tol)
    _limit = tau_window(ray.I, system, tol)
    _value, _speed = ray.label_rate()
    _band = (k * math.pi - 0.5 * math.pi, k * math.pi + 0.5 * math.pi)
    if _speed == 0.0:
        if not _band[0] <= _value <= _band[1]:
            raise UnreachableBranch(f"branch {k} is never reached from this point", I=ray.I, theta=ray.theta)
        _lower, _upper = -_limit, _limit
    else:
        _lower, _upper = sorted(((_value - _band[1]) / _speed, (_value - _band[0]) / _speed))
        _lower, _upper = max(_lower, -_limit), min(_upper, _limit)
    if _lower > _upper:
        raise UnreachableBranch(f"branch {k} lies outside the tau window", I=ray.I, theta=ray.theta, window=_limit)

    _found: List[_Crossing] = []
    if _lower <= 0.0 <= _upper:
        _segments = [(0.0, _upper), (0.0, _lower)]
    elif _lower > 0.0:
        _segments = [(_lower, _upper)]
    else:
        _segments = [(_upper, _lower)]
    for _start, _end in _segments:
        _found.extend(c for c in _crossings(ray, _start, _end, _h, tol.tol_root) if c.k == k)
    if not _found:
        raise UnreachableBranch(f"the NHIM line does not cross branch {k}", I=ray.I, theta=ray.theta)
    return _pick_smallest(_found, tol)


def solve_tau_star(
    I: float, theta: float, criterion: TauCriterion, params: Params, tol: Optional[Tolerances] = None
) -> TauSolution:
    """
    Solves for tau*(I, theta): the time along the NHIM line through the diagonal point (theta, r theta)
    at which it meets the crest selected by ``criterion``.

    :param I: reduced action
    :param theta: angle theta = phi - I s (unwrapped values are accepted)
    :param criterion: down / up / minabs / branch=k
    :param params: system (reduced on the fly)
    :return: the solution; ``degenerate`` is set if |residual'| < tol_degen
    :raises SingularCrest: if the crests at I are singular
    :raises UnreachableBranch: if the requested crossing does not occur inside the tau window
    """
    _tolerances = resolve_tolerances(tol)
    _sys = as_reduced(params)
    _ray = NhimRay(I, theta, _sys, _tolerances)
    _tie = False
    if criterion.kind in (CriterionKind.DOWN, CriterionKind.UP):
        _down = 1 if _ray.w >= 0 else -1
        _direction = _down if criterion.kind == CriterionKind.DOWN else -_down
        _crossing = _directional_first_even(_ray, _direction, _sys, _tolerances)
    elif criterion.kind == CriterionKind.MINIMAL_ABS:
        _crossing, _tie = _minimal_abs(_ray, _sys, _tolerances)
    else:
        _crossing, _tie = _fixed_branch(_ray, criterion.k, _sys, _tolerances)

    _degenerate = abs(_crossing.slope) < _tolerances.tol_degen
    if _tie:
        logger.warning(f"tau* tie at I={I}, theta={theta} ({criterion}), picked branch {_crossing.k}")
    if _degenerate:
        logger.warning(f"Near-tangent crossing at I={I}, theta={theta}: |residual'|={abs(_crossing.slope):.3e}")
    return TauSolution(
        tau_star=_crossing.tau,
        branch_hit=CrestBranch(k=_crossing.k, kind=_ray.kind, I=I),
        theta=theta,
        I=I,
        criterion=criterion,
        transversality=abs(_crossing.slope),
        degenerate=_degenerate,
        tie=_tie,
    )


def star_angles(solution: TauSolution, params: Params) -> tuple[float, float]:
    """(phi*, sigma*) of the crest point hit by the solution."""
    _sys = as_reduced(params)
    _tau = solution.tau_star
    return solution.theta - solution.I * _tau, _sys.r * solution.theta - (_sys.r * solution.I - 1.0) * _tau


# ------------------------------------------------------------------------------
# Reduced Poincare function and scattering maps
# ------------------------------------------------------------------------------
def level_from_solution(solution: TauSolution, params: Params, tol: Optional[Tolerances] = None) -> float:
    _sys = as_reduced(params)
    _phi, _sigma = star_angles(solution, _sys)
    _action = solution.I
    return amplitude_A1(_action, _sys, tol) * math.cos(_phi) + amplitude_A2(_action, _sys, tol) * math.cos(_sigma)


def reduced_poincare(
    I: float, theta: float, criterion: TauCriterion, params: Params, tol: Optional[Tolerances] = None
) -> float:
    """``L*(I, theta) = A1(I) cos(theta - I tau*) + A2(I) cos(r theta - (rI - 1) tau*)``."""
    return level_from_solution(solve_tau_star(I, theta, criterion, params, tol), params, tol)


def theta_derivative_forms(
    solution: TauSolution, params: Params, tol: Optional[Tolerances] = None
) -> tuple[Optional[float], Optional[float]]:
    """
    The two equivalent expressions of dL*/dtheta: ``A1 sin(phi*)/(rI - 1)`` and ``-A2 sin(sigma*)/I``.

    Either is None where its denominator vanishes.
    """
    _sys = as_reduced(params)
    _phi, _sigma = star_angles(solution, _sys)
    _action = solution.I
    _w = _sys.r * _action - 1.0
    _first = amplitude_A1(_action, _sys, tol) * math.sin(_phi) / _w if _w != 0.0 else None
    _second = -amplitude_A2(_action, _sys, tol) * math.sin(_sigma) / _action if _action != 0.0 else None
    return _first, _second


def gradient_from_solution(
    solution: TauSolution, params: Params, tol: Optional[Tolerances] = None
) -> tuple[float, float]:
    _sys = as_reduced(params)
    _action = solution.I
    _phi, _sigma = star_angles(solution, _sys)
    _A1 = amplitude_A1(_action, _sys, tol)
    _A2 = amplitude_A2(_action, _sys, tol)
    _first, _second = theta_derivative_forms(solution, _sys, tol)
    # the form with the larger denominator
    _d_theta = _first if abs(_sys.r * _action - 1.0) >= abs(_action) else _second
    _d_action = (
        amplitude_A1_prime(_action, _sys, tol) * math.cos(_phi)
        + amplitude_A2_prime(_action, _sys, tol) * math.cos(_sigma)
        + solution.tau_star * (_A1 * math.sin(_phi) + _sys.r * _A2 * math.sin(_sigma))
    )
    return _d_action, _d_theta


def grad_reduced_poincare(
    I: float, theta: float, criterion: TauCriterion, params: Params, tol: Optional[Tolerances] = None
) -> tuple[float, float]:
    """
    Analytic gradient (dL*/dI, dL*/dtheta) of the reduced Poincare function.

    :raises TangencyDegenerate: if tau* is degenerate (the gradient is not defined there)
    """
    _solution = solve_tau_star(I, theta, criterion, params, tol)
    if _solution.degenerate:
        raise TangencyDegenerate("tau* is degenerate, L* is not differentiable here", I=I, theta=theta)
    return gradient_from_solution(_solution, params, tol)


def _step_from_solution(
    solution: TauSolution, state: ScatteringState, params: Params, tol: Optional[Tolerances]
) -> ScatteringState:
    if solution.degenerate:
        raise TangencyDegenerate(
            "the NHIM line is (nearly) tangent to the crest",
            I=state.I,
            theta=state.theta,
            slope=solution.transversality,
        )
    _sys = as_reduced(params)
    _d_action, _d_theta = gradient_from_solution(solution, _sys, tol)
    return ScatteringState(I=state.I + _sys.eps * _d_theta, theta=state.theta - _sys.eps * _d_action)


def scattering_step(
    state: ScatteringState, criterion: TauCriterion, params: Params, tol: Optional[Tolerances] = None
) -> ScatteringState:
    """
    First-order scattering map ``(I, theta) -> (I + eps dL*/dtheta, theta - eps dL*/dI)``, theta mod 2pi.

    The O(eps^2) remainder of the true map is not computed.

    :raises TangencyDegenerate: for a degenerate tau*
    """
    _solution = solve_tau_star(state.I, state.theta, criterion, params, tol)
    return _step_from_solution(_solution, state, params, tol)


def scattering_step_unreduced(
    I: float, phi: float, s: float, criterion: TauCriterion, params: Params, tol: Optional[Tolerances] = None
) -> tuple[float, float, float]:
    """The scattering step in (I, phi, s) coordinates: s is left unchanged, theta = phi - I s."""
    _after = scattering_step(ScatteringState(I=I, theta=phi - I * s), criterion, params, tol)
    return _after.I, _after.theta + _after.I * s, s


def scattering_step_detail(
    state: ScatteringState, criterion: TauCriterion, params: Params, tol: Optional[Tolerances] = None
) -> ScatteringStepResult:
    """Scattering step with the L* levels before and after, and the atlas region for minabs."""
    _solution = solve_tau_star(state.I, state.theta, criterion, params, tol)
    _after = _step_from_solution(_solution, state, params, tol)
    _region = None
    if criterion.kind == CriterionKind.MINIMAL_ABS:
        _region = atlas_region(_solution, tol)
    try:
        _level_after = reduced_poincare(_after.I, _after.theta, criterion, params, tol)
    except ArnoldDiffusionError as e:
        logger.warning(f"L* undefined at the image ({_after.I}, {_after.theta}): {e}")
        _level_after = None
    return ScatteringStepResult(
        before=state,
        after=_after,
        criterion=criterion,
        tau_star=_solution.tau_star,
        branch_hit=_solution.branch_hit.k,
        level_before=level_from_solution(_solution, params, tol),
        level_after=_level_after,
        region=_region,
    )


def extended_map_domain(
    I: float, theta: float, params: Params, k: int = 1, tol: Optional[Tolerances] = None
) -> bool:
    """
    True iff the extended scattering map of horizontal branch ``k`` is defined at (I, theta).

    Always true for horizontal crests (|mu alpha| < 1). Otherwise the NHIM line must meet the crest
    on the part covered by the horizontal parameterization, i.e. with |mu alpha sin(phi*)| = |sin(sigma*)| < 1,
    inside the sigma band of branch ``k``.
    """
    _tolerances = resolve_tolerances(tol)
    _sys = as_reduced(params)
    _kind = classify(I, _sys, _tolerances)
    if _kind == CrestKind.HORIZONTAL:
        return True
    if _kind == CrestKind.SINGULAR:
        return False
    _ray = NhimRay(I, theta, _sys, _tolerances)
    _h = march_step(I, _sys, _tolerances)
    _limit = tau_window(I, _sys, _tolerances)
    if _ray.w == 0.0:
        return False
    _lower, _upper = sorted(
        ((_ray.sigma0 - (k + 0.5) * math.pi) / _ray.w, (_ray.sigma0 - (k - 0.5) * math.pi) / _ray.w)
    )
    _lower, _upper = max(_lower, -_limit), min(_upper, _limit)
    if _lower > _upper:
        return False
    _hits = [c for c in _crossings(_ray, _lower, _upper, _h, _tolerances.tol_root)]
    _on_arc = []
    for _c in _hits:
        _, _sigma = _ray.angles(_c.tau)
        if round(_sigma / math.pi) == k and abs(math.sin(_sigma)) < 1.0 - _tolerances.tol_cls:
            _on_arc.append(_c)
    return bool(_on_arc)


def atlas_region(solution: TauSolution, tol: Optional[Tolerances] = None) -> AtlasRegion:
    _k = solution.branch_hit.k
    if _k % 2 != 0:
        return AtlasRegion.II
    return AtlasRegion.I if _k <= 0 else AtlasRegion.III


def piecewise_global_map(
    state: ScatteringState, params: Params, tol: Optional[Tolerances] = None
) -> tuple[ScatteringState, AtlasRegion]:
    """
    Minimal-|tau*| global scattering map with its region label: I (branch 0), II (branch 1), III (branch 2).

    :raises OnDiscontinuity: within tol_disc of theta = pi/2 or 3pi/2, or where two crossings are tied
    """
    _tolerances = resolve_tolerances(tol)
    for _line in MINIMAL_ABS_ATLAS.discontinuities:
        if abs(state.theta - _line) <= _tolerances.tol_disc:
            raise OnDiscontinuity("theta lies on a discontinuity line of the minimal |tau*| map", theta=state.theta)
    _solution = solve_tau_star(state.I, state.theta, MINIMAL_ABS, params, _tolerances)
    if _solution.tie:
        raise OnDiscontinuity("two crest crossings have the same |tau*|", I=state.I, theta=state.theta)
    return _step_from_solution(_solution, state, params, _tolerances), atlas_region(_solution, _tolerances)


# ------------------------------------------------------------------------------
# Windows of positive action drift (r = 1, branch 1 map)
# ------------------------------------------------------------------------------
def _require_unit_ratio(system: ReducedSystem) -> None:
    if system.r != 1.0:
        raise ConfigurationError("the drift window is only known for r = 1", r=system.r)


def theta_plus(I: float, params: Params, tol: Optional[Tolerances] = None) -> float:
    """
    Upper end of the window (pi, theta_plus) in which the branch-1 scattering map increases I (a1, a2 > 0).
    """
    _tolerances = resolve_tolerances(tol)
    _sys = as_reduced(params)
    _require_unit_ratio(_sys)
    if I == 1.0:
        return TWO_PI
    if classify(I, _sys, _tolerances) == CrestKind.VERTICAL:
        if I <= -0.5 or I > 1.0:
            return 1.5 * math.pi
        if I < 0.0:
            return (1.0 - I) * math.pi
        return (I + 1.0) * math.pi
    if I <= 0.0 or I >= 1.5:
        return 1.5 * math.pi
    if I < 1.0:
        return (2.0 - I) * math.pi
    return math.pi * I


def theta_minus(I: float, params: Params, tol: Optional[Tolerances] = None) -> float:
    """Lower end of the mirrored window (theta_minus, pi) used when a1 < 0."""
    return TWO_PI - theta_plus(I, params, tol)


def conjugate_negative_mu(params: Params) -> tuple[ReducedSystem, float]:
    """
    Maps a system with a2 < 0 to the one with a2 > 0 through s -> s + pi.

    :return: (conjugated system, time section at which its orbits live in the original system)
    """
    _sys = as_reduced(params)
    if _sys.a2 >= 0:
        return _sys, 0.0
    return _sys.model_copy(update={"a2": -_sys.a2}), math.pi


# ------------------------------------------------------------------------------
# grid helpers shared by the CLI and the verification suite
# ------------------------------------------------------------------------------
def ray_scan_oracle(
    I: float, theta: float, criterion: TauCriterion, params: Params, h: float = 1e-5, tol: Optional[Tolerances] = None
) -> float:
    """
    Brute-force tau*: scans the ray with a fixed fine step and returns the crossing the criterion selects,
    linearly interpolated between the bracketing samples.
    """
    _tolerances = resolve_tolerances(tol)
    _sys = as_reduced(params)
    _ray = NhimRay(I, theta, _sys, _tolerances)
    _limit = tau_window(I, _sys, _tolerances)

    def _scan(direction: int, accept: Callable[[int], bool], stop_first: bool) -> List[tuple[float, int]]:
        _hits: List[tuple[float, int]] = []
        _chunk = 1_000_000
        _done = 0.0
        while _done < _limit:
            _taus = direction * (_done + h * np.arange(0, _chunk + 1))
            _values = _ray.residual(_taus)
            for _i in np.nonzero(_values[:-1] * _values[1:] < 0.0)[0]:
                _t0, _t1, _v0, _v1 = _taus[_i], _taus[_i + 1], _values[_i], _values[_i + 1]
                _root = float(_t0 - _v0 * (_t1 - _t0) / (_v1 - _v0))
                _k = _ray.label(_root)
                if accept(_k):
                    _hits.append((_root, _k))
                    if stop_first:
                        return _hits
            _done += h * _chunk
            if _hits:
                return _hits
        return _hits

    if criterion.kind in (CriterionKind.DOWN, CriterionKind.UP):
        _down = 1 if _ray.w >= 0 else -1
        _direction = _down if criterion.kind == CriterionKind.DOWN else -_down
        _hits = _scan(_direction, lambda k: k % 2 == 0, True)
    elif criterion.kind == CriterionKind.MINIMAL_ABS:
        _hits = _scan(1, lambda k: True, True) + _scan(-1, lambda k: True, True)
    else:
        _hits = _scan(1, lambda k: k == criterion.k, False) + _scan(-1, lambda k: k == criterion.k, False)
    if not _hits:
        raise UnreachableBranch("brute-force scan found no crossing", I=I, theta=theta)
    return min(_hits, key=lambda hit: abs(hit[0]))[0]
