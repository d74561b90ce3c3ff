import math
from typing import List, Optional

from loguru import logger

from src.DTOs.inner import InnerState, ResonanceRegion
from src.DTOs.pseudo_orbit import (
    BracketVerdict,
    CheckResult,
    DiffusionPolicy,
    InnerLeg,
    PseudoOrbit,
    ScatterLeg,
    TransversalityReport,
    VerificationReport,
)
from src.DTOs.scattering import ScatteringState, TauCriterion, branch
from src.DTOs.system_params import ReducedSystem, SystemParams
from src.errors import (
    ArnoldDiffusionError,
    ConfigurationError,
    OutOfDomain,
    StuckAtResonance,
    TangencyDegenerate,
    WindowEmpty,
)
from src.inner_helper import inner_flow, region_of, strobe_chunks, torus_gradient, torus_value_in
from src.model_helper import Params, amplitude_A1_prime, amplitude_A2_prime, as_reduced, resolve_tolerances
from src.scattering_helper import (
    conjugate_negative_mu,
    gradient_from_solution,
    level_from_solution,
    solve_tau_star,
    theta_minus,
    theta_plus,
)
from src.settings import Tolerances

TWO_PI = 2.0 * math.pi
# branch of the crest C_m through (pi, pi) used by every scatter leg
DIFFUSION_CRITERION = branch(1)


# ------------------------------------------------------------------------------
# transversality of the scattering map to the inner tori
# ------------------------------------------------------------------------------
def poisson_bracket(
    I: float, theta: float, criterion: TauCriterion, params: Params, tol: Optional[Tolerances] = None
) -> float:
    """
    ``{F, L*} = dF/dtheta dL*/dI - dF/dI dL*/dtheta`` with F the torus function of the region of ``I``.

    :raises TangencyDegenerate: if tau* is degenerate at (I, theta)
    """
    _tolerances = resolve_tolerances(tol)
    _sys = as_reduced(params)
    _solution = solve_tau_star(I, theta, criterion, _sys, _tolerances)
    if _solution.degenerate:
        raise TangencyDegenerate("tau* is degenerate, the bracket is not defined", I=I, theta=theta)
    _dL_dI, _dL_dtheta = gradient_from_solution(_solution, _sys, _tolerances)
    _dF_dI, _dF_dtheta = torus_gradient(region_of(I, _sys, _tolerances), I, theta, _sys)
    return _dF_dtheta * _dL_dI - _dF_dI * _dL_dtheta


def transversality_report(
    I: float, theta: float, criterion: TauCriterion, params: Params, tol: Optional[Tolerances] = None
) -> TransversalityReport:
    _tolerances = resolve_tolerances(tol)
    _bracket = poisson_bracket(I, theta, criterion, params, _tolerances)
    return TransversalityReport(
        I=I,
        theta=theta,
        region=region_of(I, params, _tolerances),
        bracket=_bracket,
        verdict=BracketVerdict.TANGENT_LINE if abs(_bracket) < _tolerances.tol_bracket else BracketVerdict.TRANSVERSAL,
    )


def resonant_bracket_approximation(
    I: float, theta: float, params: Params, tol: Optional[Tolerances] = None
) -> float:
    """
    Leading-order bracket of the branch-1 map inside a resonance (r = 1):

    - Res0: ``a1 sin(theta) [4 I + eps A2'(0) - 4 eps a1 (pi - theta) sin(theta)]``
    - Res1: ``a2 sin(theta) [4 (I - 1) + eps A1'(1) - 4 eps a2 (theta - pi) sin(theta)]``

    :raises OutOfDomain: outside the resonant regions
    """
    _tolerances = resolve_tolerances(tol)
    _sys = as_reduced(params)
    _region = region_of(I, _sys, _tolerances)
    _eps, _sin = _sys.eps, math.sin(theta)
    if _region == ResonanceRegion.RES0:
        _slope = amplitude_A2_prime(0.0, _sys, _tolerances)
        return _sys.a1 * _sin * (4.0 * I + _eps * _slope - 4.0 * _eps * _sys.a1 * (math.pi - theta) * _sin)
    if _region == ResonanceRegion.RES1:
        _slope = amplitude_A1_prime(1.0, _sys, _tolerances)
        return _sys.a2 * _sin * (4.0 * (I - 1.0) + _eps * _slope - 4.0 * _eps * _sys.a2 * (theta - math.pi) * _sin)
    raise OutOfDomain("the resonant bracket approximation only holds inside a resonance", I=I)


def non_transversality_curve(theta: float, params: Params, tol: Optional[Tolerances] = None) -> float:
    """
    Action I(theta) on which the Res0 bracket vanishes besides sin(theta) = 0:
    ``(pi - theta) sin(theta) = I/(eps a1) + A2'(0)/(4 a1)``.
    """
    _sys = as_reduced(params)
    _slope = amplitude_A2_prime(0.0, _sys, resolve_tolerances(tol))
    return _sys.eps * (_sys.a1 * (math.pi - theta) * math.sin(theta) - 0.25 * _slope)


# ------------------------------------------------------------------------------
# pseudo-orbit construction
# ------------------------------------------------------------------------------
def diffusion_system(params: Params, tol: Optional[Tolerances] = None) -> tuple[ReducedSystem, float]:
    """
    Checks the hypotheses of a diffusion run and returns the system the orbit is built in
    (a2 > 0 after the s -> s + pi conjugacy) with its time section.

    :raises ConfigurationError: for a1 a2 = 0, dependent harmonics, eps = 0, eps > eps_cap or r != 1
    """
    _tolerances = resolve_tolerances(tol)
    if isinstance(params, SystemParams):
        params.require_diffusion_hypotheses()
    _sys = as_reduced(params)
    if _sys.a1 * _sys.a2 == 0:
        raise ConfigurationError("a1 * a2 = 0: there is no diffusion mechanism", a1=_sys.a1, a2=_sys.a2)
    if _sys.eps <= 0.0:
        raise ConfigurationError("eps = 0: there is no diffusion mechanism for the unperturbed system")
    if _sys.eps > _tolerances.eps_cap:
        raise ConfigurationError(
            "eps is above the configured cap for diffusion runs", eps=_sys.eps, cap=_tolerances.eps_cap
        )
    if _sys.r != 1.0:
        raise ConfigurationError("diffusion runs need r = 1", r=_sys.r)
    return conjugate_negative_mu(_sys)


def diffusion_policy(system: ReducedSystem, tol: Optional[Tolerances] = None) -> DiffusionPolicy:
    _tolerances = resolve_tolerances(tol)
    _eps = system.eps
    return DiffusionPolicy(
        side="right" if system.a1 > 0 else "left",
        rho=math.pi + _tolerances.rho_delta,
        margin=_tolerances.c_margin * _eps**2,
        level_budget=_tolerances.c_level * _eps**2,
        torus_budget=_tolerances.c_torus * _eps,
        t_max=_tolerances.t_max_factor / _eps,
        max_legs=_tolerances.max_legs,
    )


def drift_window(I: float, system: ReducedSystem, policy: DiffusionPolicy, tol: Tolerances) -> tuple[float, float]:
    """Admissible theta interval at action ``I`` (window shrunk by the margin on both sides)."""
    if policy.side == "right":
        _lower, _upper = policy.rho, theta_plus(I, system, tol)
    else:
        _lower, _upper = theta_minus(I, system, tol), TWO_PI - policy.rho
    return _lower + policy.margin, _upper - policy.margin


def _in_window(state: ScatteringState, system: ReducedSystem, policy: DiffusionPolicy, tol: Tolerances) -> bool:
    _lower, _upper = drift_window(state.I, system, policy, tol)
    return _lower < state.theta < _upper


def _try_scatter(
    state: ScatteringState, system: ReducedSystem, policy: DiffusionPolicy, tol: Tolerances
) -> Optional[ScatterLeg]:
    """One branch-1 scattering step from ``state``, or None if it is not admissible there."""
    if not _in_window(state, system, policy, tol):
        return None
    try:
        _solution = solve_tau_star(state.I, state.theta, DIFFUSION_CRITERION, system, tol)
        if _solution.degenerate:
            return None
        _d_action, _d_theta = gradient_from_solution(_solution, system, tol)
        _after = ScatteringState(I=state.I + system.eps * _d_theta, theta=state.theta - system.eps * _d_action)
        if not _after.I > state.I:
            return None
        _image = solve_tau_star(_after.I, _after.theta, DIFFUSION_CRITERION, system, tol)
        _level_after = level_from_solution(_image, system, tol)
    except ArnoldDiffusionError as e:
        logger.debug(f"No scatter leg at ({state.I}, {state.theta}): {e}")
        return None
    _residual = abs(_level_after - level_from_solution(_solution, system, tol))
    if _residual > policy.level_budget:
        return None
    return ScatterLeg(before=state, after=_after, tau_star=_solution.tau_star, level_residual=_residual)


def _inner_return(
    state: ScatteringState, system: ReducedSystem, policy: DiffusionPolicy, tol: Tolerances
) -> tuple[InnerLeg, ScatterLeg]:
    """
    Follows the inner flow from ``state`` (on the section s = 0) and returns the first stroboscopic
    hit from which a scatter leg is admissible, together with that leg.

    :raises StuckAtResonance: if no such hit occurs within t_max
    """
    _start = InnerState(I=state.I, phi=state.theta, s=0.0)
    _region = region_of(state.I, system, tol)
    _start_value = torus_value_in(_region, _start, system)
    _periods = max(1, int(policy.t_max / TWO_PI))
    for _sample in strobe_chunks(_start, _periods, system, tol):
        _candidate = ScatteringState(I=_sample.state.I, theta=_sample.state.phi)
        if _try_scatter(_candidate, system, policy, tol) is None:
            continue
        # the stored endpoint is a fresh integration, the one the verification repeats
        _end = inner_flow(_start, _sample.t, system, tol)
        _drift = abs(torus_value_in(_region, _end, system) - _start_value)
        if _drift > policy.torus_budget:
            continue
        _scatter = _try_scatter(ScatteringState(I=_end.I, theta=_end.phi), system, policy, tol)
        if _scatter is None:
            continue
        _leg = InnerLeg(start=_start, end=_end, duration=_sample.t, region=_region, torus_drift=_drift)
        return _leg, _scatter
    raise StuckAtResonance("no admissible return to the drift window", I=state.I, theta=state.theta, t_max=policy.t_max)


def build_pseudo_orbit(
    I_start: float, I_end: float, params: Params, tol: Optional[Tolerances] = None, theta_start: Optional[float] = None
) -> PseudoOrbit:
    """
    Builds a pseudo-orbit from ``I_start`` to ``I_end`` alternating branch-1 scattering steps inside the
    drift window with inner-flow arcs that bring theta back into it.

    :param I_start: reduced start action
    :param I_end: reduced target action (> I_start)
    :param params: the system; a2 < 0 is handled through s -> s + pi, a1 < 0 through the mirrored window
    :param theta_start: start angle, the middle of the window if omitted
    :raises ConfigurationError: if the diffusion hypotheses fail
    :raises WindowEmpty: if the drift window collapses at a traversed action
    :raises StuckAtResonance: if an inner leg finds no return within t_max, or the leg cap is reached
    """
    _tolerances = resolve_tolerances(tol)
    if not I_end > I_start:
        raise ConfigurationError("the target action must exceed the start action", I_start=I_start, I_end=I_end)
    _sys, _s_section = diffusion_system(params, _tolerances)
    _policy = diffusion_policy(_sys, _tolerances)
    if theta_start is None:
        theta_start = 0.5 * sum(drift_window(I_start, _sys, _policy, _tolerances))
    logger.info(f"Building pseudo-orbit {I_start} -> {I_end} (eps={_sys.eps}, mu={_sys.mu}, side={_policy.side})")

    _legs: List = []
    _state = ScatteringState(I=I_start, theta=theta_start)
    while _state.I < I_end:
        if len(_legs) >= _policy.max_legs:
            raise StuckAtResonance("leg cap reached before the target action", I=_state.I, legs=len(_legs))
        _lower, _upper = drift_window(_state.I, _sys, _policy, _tolerances)
        if not _lower < _upper:
            raise WindowEmpty("the drift window is empty", I=_state.I, lower=_lower, upper=_upper)
        _scatter = _try_scatter(_state, _sys, _policy, _tolerances)
        if _scatter is None:
            _inner, _scatter = _inner_return(_state, _sys, _policy, _tolerances)
            _legs.append(_inner)
            logger.debug(f"Inner leg at I={_state.I:.6f}: duration {_inner.duration:.1f}, region {_inner.region.value}")
        _legs.append(_scatter)
        _state = _scatter.after

    _orbit = PseudoOrbit(legs=_legs, policy=_policy, I_start=I_start, I_end=I_end, eps=_sys.eps, s_section=_s_section)
    logger.info(
        f"Pseudo-orbit reached I={_orbit.final_action:.6f} with {len(_orbit.scatter_legs)} scatter and "
        f"{len(_orbit.inner_legs)} inner legs"
    )
    return _orbit


# ------------------------------------------------------------------------------
# verification
# ------------------------------------------------------------------------------
def _check(name: str, values: List[float], bound: float, detail: str) -> CheckResult:
    _worst = max(values) if values else 0.0
    return CheckResult(name=name, passed=_worst <= bound, value=_worst, detail=detail)


def verify_pseudo_orbit(orbit: PseudoOrbit, params: Params, tol: Optional[Tolerances] = None) -> VerificationReport:
    """
    Recomputes every invariant of ``orbit`` independently (fresh tau* solves and re-integrations)
    and reports the worst residual of each check. Never raises for a failing orbit.
    """
    _tolerances = resolve_tolerances(tol)
    _sys, _ = diffusion_system(params, _tolerances)
    _policy = orbit.policy
    _report = VerificationReport()

    _step_errors: List[float] = []
    _levels: List[float] = []
    _gains: List[float] = []
    _outside: List[float] = []
    _brackets: List[float] = []
    for _leg in orbit.scatter_legs:
        try:
            _solution = solve_tau_star(_leg.before.I, _leg.before.theta, DIFFUSION_CRITERION, _sys, _tolerances)
            _d_action, _d_theta = gradient_from_solution(_solution, _sys, _tolerances)
            _expected = ScatteringState(
                I=_leg.before.I + _sys.eps * _d_theta, theta=_leg.before.theta - _sys.eps * _d_action
            )
            _dtheta = abs(math.remainder(_expected.theta - _leg.after.theta, TWO_PI))
            _step_errors.append(max(abs(_expected.I - _leg.after.I), _dtheta))
            _after = solve_tau_star(_leg.after.I, _leg.after.theta, DIFFUSION_CRITERION, _sys, _tolerances)
            _level_before = level_from_solution(_solution, _sys, _tolerances)
            _levels.append(abs(level_from_solution(_after, _sys, _tolerances) - _level_before))
        except ArnoldDiffusionError as e:
            logger.warning(f"Scatter leg at I={_leg.before.I} could not be recomputed: {e}")
            _step_errors.append(math.inf)
            _levels.append(math.inf)
        if region_of(_leg.before.I, _sys, _tolerances) != ResonanceRegion.NON_RESONANT:
            try:
                _bracket = poisson_bracket(_leg.before.I, _leg.before.theta, DIFFUSION_CRITERION, _sys, _tolerances)
                _brackets.append(abs(_bracket))
            except ArnoldDiffusionError as e:
                logger.debug(f"no bracket at I={_leg.before.I}: {e}")
        _gains.append(_leg.after.I - _leg.before.I)
        _lower, _upper = drift_window(_leg.before.I, _sys, _policy, _tolerances)
        _outside.append(max(0.0, _lower - _leg.before.theta, _leg.before.theta - _upper))

    _report.checks.append(_check("scatter-steps", _step_errors, 1e-9, "recomputed first-order step vs stored image"))
    _report.checks.append(_check("level-residuals", _levels, _policy.level_budget, "|L*(after) - L*(before)|"))
    _report.checks.append(
        CheckResult(
            name="action-increase",
            passed=all(gain > 0.0 for gain in _gains),
            value=min(_gains) if _gains else None,
            detail="every scatter leg increases I",
        )
    )
    _report.checks.append(_check("drift-window", _outside, 0.0, "scatter legs start inside the drift window"))

    _reintegration: List[float] = []
    _drifts: List[float] = []
    _durations: List[float] = []
    for _leg in orbit.inner_legs:
        try:
            _end = inner_flow(_leg.start, _leg.duration, _sys, _tolerances)
            _reintegration.append(
                max(abs(_end.I - _leg.end.I), abs(_end.phi - _leg.end.phi), abs(_end.s - _leg.end.s))
            )
        except ArnoldDiffusionError as e:
            logger.warning(f"Inner leg at I={_leg.start.I} could not be re-integrated: {e}")
            _reintegration.append(math.inf)
        _drifts.append(abs(torus_value_in(_leg.region, _leg.end, _sys) - torus_value_in(_leg.region, _leg.start, _sys)))
        _durations.append(abs(math.remainder(_leg.duration, TWO_PI)))
    _report.checks.append(
        _check("inner-reintegration", _reintegration, 10 * _tolerances.tol_ode, "fresh integration vs stored end")
    )
    _report.checks.append(_check("torus-drift", _drifts, _policy.torus_budget, "|F(end) - F(start)| per inner leg"))
    _report.checks.append(_check("inner-durations", _durations, 1e-9, "inner legs end on the section s = 0 mod 2pi"))
    _report.checks.append(_check("continuity", _continuity_gaps(orbit), 0.0, "consecutive legs share endpoints"))

    _first_action = _leg_start_action(orbit.legs[0]) if orbit.legs else orbit.I_start
    _report.checks.append(
        CheckResult(
            name="endpoints",
            passed=_first_action == orbit.I_start and orbit.final_action >= orbit.I_end,
            value=orbit.final_action,
            detail=f"starts at {_first_action}, ends at {orbit.final_action} (target {orbit.I_end})",
        )
    )
    _report.checks.append(
        CheckResult(
            name="resonant-transversality",
            passed=True,
            value=min(_brackets) if _brackets else None,
            detail=f"smallest |{{F, L*}}| at {len(_brackets)} resonant jump points (informational)",
        )
    )
    for _failed in _report.failed():
        logger.warning(f"Verification check '{_failed.name}' failed: worst value {_failed.value}")
    return _report


def _leg_start_action(leg) -> float:
    return leg.before.I if leg.kind == "scatter" else leg.start.I


def _continuity_gaps(orbit: PseudoOrbit) -> List[float]:
    _gaps: List[float] = []
    for _previous, _next in zip(orbit.legs[:-1], orbit.legs[1:]):
        if _previous.kind == "scatter":
            _I, _theta = _previous.after.I, _previous.after.theta
        else:
            _I, _theta = _previous.end.I, ScatteringState(I=_previous.end.I, theta=_previous.end.phi).theta
        if _next.kind == "scatter":
            _gaps.append(max(abs(_I - _next.before.I), abs(_theta - _next.before.theta)))
        else:
            _gaps.append(max(abs(_I - _next.start.I), abs(_theta - _next.start.phi), abs(_next.start.s)))
    return _gaps
