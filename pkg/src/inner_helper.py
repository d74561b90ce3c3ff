import math
from typing import Iterator, Optional

import numpy as np
from loguru import logger
from scipy.integrate import solve_ivp

from src.DTOs.inner import InnerOrbit, InnerSample, InnerState, ResonanceRegion, TorusModel
from src.DTOs.system_params import ReducedSystem
from src.errors import OutOfDomain, StepFailure
from src.model_helper import Params, as_reduced, resolve_tolerances
from src.settings import Tolerances

TWO_PI = 2.0 * math.pi


def _rhs(system: ReducedSystem):
    _eps, _a1, _a2, _r = system.eps, system.a1, system.a2, system.r

    def _field(t: float, y: np.ndarray) -> list:
        _action, _phi, _s = y
        return [_eps * (_a1 * math.sin(_phi) + _r * _a2 * math.sin(_r * _phi - _s)), _action, 1.0]

    return _field


def _integrate(system: ReducedSystem, y0, t_final: float, tol: Tolerances, t_eval=None):
    _solution = solve_ivp(
        _rhs(system),
        (0.0, t_final),
        y0,
        method="DOP853",
        rtol=tol.tol_ode,
        atol=tol.tol_ode,
        t_eval=t_eval,
    )
    if not _solution.success:
        raise StepFailure(f"inner flow integration failed: {_solution.message}", t_final=t_final)
    logger.debug(f"Inner flow over t={t_final}: {_solution.nfev} evaluations")
    return _solution


def inner_flow(state: InnerState, t: float, params: Params, tol: Optional[Tolerances] = None) -> InnerState:
    """
    Flow of the Hamiltonian restricted to the NHIM,
    ``phi' = I, s' = 1, I' = eps (a1 sin(phi) + r a2 sin(r phi - s))``, over time ``t`` (may be negative).

    The unperturbed case eps = 0 is solved exactly.

    :raises StepFailure: if the integrator gives up
    """
    _sys = as_reduced(params)
    if t == 0.0:
        return state
    if _sys.eps == 0.0:
        return InnerState(I=state.I, phi=state.phi + state.I * t, s=state.s + t)
    _solution = _integrate(_sys, [state.I, state.phi, state.s], t, resolve_tolerances(tol))
    _action, _phi, _s = _solution.y[:, -1]
    return InnerState(I=float(_action), phi=float(_phi), s=float(_s))


def inner_energy(state: InnerState, params: Params) -> float:
    """``K = I^2/2 + eps (a1 cos(phi) + a2 cos(r phi - s))``, the NHIM Hamiltonian."""
    _sys = as_reduced(params)
    _potential = _sys.a1 * math.cos(state.phi) + _sys.a2 * math.cos(_sys.r * state.phi - state.s)
    return 0.5 * state.I**2 + _sys.eps * _potential


def energy_balance_residual(state: InnerState, t: float, params: Params, tol: Optional[Tolerances] = None) -> float:
    """
    ``K(t) - K(0) - int_0^t dK/ds dt`` along the trajectory; zero up to the integration error since
    dK/dt = eps a2 sin(r phi - s).
    """
    _tolerances = resolve_tolerances(tol)
    _sys = as_reduced(params)
    _field = _rhs(_sys)

    def _augmented(time: float, y: np.ndarray) -> list:
        return [*_field(time, y[:3]), _sys.eps * _sys.a2 * math.sin(_sys.r * y[1] - y[2])]

    _solution = solve_ivp(
        _augmented,
        (0.0, t),
        [state.I, state.phi, state.s, 0.0],
        method="DOP853",
        rtol=_tolerances.tol_ode,
        atol=_tolerances.tol_ode,
    )
    if not _solution.success:
        raise StepFailure(f"energy balance integration failed: {_solution.message}", t_final=t)
    _action, _phi, _s, _work = _solution.y[:, -1]
    _end = InnerState(I=float(_action), phi=float(_phi), s=float(_s))
    return inner_energy(_end, _sys) - inner_energy(state, _sys) - float(_work)


def nonresonant_action(state: InnerState, params: Params) -> float:
    """
    Action of the first-order non-resonant normal form,
    ``J = I + eps (a1 cos(phi) / I + r a2 cos(r phi - s) / (r I - 1))``.

    J is constant along the inner flow up to O(eps^2); undefined at the resonances I = 0 and I = 1/r.
    """
    _sys = as_reduced(params)
    _w = _sys.r * state.I - 1.0
    if state.I == 0.0 or _w == 0.0:
        raise OutOfDomain("the non-resonant normal form is singular at the resonances", I=state.I)
    _correction = _sys.a1 * math.cos(state.phi) / state.I
    _correction += _sys.r * _sys.a2 * math.cos(_sys.r * state.phi - state.s) / _w
    return state.I + _sys.eps * _correction


def strobe_chunks(
    state: InnerState, periods: int, params: Params, tol: Optional[Tolerances] = None, chunk: int = 64
) -> Iterator[InnerSample]:
    """
    Yields the stroboscopic samples at t = 2pi n, n = 1..periods, integrating ``chunk`` periods at a time.
    """
    _tolerances = resolve_tolerances(tol)
    _sys = as_reduced(params)
    _y = [state.I, state.phi, state.s]
    _done = 0
    while _done < periods:
        _n = min(chunk, periods - _done)
        _times = TWO_PI * np.arange(1, _n + 1)
        if _sys.eps == 0.0:
            _values = np.array([[_y[0]] * _n, _y[1] + _y[0] * _times, _y[2] + _times])
        else:
            _values = _integrate(_sys, _y, float(_times[-1]), _tolerances, t_eval=_times).y
        for _j in range(_n):
            yield InnerSample(
                t=TWO_PI * (_done + _j + 1),
                state=InnerState(I=float(_values[0, _j]), phi=float(_values[1, _j]), s=float(_values[2, _j])),
            )
        _y = [float(_values[0, -1]), float(_values[1, -1]), float(_values[2, -1])]
        _done += _n


def stroboscopic_orbit(
    state: InnerState, periods: int, params: Params, tol: Optional[Tolerances] = None
) -> InnerOrbit:
    """Stroboscopic samples of the inner flow over ``periods`` periods of the time angle."""
    return InnerOrbit(start=state, samples=list(strobe_chunks(state, periods, params, tol)))


# ------------------------------------------------------------------------------
# approximate invariant tori
# ------------------------------------------------------------------------------
def region_of(I: float, params: Params, tol: Optional[Tolerances] = None) -> ResonanceRegion:
    """Res0 for |I| <= a_bar, Res1 for |I - 1/r| <= a_bar, non-resonant otherwise."""
    _tolerances = resolve_tolerances(tol)
    _sys = as_reduced(params)
    if abs(I) <= _tolerances.a_bar:
        return ResonanceRegion.RES0
    if abs(I - 1.0 / _sys.r) <= _tolerances.a_bar:
        return ResonanceRegion.RES1
    return ResonanceRegion.NON_RESONANT


def torus_value_in(region: ResonanceRegion, state: InnerState, params: Params) -> float:
    """
    First-order torus function of ``region`` evaluated at ``state`` (O(eps^2) terms dropped):
    ``F0 = I^2/2 + eps a1 cos(phi)``, ``F1 = (I - 1/r)^2/2 + eps a2 cos(r phi - s)``, ``Fnr = I^2/2``.
    """
    _sys = as_reduced(params)
    if region == ResonanceRegion.RES0:
        return 0.5 * state.I**2 + _sys.eps * _sys.a1 * math.cos(state.phi)
    if region == ResonanceRegion.RES1:
        return 0.5 * (state.I - 1.0 / _sys.r) ** 2 + _sys.eps * _sys.a2 * math.cos(_sys.r * state.phi - state.s)
    return 0.5 * state.I**2


def torus_value(state: InnerState, params: Params, tol: Optional[Tolerances] = None) -> float:
    return torus_value_in(region_of(state.I, params, tol), state, params)


def torus_model(state: InnerState, params: Params, tol: Optional[Tolerances] = None) -> TorusModel:
    _region = region_of(state.I, params, tol)
    return TorusModel(region=_region, value=torus_value_in(_region, state, params))


def torus_gradient(region: ResonanceRegion, I: float, theta: float, params: Params) -> tuple[float, float]:
    """
    (dF/dI, dF/dtheta) of the torus function of ``region`` on the section s = 0, where theta = phi.
    """
    _sys = as_reduced(params)
    if region == ResonanceRegion.RES0:
        return I, -_sys.eps * _sys.a1 * math.sin(theta)
    if region == ResonanceRegion.RES1:
        return I - 1.0 / _sys.r, -_sys.eps * _sys.a2 * _sys.r * math.sin(_sys.r * theta)
    return I, 0.0


def resonance_center(region: ResonanceRegion, params: Params) -> Optional[float]:
    if region == ResonanceRegion.RES0:
        return 0.0
    if region == ResonanceRegion.RES1:
        return 1.0 / as_reduced(params).r
    return None


def resonance_half_width(region: ResonanceRegion, params: Params) -> float:
    """
    Half-width in I of the separatrix loop of the resonant pendulum: ``2 sqrt(eps |a|)``
    with a = a1 for Res0 and a = a2 for Res1 (zero outside the resonances).
    """
    _sys = as_reduced(params)
    if region == ResonanceRegion.RES0:
        return 2.0 * math.sqrt(_sys.eps * abs(_sys.a1))
    if region == ResonanceRegion.RES1:
        return 2.0 * math.sqrt(_sys.eps * abs(_sys.a2))
    return 0.0
