import math
from typing import Optional, Sequence, Union

import numpy as np

from src.DTOs.system_params import AmplitudePair, ReducedSystem, SeparatrixPoint, SystemParams
from src.errors import PoleAtOne, PoleAtOneOverR
from src.settings import Tolerances, get_tolerances

Params = Union[SystemParams, ReducedSystem]

# beyond this |x| the hyperbolic functions are evaluated through exponentials
_EXP_SWITCH = 20.0
_OVERFLOW_GUARD = 700.0


def as_reduced(params: Params) -> ReducedSystem:
    """
    Returns the reduced system for ``params`` (no-op if it is reduced already).

    :raises ConfigurationError: if the harmonics cannot be reduced
    """
    if isinstance(params, ReducedSystem):
        return params
    return params.reduced()


def resolve_tolerances(tol: Optional[Tolerances]) -> Tolerances:
    return tol if tol is not None else get_tolerances()


def separatrix(tau: float, sign: int = 1) -> SeparatrixPoint:
    """
    Point of the unperturbed pendulum separatrix at time ``tau``.

    :param tau: time along the separatrix
    :param sign: +1 for the upper, -1 for the lower separatrix
    :return: (p0, q0) with p0 = sign*2/cosh(tau) and q0 = 4*arctan(exp(sign*tau))
    """
    _x = sign * tau
    _e = math.exp(-abs(_x))
    _p0 = sign * 4.0 * _e / (1.0 + _e * _e)
    if _x <= 0:
        _q0 = 4.0 * math.atan(math.exp(_x))
    else:
        _q0 = 2.0 * math.pi - 4.0 * math.atan(_e)
    return SeparatrixPoint(tau=tau, p0=_p0, q0=_q0, sign=sign)


def separatrix_kernel(sigma):
    """
    ``f(0) - f(q0(sigma)) = 1 - cos(q0(sigma)) = 2 sech^2(sigma)``, identical for both separatrices.

    Accepts scalars and numpy arrays.
    """
    _e = np.exp(-2.0 * np.abs(sigma))
    return 8.0 * _e / (1.0 + _e) ** 2


def sinhc(x: float, patch: float) -> float:
    """
    ``x / sinh(x)`` with the removable singularity at 0 patched by its Taylor polynomial for ``|x| < patch``.
    """
    if abs(x) < patch:
        _x2 = x * x
        return 1.0 - _x2 / 6.0 + 7.0 * _x2 * _x2 / 360.0
    _ax = abs(x)
    if _ax > _EXP_SWITCH:
        return 2.0 * _ax * math.exp(-_ax) / (-math.expm1(-2.0 * _ax))
    return x / math.sinh(x)


def sinhc_prime(x: float, patch: float) -> float:
    """Derivative ``(1 - x coth x) / sinh x`` of :func:`sinhc`, patched the same way."""
    if abs(x) < patch:
        return -x / 3.0 + 7.0 * x**3 / 90.0
    if abs(x) > _OVERFLOW_GUARD:
        return 0.0
    return (1.0 - x / math.tanh(x)) / math.sinh(x)


def _patch_radius(tol: Tolerances) -> float:
    # delta_sing is a distance in I; the amplitudes use x = pi*I/2
    return 0.5 * math.pi * tol.delta_sing


def amplitude_A1(I: float, params: Params, tol: Optional[Tolerances] = None) -> float:
    """``A1(I) = 2 pi I a1 / sinh(pi I / 2)``, equal to ``4 a1`` at I = 0."""
    _sys = as_reduced(params)
    return 4.0 * _sys.a1 * sinhc(0.5 * math.pi * I, _patch_radius(resolve_tolerances(tol)))


def amplitude_A2(I: float, params: Params, tol: Optional[Tolerances] = None) -> float:
    """``A2(I) = 2 pi (rI - 1) a2 / sinh(pi (rI - 1) / 2)``, equal to ``4 a2`` at I = 1/r."""
    _sys = as_reduced(params)
    return 4.0 * _sys.a2 * sinhc(0.5 * math.pi * (_sys.r * I - 1.0), _patch_radius(resolve_tolerances(tol)))


def amplitude_A1_prime(I: float, params: Params, tol: Optional[Tolerances] = None) -> float:
    _sys = as_reduced(params)
    return 2.0 * math.pi * _sys.a1 * sinhc_prime(0.5 * math.pi * I, _patch_radius(resolve_tolerances(tol)))


def amplitude_A2_prime(I: float, params: Params, tol: Optional[Tolerances] = None) -> float:
    _sys = as_reduced(params)
    _x = 0.5 * math.pi * (_sys.r * I - 1.0)
    return 2.0 * math.pi * _sys.r * _sys.a2 * sinhc_prime(_x, _patch_radius(resolve_tolerances(tol)))


def amplitude_pair(I: float, params: Params, tol: Optional[Tolerances] = None) -> AmplitudePair:
    _sys = as_reduced(params)
    _tolerances = resolve_tolerances(tol)
    return AmplitudePair(
        I=I,
        A1=amplitude_A1(I, _sys, _tolerances),
        A2=amplitude_A2(I, _sys, _tolerances),
        dA1=amplitude_A1_prime(I, _sys, _tolerances),
        dA2=amplitude_A2_prime(I, _sys, _tolerances),
    )


def _sinh_ratio(a: float, b: float) -> float:
    """``sinh(a) / sinh(b)`` for b != 0, without overflow for large arguments."""
    if abs(a) <= _EXP_SWITCH and abs(b) <= _EXP_SWITCH:
        return math.sinh(a) / math.sinh(b)
    _sign = math.copysign(1.0, a) * math.copysign(1.0, b)
    return _sign * math.exp(abs(a) - abs(b)) * math.expm1(-2.0 * abs(a)) / math.expm1(-2.0 * abs(b))


def alpha_r(I: float, r: float, tol: Optional[Tolerances] = None) -> float:
    """
    ``alpha_r(I) = I^2 sinh(pi (rI - 1)/2) / ((rI - 1)^2 sinh(pi I / 2))``, with alpha_r(0) = 0.

    :raises PoleAtOne: for r = 1 and |I - 1| < delta_sing
    :raises PoleAtOneOverR: for r < 1 and |rI - 1| < delta_sing
    """
    _tolerances = resolve_tolerances(tol)
    _w = r * I - 1.0
    if abs(_w) < _tolerances.delta_sing:
        if r == 1.0:
            raise PoleAtOne("alpha has a pole at I = 1", I=I)
        raise PoleAtOneOverR("alpha_r has a pole at I = 1/r", I=I, r=r)
    _a = 0.5 * math.pi * _w
    _b = 0.5 * math.pi * I
    if abs(_b) <= _EXP_SWITCH:
        # I^2 / sinh(b) = I * (2/pi) * sinhc(b), regular at I = 0
        return I * (2.0 / math.pi) * sinhc(_b, _patch_radius(_tolerances)) * math.sinh(_a) / (_w * _w)
    return (I / _w) ** 2 * _sinh_ratio(_a, _b)


def alpha_r_inverse(I: float, r: float, tol: Optional[Tolerances] = None) -> float:
    """
    ``1 / alpha_r(I)``, regular at the pole I = 1/r (where it vanishes) and singular at I = 0.

    :raises ZeroDivisionError: for I = 0
    """
    _tolerances = resolve_tolerances(tol)
    _w = r * I - 1.0
    _a = 0.5 * math.pi * _w
    _b = 0.5 * math.pi * I
    if abs(_a) <= _EXP_SWITCH:
        return _w * (2.0 / math.pi) * sinhc(_a, _patch_radius(_tolerances)) * math.sinh(_b) / (I * I)
    return (_w / I) ** 2 * _sinh_ratio(_b, _a)


def beta_r(I: float, r: float, tol: Optional[Tolerances] = None) -> float:
    """``beta_r(I) = I alpha_r(I) / (rI - 1)``; same poles as :func:`alpha_r`."""
    return I * alpha_r(I, r, tol) / (r * I - 1.0)


def alpha(I: float, tol: Optional[Tolerances] = None) -> float:
    return alpha_r(I, 1.0, tol)


def beta(I: float, tol: Optional[Tolerances] = None) -> float:
    return beta_r(I, 1.0, tol)


def alpha_limit_ratio(I: float) -> float:
    """
    ``alpha(I) * ((I-1)/I)^2``, the pure sinh ratio whose limits at -inf / +inf are exp(pi/2) / exp(-pi/2).
    """
    return _sinh_ratio(0.5 * math.pi * (I - 1.0), 0.5 * math.pi * I)


def perturbation(phi, s, params: Params):
    """The reduced perturbation ``g(phi, s) = a1 cos(phi) + a2 cos(r phi - s)`` (scalars or arrays)."""
    _sys = as_reduced(params)
    return _sys.a1 * np.cos(phi) + _sys.a2 * np.cos(_sys.r * phi - s)


def hamiltonian_vector_field(t: float, state: Sequence[float], params: SystemParams) -> np.ndarray:
    """
    Right-hand side of the full equations of motion in the original (unreduced) variables.

    :param t: time (unused, the time angle ``s`` is part of the state)
    :param state: (q, p, phi, I, s)
    :param params: the physical parameters
    :return: (q', p', phi', I', s')
    """
    _q, _p, _phi, _action, _s = state
    _arg1 = params.k1 * _phi + params.l1 * _s
    _arg2 = params.k2 * _phi + params.l2 * _s
    _g = params.a1 * math.cos(_arg1) + params.a2 * math.cos(_arg2)
    _sign = params.pendulum_sign
    _dq = _sign * _p
    _dp = (_sign + params.eps * _g) * math.sin(_q)
    _forcing = params.k1 * params.a1 * math.sin(_arg1) + params.k2 * params.a2 * math.sin(_arg2)
    _dI = params.eps * math.cos(_q) * _forcing
    return np.array([_dq, _dp, _action, _dI, 1.0])


def hamiltonian_energy(state: Sequence[float], params: SystemParams) -> float:
    """Value of the full Hamiltonian at (q, p, phi, I, s)."""
    _q, _p, _phi, _action, _s = state
    _g = params.a1 * math.cos(params.k1 * _phi + params.l1 * _s) + params.a2 * math.cos(
        params.k2 * _phi + params.l2 * _s
    )
    return (
        params.pendulum_sign * (0.5 * _p * _p + math.cos(_q) - 1.0)
        + 0.5 * _action * _action
        + params.eps * math.cos(_q) * _g
    )
