import math
from typing import List, Optional

import numpy as np
from loguru import logger
from scipy.optimize import brentq

from src.DTOs.crest import (
    ClassificationReport,
    CrestBranch,
    CrestKind,
    CrestPoint,
    MissingThreshold,
    TangencyPoint,
    ThresholdInterval,
)
from src.DTOs.system_params import ReducedSystem
from src.errors import ConfigurationError, NoSolutionInWindow, OutOfDomain, PoleAtOne
from src.model_helper import Params, alpha_r, alpha_r_inverse, as_reduced, beta_r, resolve_tolerances
from src.settings import Tolerances

TWO_PI = 2.0 * math.pi

# samples per component used to bracket the threshold roots
_BRACKET_SAMPLES = 4000


def _mu(system: ReducedSystem) -> float:
    if system.a1 == 0:
        raise ConfigurationError("mu = 0: the crests degenerate to the lines sigma = k*pi", a1=system.a1)
    return system.mu


def crest_coefficient(I: float, params: Params, tol: Optional[Tolerances] = None) -> float:
    """
    ``m(I) = mu * alpha_r(I)``, the coefficient of the crest equation ``m sin(phi) + sin(sigma) = 0``.

    :raises PoleAtOne: at the pole I = 1/r
    """
    _sys = as_reduced(params)
    return _mu(_sys) * alpha_r(I, _sys.r, tol)


def crest_inverse_coefficient(I: float, params: Params, tol: Optional[Tolerances] = None) -> float:
    """``1/m(I)``, used by the vertical parameterization; zero at the pole I = 1/r."""
    _sys = as_reduced(params)
    return alpha_r_inverse(I, _sys.r, tol) / _mu(_sys)


def classify(I: float, params: Params, tol: Optional[Tolerances] = None) -> CrestKind:
    """
    Kind of the crests at action ``I``: horizontal for |m| < 1, vertical for |m| > 1, singular within tol_cls of 1.

    At the pole I = 1/r the crests are the vertical lines phi = k*pi.
    """
    _tolerances = resolve_tolerances(tol)
    try:
        _m = abs(crest_coefficient(I, params, _tolerances))
    except PoleAtOne:
        return CrestKind.VERTICAL
    if abs(_m - 1.0) <= _tolerances.tol_cls:
        return CrestKind.SINGULAR
    return CrestKind.HORIZONTAL if _m < 1.0 else CrestKind.VERTICAL


def crest_sigma(I: float, phi: float, k: int, params: Params, tol: Optional[Tolerances] = None) -> float:
    """
    Horizontal parameterization ``sigma = xi_k(I, phi)`` of branch ``k`` (unwrapped).

    :raises OutOfDomain: if |m sin(phi)| > 1, i.e. the branch is not a graph over this phi
    """
    try:
        _m = crest_coefficient(I, params, tol)
    except PoleAtOne as pe:
        raise OutOfDomain("no horizontal crest at the pole", I=I, phi=phi) from pe
    _v = _m * math.sin(phi)
    if abs(_v) > 1.0:
        raise OutOfDomain("horizontal parameterization does not cover this angle", I=I, phi=phi, value=_v)
    _arc = math.asin(_v)
    return (-_arc if k % 2 == 0 else _arc) + k * math.pi


def crest_phi(I: float, sigma: float, k: int, params: Params, tol: Optional[Tolerances] = None) -> float:
    """
    Vertical parameterization ``phi = eta_k(I, sigma)`` of branch ``k`` (unwrapped).

    :raises OutOfDomain: if |sin(sigma) / m| > 1
    """
    _inverse = crest_inverse_coefficient(I, params, tol)
    _v = math.sin(sigma) * _inverse
    if abs(_v) > 1.0:
        raise OutOfDomain("vertical parameterization does not cover this angle", I=I, sigma=sigma, value=_v)
    _arc = math.asin(_v)
    return (-_arc if k % 2 == 0 else _arc) + k * math.pi


def crest_slope(I: float, angle: float, k: int, kind: CrestKind, params: Params, tol: Optional[Tolerances] = None):
    """
    Slope of branch ``k`` at ``angle``: d sigma/d phi for horizontal crests, d phi/d sigma for vertical ones.
    """
    _sign = -1.0 if k % 2 == 0 else 1.0
    if kind == CrestKind.VERTICAL:
        _c = crest_inverse_coefficient(I, params, tol)
    else:
        _c = crest_coefficient(I, params, tol)
    _v = _c * math.sin(angle)
    return _sign * _c * math.cos(angle) / math.sqrt(max(1.0 - _v * _v, 0.0))


def nhim_slope(I: float, kind: CrestKind, params: Params) -> float:
    """Slope of the NHIM lines in the same parameterization as :func:`crest_slope`."""
    _sys = as_reduced(params)
    _w = _sys.r * I - 1.0
    if kind == CrestKind.VERTICAL:
        return I / _w
    return _w / I


def crest_residual(I: float, phi: float, sigma: float, params: Params, tol: Optional[Tolerances] = None) -> float:
    """``m sin(phi) + sin(sigma)`` (or ``sin(phi) + sin(sigma)/m`` for vertical crests)."""
    if classify(I, params, tol) == CrestKind.VERTICAL:
        return math.sin(phi) + math.sin(sigma) * crest_inverse_coefficient(I, params, tol)
    return crest_coefficient(I, params, tol) * math.sin(phi) + math.sin(sigma)


def sample_crest(
    I: float, k: int, params: Params, n: int = 256, tol: Optional[Tolerances] = None
) -> List[CrestPoint]:
    """
    Samples branch ``k`` over one period of its parameter angle.

    Singular crests are sampled with the horizontal formula, clipped to the arcsin domain.
    """
    _kind = classify(I, params, tol)
    _branch = CrestBranch(k=k, kind=_kind, I=I)
    _points: List[CrestPoint] = []
    _sign = -1.0 if k % 2 == 0 else 1.0
    for _angle in np.linspace(0.0, TWO_PI, n):
        _angle = float(_angle)
        if _kind == CrestKind.VERTICAL:
            _phi = crest_phi(I, _angle, k, params, tol)
            _points.append(CrestPoint(I=I, phi=_phi, sigma=_angle, branch=_branch))
        else:
            _v = min(max(crest_coefficient(I, params, tol) * math.sin(_angle), -1.0), 1.0)
            _sigma = _sign * math.asin(_v) + k * math.pi
            _points.append(CrestPoint(I=I, phi=_angle, sigma=_sigma, branch=_branch))
    return _points


def _threshold_values(I: float, params: Params, tol: Tolerances) -> tuple[float, float]:
    _sys = as_reduced(params)
    return abs(alpha_r(I, _sys.r, tol)), abs(beta_r(I, _sys.r, tol))


def has_tangency(I: float, params: Params, tol: Optional[Tolerances] = None) -> bool:
    """
    True iff the NHIM lines are tangent to the crests somewhere at action ``I``:
    ``(|alpha_r| - 1/|mu|) (|beta_r| - 1/|mu|) < 0``.
    """
    _tolerances = resolve_tolerances(tol)
    _sys = as_reduced(params)
    _c = 1.0 / abs(_mu(_sys))
    try:
        _a, _b = _threshold_values(I, _sys, _tolerances)
    except PoleAtOne:
        return False
    return (_a - _c) * (_b - _c) < 0


def tangency_points(I: float, params: Params, tol: Optional[Tolerances] = None) -> List[TangencyPoint]:
    """
    Points where a crest branch (k = 0 for C_M, k = 1 for C_m) is tangent to the NHIM lines at action ``I``.

    Horizontal crests: tan(phi) = ±sqrt((beta^2 - c^2)/(c^2 - alpha^2)).
    Vertical crests: tan(sigma) = ±|q| sqrt((c^2 - beta^2)/(alpha^2 - c^2)) with q = (rI - 1)/I.
    """
    _tolerances = resolve_tolerances(tol)
    _sys = as_reduced(params)
    if not has_tangency(I, _sys, _tolerances):
        return []
    _kind = classify(I, _sys, _tolerances)
    _c2 = 1.0 / _sys.mu**2
    _a, _b = _threshold_values(I, _sys, _tolerances)
    if _kind == CrestKind.HORIZONTAL:
        _base = math.atan(math.sqrt((_b * _b - _c2) / (_c2 - _a * _a)))
    else:
        _q = abs((_sys.r * I - 1.0) / I)
        _base = math.atan(_q * math.sqrt((_c2 - _b * _b) / (_a * _a - _c2)))
    _target = nhim_slope(I, _kind, _sys)
    _points: List[TangencyPoint] = []
    for _k in (0, 1):
        for _angle in (_base, math.pi - _base, math.pi + _base, TWO_PI - _base):
            _slope = crest_slope(I, _angle, _k, _kind, _sys, _tolerances)
            if abs(_slope - _target) <= 1e-6 * max(1.0, abs(_target)):
                _points.append(
                    TangencyPoint(I=I, angle=_angle % TWO_PI, branch=CrestBranch(k=_k, kind=_kind, I=I), slope=_slope)
                )
    return _points


def _components(system: ReducedSystem, tol: Tolerances) -> List[tuple[str, float, float]]:
    _pole = 1.0 / system.r
    _components = [("negative", tol.i_min, 0.0)]
    _gap = 2 * tol.delta_sing
    if _pole - _gap < tol.i_max:
        _components.append(("middle", 0.0, _pole - _gap))
        _components.append(("right", _pole + _gap, tol.i_max))
    else:
        _components.append(("middle", 0.0, tol.i_max))
    return [(name, lower, upper) for name, lower, upper in _components if lower < upper]


def _guarded(func, x: float) -> float:
    try:
        return func(x)
    except PoleAtOne:
        return math.nan


def _roots_on(func, lower: float, upper: float, xtol: float) -> List[float]:
    """All sign changes of ``func`` on a uniform grid of [lower, upper], refined with brentq."""
    _grid = np.linspace(lower, upper, _BRACKET_SAMPLES)
    _values = np.array([_guarded(func, float(x)) for x in _grid])
    _roots: List[float] = []
    for _i in range(len(_grid) - 1):
        if _values[_i] == 0.0:
            _roots.append(float(_grid[_i]))
        elif _values[_i] * _values[_i + 1] < 0:
            _roots.append(brentq(func, float(_grid[_i]), float(_grid[_i + 1]), xtol=xtol))
    return _roots


def _asymptote(component: str, system: ReducedSystem) -> Optional[float]:
    if system.r != 1.0:
        return 0.0 if component != "middle" else None
    if component == "negative":
        return math.exp(math.pi / 2)
    if component == "right":
        return math.exp(-math.pi / 2)
    return None


def find_thresholds(params: Params, tol: Optional[Tolerances] = None) -> ClassificationReport:
    """
    Finds every action in [i_min, i_max] where |alpha_r| = 1/|mu| (crest kind changes) or |beta_r| = 1/|mu|
    (tangencies appear or disappear), and labels the intervals between them.

    Thresholds that do not exist for this mu or lie outside the window are listed in ``missing``.

    :raises ConfigurationError: for mu = 0
    """
    _tolerances = resolve_tolerances(tol)
    _sys = as_reduced(params)
    _c = 1.0 / abs(_mu(_sys))
    _window = (_tolerances.i_min, _tolerances.i_max)
    logger.debug(f"Searching crest thresholds for mu={_sys.mu}, r={_sys.r} on {_window}")

    _found: dict[tuple[str, str], List[float]] = {}
    _missing: List[MissingThreshold] = []
    for _family, _func in (("alpha", alpha_r), ("beta", beta_r)):
        for _component, _lower, _upper in _components(_sys, _tolerances):
            _roots = _roots_on(
                lambda x, f=_func: abs(f(x, _sys.r, _tolerances)) - _c, _lower, _upper, _tolerances.tol_threshold
            )
            _found[(_family, _component)] = _roots
            if not _roots:
                _limit = _asymptote(_component, _sys)
                if _limit is not None and _c >= _limit:
                    _reason = f"1/|mu| = {_c:.6g} is not below the limit {_limit:.6g} of |{_family}|"
                else:
                    _reason = f"no crossing inside the window [{_lower:.6g}, {_upper:.6g}]"
                _missing.append(
                    MissingThreshold(name=f"{_family}-{_component}", family=_family, reason=_reason, asymptote=_limit)
                )

    _alpha = sorted(x for (family, _), roots in _found.items() if family == "alpha" for x in roots)
    _beta = sorted(x for (family, _), roots in _found.items() if family == "beta" for x in roots)
    _labels = _label_thresholds(_found) if _sys.r == 1.0 else {}

    _edges = sorted({_tolerances.i_min, _tolerances.i_max, *_alpha, *_beta})
    _intervals: List[ThresholdInterval] = []
    for _lower, _upper in zip(_edges[:-1], _edges[1:]):
        _sample = _interval_sample(_lower, _upper, _sys, _tolerances)
        _a, _b = _threshold_values(_sample, _sys, _tolerances)
        _intervals.append(
            ThresholdInterval(
                lower=_lower,
                upper=_upper,
                kind=CrestKind.VERTICAL if _a > _c else CrestKind.HORIZONTAL,
                tangency=(_a - _c) * (_b - _c) < 0,
            )
        )
    logger.info(f"Crest thresholds for mu={_sys.mu}: alpha={_alpha}, beta={_beta}")
    return ClassificationReport(
        mu=_sys.mu,
        r=_sys.r,
        window=(_tolerances.i_min, _tolerances.i_max),
        alpha_thresholds=_alpha,
        beta_thresholds=_beta,
        labels=_labels,
        intervals=_intervals,
        missing=_missing,
    )


def _interval_sample(lower: float, upper: float, system: ReducedSystem, tol: Tolerances) -> float:
    _mid = 0.5 * (lower + upper)
    _pole = 1.0 / system.r
    if abs(system.r * _mid - 1.0) < 10 * tol.delta_sing or _mid == 0.0:
        return lower + 0.25 * (upper - lower)
    if lower < _pole < upper:
        # stay on one side of the pole, both sides are vertical
        return 0.5 * (lower + _pole)
    return _mid


def _label_thresholds(found: dict[tuple[str, str], List[float]]) -> dict[str, float]:
    """
    Names the thresholds the way the classification of the r = 1 case does:
    I_b < I_a on the negative side, I_c <= I_C in (0, 1), I_A < I_B beyond 1.
    """
    _labels: dict[str, float] = {}

    def _first(family: str, component: str) -> Optional[float]:
        _roots = found.get((family, component), [])
        return _roots[0] if _roots else None

    for _name, _family, _component in (
        ("I_b", "beta", "negative"),
        ("I_a", "alpha", "negative"),
        ("I_A", "alpha", "right"),
        ("I_B", "beta", "right"),
    ):
        _value = _first(_family, _component)
        if _value is not None:
            _labels[_name] = _value
    _middle = sorted(x for x in (_first("alpha", "middle"), _first("beta", "middle")) if x is not None)
    if len(_middle) == 2:
        _labels["I_c"], _labels["I_C"] = _middle
    elif len(_middle) == 1:
        _labels["I_c"] = _middle[0]
    return _labels


def require_threshold(report: ClassificationReport, name: str) -> float:
    """
    Returns the labelled threshold ``name`` (e.g. ``"I_a"``).

    :raises NoSolutionInWindow: if it does not exist for this mu or lies outside the window
    """
    if name in report.labels:
        return report.labels[name]
    _reason = next((m.reason for m in report.missing), "not found")
    raise NoSolutionInWindow(f"threshold {name} does not exist", mu=report.mu, reason=_reason)
