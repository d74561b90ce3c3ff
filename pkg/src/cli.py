"""
Command-line front end: ``python -m src.cli <command> [flags]``.

Every command computes its rows first and then writes them through a single sink, so a failing run never
leaves a half-written file behind.
"""

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from functools import partial
from pathlib import Path
from typing import Any, Callable, List, Optional

import numpy as np
from dotenv import dotenv_values
from loguru import logger
from pydantic import ValidationError

from src.crest_helper import classify, crest_residual, find_thresholds, has_tangency, sample_crest
from src.diffusion_helper import build_pseudo_orbit, verify_pseudo_orbit
from src.DTOs.inner import InnerState
from src.DTOs.pseudo_orbit import VerificationReport
from src.DTOs.run_config import RunConfig
from src.DTOs.scattering import CriterionKind, TauCriterion
from src.DTOs.system_params import SystemParams
from src.errors import ArnoldDiffusionError, ConfigurationError
from src.inner_helper import strobe_chunks, torus_model
from src.output_helper import RowSink
from src.scattering_helper import atlas_region, gradient_from_solution, level_from_solution, solve_tau_star
from src.settings import ENV_PREFIX, Tolerances, apply_overrides, get_log_level, get_tolerances
from src.verification_helper import run_oracle_suite

TWO_PI = 2.0 * math.pi

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERIFICATION = 4

# run settings accepted as flags, config-file keys and ARNOLD_<KEY> environment variables
_PARAM_KEYS = ("a1", "a2", "k1", "k2", "l1", "l2", "eps")
_RUN_KEYS = {
    "i_min": "I_min",
    "i_max": "I_max",
    "grid_n": "grid_n",
    "angles_n": "angles_n",
    "i_start": "I_start",
    "i_end": "I_end",
    "t_final": "t_final",
    "format": "format",
    "out": "out",
    "threads": "threads",
    "inject": "inject",
}
_SETTING_KEYS = (*_PARAM_KEYS, "mu", "r", "criterion", *_RUN_KEYS)

Rows = List[dict[str, Any]]


# ------------------------------------------------------------------------------
# argument parsing and configuration layering
# ------------------------------------------------------------------------------
def _common_flags() -> argparse.ArgumentParser:
    _common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    _system = _common.add_argument_group("system")
    for _name in ("a1", "a2", "eps"):
        _system.add_argument(f"--{_name}", type=float)
    for _name in ("k1", "k2", "l1", "l2"):
        _system.add_argument(f"--{_name}", type=int)
    _system.add_argument("--mu", type=float, help="a1/a2 of the reduced system (sets k1, k2, l1, l2 from --r)")
    _system.add_argument("--r", type=str, help="harmonic ratio k2/k1 in (0, 1], e.g. 1 or 1/2")
    _grid = _common.add_argument_group("grids")
    _grid.add_argument("--I-min", dest="i_min", type=float)
    _grid.add_argument("--I-max", dest="i_max", type=float)
    _grid.add_argument("--grid-n", dest="grid_n", type=int)
    _grid.add_argument("--angles-n", dest="angles_n", type=int, help="start angles per action (inner-portrait)")
    _grid.add_argument("--I-start", dest="i_start", type=float)
    _grid.add_argument("--I-end", dest="i_end", type=float)
    _grid.add_argument("--t-final", dest="t_final", type=float)
    _grid.add_argument("--criterion", help="down, up, minabs or branch=k")
    _run = _common.add_argument_group("run")
    _run.add_argument("--format", choices=["csv", "jsonl"])
    _run.add_argument("--out", help="output file (stdout if omitted)")
    _run.add_argument("--threads", type=int, help="worker processes for grid sweeps (default: all cores)")
    _run.add_argument("--tol-override", dest="tol_override", action="append", metavar="KEY=VAL")
    _run.add_argument("--config", help="key-value file with run settings and tolerances")
    _run.add_argument("--log-level", dest="log_level")
    _run.add_argument("--inject", help="deliberate fault for verify (a2-sign-flip)")
    return _common


def build_parser() -> argparse.ArgumentParser:
    _parser = argparse.ArgumentParser(
        prog="arnold-diffusion",
        description="Crest thresholds, scattering maps and diffusion pseudo-orbits of the pendulum-rotor system.",
    )
    _common = _common_flags()
    _commands = _parser.add_subparsers(dest="command", required=True)
    for _name, _help in (
        ("thresholds", "threshold table and labelled intervals of the crest classification"),
        ("crests", "sampled crest branches on an action grid"),
        ("portrait", "reduced Poincare function and drift sign on a (theta, I) grid"),
        ("tau-field", "tau*, branch and degeneracy on a (theta, I) grid"),
        ("inner-portrait", "stroboscopic orbits of the inner flow"),
        ("diffuse", "build and verify a pseudo-orbit from --I-start to --I-end"),
        ("verify", "oracle suite (quadrature, ray scan, symmetry, drift sign)"),
    ):
        _commands.add_parser(_name, help=_help, parents=[_common], argument_default=argparse.SUPPRESS)
    return _parser


def _normalize(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def _layered_settings(args: argparse.Namespace) -> tuple[dict[str, Any], dict[str, str]]:
    """
    Run settings with flags > config file > ARNOLD_* environment, and the tolerance overrides of the config file.

    :raises ConfigurationError: for a missing config file or an unknown key in it
    """
    _values: dict[str, Any] = {}
    for _key in _SETTING_KEYS:
        _env = os.getenv(f"{ENV_PREFIX}{_key.upper()}")
        if _env is not None:
            _values[_key] = _env

    _tol_overrides: dict[str, str] = {}
    _config_path = getattr(args, "config", None)
    if _config_path:
        if not Path(_config_path).is_file():
            raise ConfigurationError(f"Config file not found: {_config_path}")
        for _raw_key, _value in dotenv_values(_config_path).items():
            _key = _normalize(_raw_key)
            if _value is None:
                raise ConfigurationError(f"Config key '{_raw_key}' has no value", file=_config_path)
            if _key in Tolerances.model_fields:
                _tol_overrides[_key] = _value
            elif _key in _SETTING_KEYS:
                _values[_key] = _value
            else:
                raise ConfigurationError(f"Unknown config key '{_raw_key}'", file=_config_path)

    for _key in _SETTING_KEYS:
        if hasattr(args, _key):
            _values[_key] = getattr(args, _key)
    return _values, _tol_overrides


def _parse_overrides(items: List[str]) -> dict[str, str]:
    _overrides: dict[str, str] = {}
    for _item in items:
        _key, _sep, _value = _item.partition("=")
        if not _sep or not _key.strip():
            raise ConfigurationError(f"--tol-override expects KEY=VAL, got '{_item}'")
        _overrides[_normalize(_key)] = _value.strip()
    return _overrides


def system_params_from(values: dict[str, Any]) -> SystemParams:
    """
    Builds the system from flat settings. ``mu``/``r`` describe the reduced system directly:
    r = k2/k1 as a reduced fraction, l1 = 0, l2 = -1, a1 = mu * a2, and eps is the reduced perturbation size.

    :raises ConfigurationError: for a malformed or out-of-range r
    """
    _fields: dict[str, Any] = {key: values[key] for key in _PARAM_KEYS if key in values}
    if "mu" not in values and "r" not in values:
        return SystemParams(**_fields)
    try:
        _ratio = Fraction(str(values.get("r", "1"))).limit_denominator(1000)
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigurationError(f"Invalid harmonic ratio r={values.get('r')}") from e
    if not 0 < _ratio <= 1:
        raise ConfigurationError("the harmonic ratio r must lie in (0, 1]", r=str(_ratio))
    _a2 = float(_fields.get("a2", SystemParams.model_fields["a2"].default))
    _eps = float(_fields.get("eps", SystemParams.model_fields["eps"].default))
    _fields.update(k1=_ratio.denominator, k2=_ratio.numerator, l1=0, l2=-1, a2=_a2, eps=_eps / _ratio.denominator**2)
    if "mu" in values:
        _fields["a1"] = float(values["mu"]) * _a2
    return SystemParams(**_fields)


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """
    :raises ConfigurationError: for invalid settings, criteria or tolerance overrides
    :raises ValidationError: if a value does not fit its RunConfig / SystemParams field
    """
    _values, _tol_overrides = _layered_settings(args)
    _tol_overrides.update(_parse_overrides(getattr(args, "tol_override", None) or []))
    _tol = get_tolerances()
    if _tol_overrides:
        _tol = apply_overrides(_tol, _tol_overrides)
        logger.info(f"Tolerance overrides: {_tol_overrides}")
    _run_fields = {_RUN_KEYS[key]: value for key, value in _values.items() if key in _RUN_KEYS}
    return RunConfig(
        command=args.command,
        params=system_params_from(_values),
        tol=_tol,
        criterion=TauCriterion.parse(str(_values.get("criterion", "minabs"))),
        **_run_fields,
    )


def _configure_logging(level: str) -> None:
    logger.remove()
    logger.add(sys.stderr, level=level.upper())


# ------------------------------------------------------------------------------
# grid sweeps
# ------------------------------------------------------------------------------
def action_grid(config: RunConfig) -> List[float]:
    return [float(x) for x in np.linspace(config.I_min, config.I_max, config.grid_n)]


def angle_grid(n: int) -> List[float]:
    return [float(x) for x in np.linspace(0.0, TWO_PI, n, endpoint=False)]


def sweep(worker: Callable[[float, RunConfig], Rows], config: RunConfig) -> Rows:
    """
    Runs ``worker`` for every action of the grid, in worker processes if ``config.threads > 1``.
    The rows keep the order of the grid.
    """
    _actions = action_grid(config)
    _task = partial(worker, config=config)
    if config.threads == 1:
        _chunks = map(_task, _actions)
        return [row for chunk in _chunks for row in chunk]
    logger.info(f"Sweeping {len(_actions)} actions on {config.threads} workers")
    with ProcessPoolExecutor(max_workers=config.threads) as _pool:
        _chunks = _pool.map(_task, _actions, chunksize=max(1, len(_actions) // (4 * config.threads)))
        return [row for chunk in _chunks for row in chunk]


def crest_rows(I: float, config: RunConfig) -> Rows:
    _rows: Rows = []
    _kind = classify(I, config.params, config.tol)
    for _k in (0, 1):
        for _point in sample_crest(I, _k, config.params, n=config.grid_n, tol=config.tol):
            _rows.append(
                {
                    "I": I,
                    "branch": _k,
                    "kind": _kind.value,
                    "phi": _point.phi,
                    "sigma": _point.sigma,
                    "residual": crest_residual(I, _point.phi, _point.sigma, config.params, config.tol),
                }
            )
    return _rows


def portrait_rows(I: float, config: RunConfig) -> Rows:
    _rows: Rows = []
    _tangency = has_tangency(I, config.params, config.tol)
    _eps = config.params.reduced().eps
    for _theta in angle_grid(config.grid_n):
        _row = {
            "theta": _theta,
            "I": I,
            "level": math.nan,
            "d_theta": math.nan,
            "action_sign": 0,
            "region": "",
            "degenerate": False,
            "tangency": _tangency,
            "status": "ok",
        }
        try:
            _solution = solve_tau_star(I, _theta, config.criterion, config.params, config.tol)
            _d_theta = gradient_from_solution(_solution, config.params, config.tol)[1]
            _row.update(
                level=level_from_solution(_solution, config.params, config.tol),
                d_theta=_d_theta,
                action_sign=int(np.sign(_eps * _d_theta)),
                degenerate=_solution.degenerate,
            )
            if config.criterion.kind == CriterionKind.MINIMAL_ABS:
                _row["region"] = atlas_region(_solution, config.tol).value
        except ArnoldDiffusionError as e:
            logger.debug(f"portrait cell ({_theta}, {I}) skipped: {e}")
            _row["status"] = type(e).__name__
        _rows.append(_row)
    return _rows


def tau_field_rows(I: float, config: RunConfig) -> Rows:
    _rows: Rows = []
    for _theta in angle_grid(config.grid_n):
        _row = {
            "theta": _theta,
            "I": I,
            "tau_star": math.nan,
            "branch": None,
            "kind": "",
            "transversality": math.nan,
            "degenerate": False,
            "tie": False,
            "status": "ok",
        }
        try:
            _solution = solve_tau_star(I, _theta, config.criterion, config.params, config.tol)
            _row.update(
                tau_star=_solution.tau_star,
                branch=_solution.branch_hit.k,
                kind=_solution.branch_hit.kind.value,
                transversality=_solution.transversality,
                degenerate=_solution.degenerate,
                tie=_solution.tie,
            )
        except ArnoldDiffusionError as e:
            logger.debug(f"tau-field cell ({_theta}, {I}) skipped: {e}")
            _row["status"] = type(e).__name__
        _rows.append(_row)
    return _rows


def inner_portrait_rows(I: float, config: RunConfig) -> Rows:
    _rows: Rows = []
    _periods = max(1, int(config.t_final // TWO_PI))
    for _phi in angle_grid(config.angles_n):
        _start = InnerState(I=I, phi=_phi, s=0.0)
        for _n, _sample in enumerate(strobe_chunks(_start, _periods, config.params, config.tol), start=1):
            _torus = torus_model(_sample.state, config.params, config.tol)
            _rows.append(
                {
                    "I0": I,
                    "phi0": _phi,
                    "n": _n,
                    "t": _sample.t,
                    "I": _sample.state.I,
                    "phi": _sample.state.phi % TWO_PI,
                    "region": _torus.region.value,
                    "torus": _torus.value,
                }
            )
    return _rows


# ------------------------------------------------------------------------------
# commands
# ------------------------------------------------------------------------------
def _check_rows(report: VerificationReport) -> Rows:
    return [
        {"record": "check", "name": check.name, "passed": check.passed, "value": check.value, "detail": check.detail}
        for check in report.checks
    ]


def cmd_thresholds(config: RunConfig) -> tuple[Rows, bool]:
    _report = find_thresholds(config.params, config.tol)

    def _row(record: str, **values: Any) -> dict[str, Any]:
        _base = {"record": record, "name": "", "value": None, "lower": None, "upper": None, "kind": ""}
        return {**_base, "tangency": None, "reason": "", **values}

    _rows: Rows = [_row("alpha", value=x) for x in _report.alpha_thresholds]
    _rows += [_row("beta", value=x) for x in _report.beta_thresholds]
    _rows += [_row("label", name=name, value=value) for name, value in _report.labels.items()]
    _rows += [
        _row("interval", lower=i.lower, upper=i.upper, kind=i.kind.value, tangency=i.tangency)
        for i in _report.intervals
    ]
    _rows += [_row("missing", name=m.name, value=m.asymptote, kind=m.family, reason=m.reason) for m in _report.missing]
    return _rows, True


def cmd_crests(config: RunConfig) -> tuple[Rows, bool]:
    return sweep(crest_rows, config), True


def cmd_portrait(config: RunConfig) -> tuple[Rows, bool]:
    return sweep(portrait_rows, config), True


def cmd_tau_field(config: RunConfig) -> tuple[Rows, bool]:
    return sweep(tau_field_rows, config), True


def cmd_inner_portrait(config: RunConfig) -> tuple[Rows, bool]:
    return sweep(inner_portrait_rows, config), True


def cmd_diffuse(config: RunConfig) -> tuple[Rows, bool]:
    _orbit = build_pseudo_orbit(config.I_start, config.I_end, config.params, config.tol)
    _report = verify_pseudo_orbit(_orbit, config.params, config.tol)
    _rows: Rows = []
    for _index, _leg in enumerate(_orbit.legs):
        _row = {"record": "leg", "name": _leg.kind, "passed": None, "value": None, "detail": "", "index": _index}
        if _leg.kind == "scatter":
            _row.update(
                I_before=_leg.before.I,
                theta_before=_leg.before.theta,
                I_after=_leg.after.I,
                theta_after=_leg.after.theta,
                tau_star=_leg.tau_star,
                residual=_leg.level_residual,
                duration=None,
                region="",
            )
        else:
            _row.update(
                I_before=_leg.start.I,
                theta_before=_leg.start.phi % TWO_PI,
                I_after=_leg.end.I,
                theta_after=_leg.end.phi % TWO_PI,
                tau_star=None,
                residual=_leg.torus_drift,
                duration=_leg.duration,
                region=_leg.region.value,
            )
        _rows.append(_row)
    _empty_leg = dict.fromkeys(
        ("index", "I_before", "theta_before", "I_after", "theta_after", "tau_star", "residual", "duration", "region")
    )
    _rows += [{**row, **_empty_leg, "region": ""} for row in _check_rows(_report)]
    return _rows, _report.passed


def cmd_verify(config: RunConfig) -> tuple[Rows, bool]:
    _report = run_oracle_suite(config.params, config.tol, inject=config.inject)
    return _check_rows(_report), _report.passed


COMMANDS: dict[str, Callable[[RunConfig], tuple[Rows, bool]]] = {
    "thresholds": cmd_thresholds,
    "crests": cmd_crests,
    "portrait": cmd_portrait,
    "tau-field": cmd_tau_field,
    "inner-portrait": cmd_inner_portrait,
    "diffuse": cmd_diffuse,
    "verify": cmd_verify,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Runs one command and returns its exit code (0 ok, 2 config error, 3 solver error, 4 verification failure)."""
    _args = build_parser().parse_args(argv)
    _configure_logging(getattr(_args, "log_level", None) or get_log_level())
    try:
        _config = build_run_config(_args)
        logger.info(f"Running '{_config.command}' for {_config.params.model_dump()}, criterion {_config.criterion}")
        _rows, _passed = COMMANDS[_config.command](_config)
        with RowSink(_config) as _sink:
            _sink.write_all(_rows)
    except (ConfigurationError, ValidationError) as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG
    except ArnoldDiffusionError as e:
        logger.error(f"Solver failure: {e}")
        return EXIT_SOLVER
    if not _passed:
        logger.error(f"'{_config.command}' finished with failed verification checks")
        return EXIT_VERIFICATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
