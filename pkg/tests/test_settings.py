import pytest

from src.errors import ConfigurationError
from src.settings import Tolerances, apply_overrides, get_log_level, load_tolerances


def test_defaults() -> None:
    _tol = Tolerances()
    assert _tol.tol_root == 1e-12
    assert _tol.delta_sing == 1e-4
    assert (_tol.i_min, _tol.i_max) == (-5.0, 5.0)


def test_environment_overrides(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("ARNOLD_TOL_ROOT", "1e-13")
    monkeypatch.setenv("ARNOLD_MAX_LEGS", "50")
    _tol = load_tolerances()
    assert _tol.tol_root == 1e-13
    assert _tol.max_legs == 50


def test_invalid_environment_value(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("ARNOLD_TOL_ROOT", "tiny")
    with pytest.raises(ConfigurationError):
        load_tolerances()


def test_apply_overrides_returns_a_copy() -> None:
    _tol = Tolerances()
    _changed = apply_overrides(_tol, {"tol_ode": "1e-12"})
    assert _changed.tol_ode == 1e-12
    assert _tol.tol_ode == 1e-10


@pytest.mark.parametrize("overrides", [{"tol_rot": "1e-3"}, {"tol_root": "-1"}, {"delta_sing": "0.5"}])
def test_apply_overrides_rejects_bad_input(overrides: dict[str, str]) -> None:
    with pytest.raises(ConfigurationError):
        apply_overrides(Tolerances(), overrides)


def test_tolerances_are_frozen() -> None:
    with pytest.raises(Exception):
        Tolerances().tol_root = 1.0


def test_log_level(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv("ARNOLD_LOG_LEVEL", raising=False)
    assert get_log_level() == "INFO"
    monkeypatch.setenv("ARNOLD_LOG_LEVEL", "DEBUG")
    assert get_log_level() == "DEBUG"
