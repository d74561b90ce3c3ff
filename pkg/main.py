from datetime import datetime
from typing import Callable, TypeVar

from dotenv import load_dotenv
from fastapi import FastAPI, HTTPException
from loguru import logger

from src.crest_helper import find_thresholds
from src.diffusion_helper import build_pseudo_orbit, transversality_report, verify_pseudo_orbit
from src.DTOs.crest import ClassificationReport
from src.DTOs.diffusion_response import DiffusionResponse, RunMetadata
from src.DTOs.ping import Ping
from src.DTOs.pseudo_orbit import TransversalityReport
from src.DTOs.requests import (
    BracketRequest,
    DiffusionRequest,
    ScatteringStepRequest,
    SystemRequest,
    TauStarRequest,
    ThresholdRequest,
)
from src.DTOs.scattering import ScatteringState, ScatteringStepResult, TauSolution
from src.errors import ArnoldDiffusionError, ConfigurationError
from src.output_helper import SCHEMA_VERSION
from src.scattering_helper import scattering_step_detail, solve_tau_star
from src.settings import Tolerances, apply_overrides, get_tolerances

load_dotenv()

API_VERSION = "0.1.1"

T = TypeVar("T")

# ------------------------------------------------------------------------------
# FastAPI App
# ------------------------------------------------------------------------------
app = FastAPI(
    title="Arnold Diffusion Scattering API",
    description="""
    ## Arnold Diffusion Scattering API

    Numerical building blocks of the diffusion mechanism of the pendulum-rotor Hamiltonian
    ``H = ±(p²/2 + cos q - 1) + I²/2 + eps cos q (a1 cos(k1 phi + l1 s) + a2 cos(k2 phi + l2 s))``.

    ### Endpoints

    - **Thresholds**: actions at which the crests change from horizontal to vertical and tangencies appear
    - **tau\\***: crossing of a NHIM line with the crest selected by a criterion (down, up, minabs, branch=k)
    - **Scattering step**: first-order scattering map with the reduced Poincare function before and after
    - **Poisson bracket**: transversality of the scattering map to the inner tori
    - **Diffuse**: pseudo-orbit from ``I_start`` to ``I_end`` with an independent verification report

    ### Tolerances

    Every request may override single tolerance fields through ``tol_overrides``; the defaults come from
    ``ARNOLD_*`` environment variables (or a ``.env`` file).
    """,
    version=API_VERSION,
)


def _tolerances(request: SystemRequest) -> Tolerances:
    if not request.tol_overrides:
        return get_tolerances()
    return apply_overrides(get_tolerances(), {key: str(value) for key, value in request.tol_overrides.items()})


def _run(label: str, call: Callable[[], T]) -> T:
    """Maps library errors to HTTP errors: configuration problems -> 422, solver failures -> 500."""
    try:
        return call()
    except ConfigurationError as ce:
        logger.error(f"{label}: invalid configuration: {ce}")
        raise HTTPException(status_code=422, detail=str(ce))
    except ArnoldDiffusionError as ae:
        logger.error(f"{label}: solver failure ({type(ae).__name__}): {ae}")
        raise HTTPException(status_code=500, detail=f"{type(ae).__name__}: {ae}")


@app.post(
    "/thresholds",
    response_model=ClassificationReport,
    summary="Crest thresholds",
    description="""
    Finds the actions where |mu alpha_r(I)| = 1 (the crests switch between horizontal and vertical) and
    |mu beta_r(I)| = 1 (NHIM lines become tangent to the crests), labels them and lists the intervals in between.
    Thresholds that do not exist for the given mu are reported under ``missing``.
    """,
    responses={
        422: {
            "description": "Invalid system (e.g. a1 = 0)",
            "content": {
                "application/json": {
                    "example": {"detail": "mu = 0: the crests degenerate to the lines sigma = k*pi (a1=0.0)"}
                }
            },
        },
    },
    tags=["crests"],
)
def thresholds_endpoint(request: ThresholdRequest):
    logger.info(f"Threshold request: {request.params}")
    return _run("thresholds", lambda: find_thresholds(request.params, _tolerances(request)))


@app.post("/tau-star", response_model=TauSolution, summary="Solve tau*", tags=["scattering"])
def tau_star_endpoint(request: TauStarRequest):
    """
    Crossing time ``tau*`` of the NHIM line through (theta, r theta) with the crest selected by ``criterion``.
    """
    logger.info(f"tau* request at I={request.I}, theta={request.theta} ({request.criterion})")
    return _run(
        "tau-star",
        lambda: solve_tau_star(request.I, request.theta, request.criterion, request.params, _tolerances(request)),
    )


@app.post("/scattering-step", response_model=ScatteringStepResult, summary="Scattering step", tags=["scattering"])
def scattering_step_endpoint(request: ScatteringStepRequest):
    """
    One step ``(I, theta) -> (I + eps dL*/dtheta, theta - eps dL*/dI)`` of the first-order scattering map.
    For ``minabs`` the atlas region (I, II or III) of the start point is returned as well.
    """
    logger.info(f"Scattering step request at I={request.I}, theta={request.theta} ({request.criterion})")
    _state = ScatteringState(I=request.I, theta=request.theta)
    return _run(
        "scattering-step",
        lambda: scattering_step_detail(_state, request.criterion, request.params, _tolerances(request)),
    )


@app.post("/poisson-bracket", response_model=TransversalityReport, summary="Transversality", tags=["diffusion"])
def poisson_bracket_endpoint(request: BracketRequest):
    """
    Poisson bracket ``{F, L*}`` of the torus function of the region of ``I`` with the reduced Poincare function;
    a vanishing bracket means the scattering map follows the torus and cannot be used to jump across it.
    """
    logger.info(f"Bracket request at I={request.I}, theta={request.theta}")
    return _run(
        "poisson-bracket",
        lambda: transversality_report(
            request.I, request.theta, request.criterion, request.params, _tolerances(request)
        ),
    )


@app.post("/diffuse", response_model=DiffusionResponse, summary="Build and verify a pseudo-orbit", tags=["diffusion"])
def diffuse_endpoint(request: DiffusionRequest):
    """
    Builds a pseudo-orbit of scattering jumps and inner-flow arcs from ``I_start`` to ``I_end`` and verifies it.
    Runs with small eps can take minutes.
    """
    logger.info(f"Diffusion request {request.I_start} -> {request.I_end} for {request.params}")
    _started = datetime.now()
    _tol = _run("diffuse", lambda: _tolerances(request))
    _orbit = _run(
        "diffuse",
        lambda: build_pseudo_orbit(request.I_start, request.I_end, request.params, _tol, request.theta_start),
    )
    _report = _run("diffuse", lambda: verify_pseudo_orbit(_orbit, request.params, _tol))
    _elapsed = (datetime.now() - _started).total_seconds()
    logger.info(f"Diffusion run finished in {_elapsed:.1f} s, verification passed: {_report.passed}")
    return DiffusionResponse(
        metadata=RunMetadata(
            version=API_VERSION,
            created_at=_started.isoformat(timespec="seconds"),
            duration_seconds=_elapsed,
            mu=request.params.reduced().mu,
            eps=_orbit.eps,
            scatter_legs=len(_orbit.scatter_legs),
            inner_legs=len(_orbit.inner_legs),
        ),
        orbit=_orbit,
        verification=_report,
    )


@app.get(path="/_ping", response_model=Ping, tags=["health check"])
async def ping_endpoint():
    """Ping function for Kubernetes health checks."""
    return Ping(status="ok", version=API_VERSION, output_schema=SCHEMA_VERSION)


@app.get(path="/", include_in_schema=False)
async def root_endpoint():
    return {
        "message": "Hi there! The API Documentation is available in two formats: "
        "Please take a look at the /docs endpoint (for the Swagger UI) - or - "
        "take a look at the /redoc endpoint for an alternative documentation (by Redoc).",
        "API docs": {"swagger": "/docs", "redoc": "/redoc"},
    }


if __name__ == "__main__":
    import uvicorn

    uvicorn.run(app, host="0.0.0.0", port=8000)
