from typing import Any


class ArnoldDiffusionError(Exception):
    """
    Base class of every error raised by the library.

    :param message: human-readable description
    :param context: optional structured values (action, angle, branch, ...) for logs and API responses
    """

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context: dict[str, Any] = context

    def __str__(self) -> str:
        if not self.context:
            return self.message
        _details = ", ".join(f"{key}={value}" for key, value in self.context.items())
        return f"{self.message} ({_details})"


class ConfigurationError(ArnoldDiffusionError):
    """Invalid parameters, tolerances or run configuration (CLI exit code 2)."""


class PoleAtOne(ArnoldDiffusionError):
    """The action lies within delta_sing of the pole of alpha/beta at I = 1."""


class PoleAtOneOverR(PoleAtOne):
    """Same as PoleAtOne for alpha_r/beta_r, where the pole sits at I = 1/r."""


class OutOfDomain(ArnoldDiffusionError):
    """The requested crest parameterization does not cover the given angle."""


class NoSolutionInWindow(ArnoldDiffusionError):
    """A threshold does not exist inside the analysis window (or at all)."""


class QuadratureNotConverged(ArnoldDiffusionError):
    pass


class SingularCrest(ArnoldDiffusionError):
    """|mu * alpha(I)| = 1 within tol_cls: no scattering map is built there."""


class TangencyDegenerate(ArnoldDiffusionError):
    """The NHIM line does not cross the crest transversally."""


class UnreachableBranch(ArnoldDiffusionError):
    pass


class OnDiscontinuity(ArnoldDiffusionError):
    pass


class StepFailure(ArnoldDiffusionError):
    """The ODE integrator gave up (step-size collapse)."""


class WindowEmpty(ArnoldDiffusionError):
    pass


class StuckAtResonance(ArnoldDiffusionError):
    pass
