from typing import Literal

from pydantic import BaseModel, Field

from src.errors import ConfigurationError


class ReducedSystem(BaseModel):
    """
    The system after the reduction of the harmonics to ``a1 cos(phi) + a2 cos(r phi - s)``.

    All numerical modules work in these coordinates. The action of the reduced system is
    ``I_bar = action_sign * (k1 * I + l1)`` and its perturbation size is ``eps * k1**2``.
    """

    a1: float
    a2: float
    r: float = Field(gt=0, le=1)
    eps: float = Field(ge=0, description="reduced perturbation size eps * k1^2")
    k1: int
    l1: int
    action_sign: Literal[1, -1] = 1
    swapped: bool = Field(False, description="True if the two harmonics were exchanged during the reduction")

    class Config:
        frozen = True

    @property
    def mu(self) -> float:
        return self.a1 / self.a2

    def to_reduced_action(self, action: float) -> float:
        return self.action_sign * (self.k1 * action + self.l1)

    def from_reduced_action(self, reduced_action: float) -> float:
        return (self.action_sign * reduced_action - self.l1) / self.k1


class SystemParams(BaseModel):
    """
    Parameters of the pendulum-rotor Hamiltonian

    ``H = ±(p²/2 + cos q - 1) + I²/2 + eps * cos q * (a1 cos(k1 phi + l1 s) + a2 cos(k2 phi + l2 s))``.

    The defaults (k1, k2, l1, l2) = (1, 1, 0, -1) give the canonical case ``a1 cos(phi) + a2 cos(phi - s)``.
    """

    a1: float = Field(0.5, description="amplitude of the first harmonic", examples=[0.5, 0.75])
    a2: float = Field(1.0, description="amplitude of the second harmonic", examples=[1.0])
    k1: int = Field(1, examples=[1])
    k2: int = Field(1, examples=[1])
    l1: int = Field(0, examples=[0])
    l2: int = Field(-1, examples=[-1])
    eps: float = Field(0.01, ge=0, description="perturbation size", examples=[0.01])
    pendulum_sign: Literal[1, -1] = Field(1, description="the ± in front of the pendulum")

    class Config:
        frozen = True

    @property
    def mu(self) -> float:
        if self.a2 == 0:
            raise ConfigurationError("mu = a1/a2 is undefined for a2 = 0", a1=self.a1, a2=self.a2)
        return self.a1 / self.a2

    @property
    def delta(self) -> int:
        return self.k1 * self.l2 - self.k2 * self.l1

    def require_diffusion_hypotheses(self) -> None:
        """
        Checks the hypotheses of the diffusion mechanism (non-trivial amplitudes, independent harmonics, eps > 0).

        :raises ConfigurationError: if one of them fails
        """
        if self.a1 * self.a2 == 0:
            raise ConfigurationError("a1 * a2 = 0: the Hamiltonian is integrable or autonomous", a1=self.a1, a2=self.a2)
        if self.delta == 0:
            raise ConfigurationError("k1*l2 - k2*l1 = 0: the harmonics are not independent", delta=self.delta)
        if self.eps == 0:
            raise ConfigurationError("eps = 0: there is no diffusion mechanism for the unperturbed system")

    def reduced(self) -> ReducedSystem:
        """
        Reduces the two harmonics to ``a1 cos(phi) + a2 cos(r phi - s)`` with ``r`` in (0, 1].

        :raises ConfigurationError: if the reduction is impossible (k1 = k2 = 0, k2 = 0, Delta = 0)
            or leads to a reduced time rate other than ±1
        """
        a1, a2, k1, k2, l1, l2 = self.a1, self.a2, self.k1, self.k2, self.l1, self.l2
        # cos is even: flip the sign of a harmonic with negative k
        if k1 < 0:
            k1, l1 = -k1, -l1
        if k2 < 0:
            k2, l2 = -k2, -l2
        _swapped = False
        if k1 == 0 or k2 > k1:
            a1, a2, k1, k2, l1, l2 = a2, a1, k2, k1, l2, l1
            _swapped = True
        if k1 == 0:
            raise ConfigurationError("k1 = k2 = 0: the action I is a constant of motion")
        if k2 == 0:
            raise ConfigurationError("k2 = 0 gives r = 0, a Hamiltonian with a single angle harmonic", k1=k1, l1=l1)
        if a2 == 0:
            raise ConfigurationError("the reduced second amplitude vanishes, mu = a1/a2 is undefined", a1=a1, a2=a2)
        _delta = k1 * l2 - k2 * l1
        if _delta == 0:
            raise ConfigurationError("k1*l2 - k2*l1 = 0: the reduced Hamiltonian is autonomous")
        # rate of the reduced time angle: r*phi_bar - s_bar = k2*phi + l2*s
        _nu = -_delta / k1
        if abs(abs(_nu) - 1.0) > 1e-12:
            raise ConfigurationError(
                "only harmonics whose reduced time angle runs at unit speed are supported", rate=_nu
            )
        return ReducedSystem(
            a1=a1,
            a2=a2,
            r=k2 / k1,
            eps=self.eps * k1**2,
            k1=k1,
            l1=l1,
            action_sign=1 if _nu > 0 else -1,
            swapped=_swapped,
        )


class SeparatrixPoint(BaseModel):
    tau: float = Field(description="time along the separatrix")
    p0: float = Field(description="pendulum momentum")
    q0: float = Field(description="pendulum angle in radians")
    sign: Literal[1, -1] = Field(1, description="upper (+1) or lower (-1) separatrix")


class AmplitudePair(BaseModel):
    """
    Melnikov amplitudes and their derivatives at a given action.
    """

    I: float
    A1: float
    A2: float
    dA1: float = Field(description="derivative of A1 with respect to I")
    dA2: float = Field(description="derivative of A2 with respect to I")
