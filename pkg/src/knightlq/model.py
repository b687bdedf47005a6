"""LQ model primitives: dynamics, reward and the ambiguity-averse operator G~.

The controlled state follows ``dx = b(x, u) dt + sigma(x, u) dB`` where ``B`` is a
G-Brownian motion whose quadratic variation rate lies in
``[sigma_lower_sq, sigma_upper_sq]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .exceptions import DomainError, InvalidParameterError


def _check_finite(**values):
    for name, v in values.items():
        if not np.all(np.isfinite(v)):
            raise DomainError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class ModelParams:
    """Constants of ``b = A x + F u``, ``sigma = C x + D u`` and the quadratic reward.

    Requires ``M >= 0`` and ``K > 0``.
    """

    A: float
    F: float
    C: float
    D: float
    M: float
    I: float  # noqa: E741
    K: float
    P: float
    Q: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float, np.floating, np.integer)) or not math.isfinite(v):
                raise InvalidParameterError(f"{f.name} must be a finite real, got {v!r}")
            object.__setattr__(self, f.name, float(v))
        if self.M < 0:
            raise InvalidParameterError(f"M must be >= 0, got {self.M}")
        if self.K <= 0:
            raise InvalidParameterError(f"K must be > 0, got {self.K}")

    def replace(self, **changes) -> "ModelParams":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(changes)
        return ModelParams(**d)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


#: Indoor temperature-control example (heater power vs temperature deviation).
REFERENCE_MODEL = ModelParams(A=-0.2, F=0.8, C=0.5, D=1.2, M=10.0, I=0.3, K=2.0, P=0.5, Q=0.2)


@dataclass(frozen=True)
class AmbiguityBounds:
    """Variance interval ``[sigma_lower_sq, sigma_upper_sq]`` of the G-normal law."""

    sigma_lower_sq: float
    sigma_upper_sq: float

    def __post_init__(self):
        lo, hi = float(self.sigma_lower_sq), float(self.sigma_upper_sq)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise InvalidParameterError("variance bounds must be finite")
        if not 0 < lo <= hi:
            raise InvalidParameterError(
                f"need 0 < sigma_lower_sq <= sigma_upper_sq, got [{lo}, {hi}]"
            )
        object.__setattr__(self, "sigma_lower_sq", lo)
        object.__setattr__(self, "sigma_upper_sq", hi)

    @classmethod
    def from_vols(cls, sigma_lower: float, sigma_upper: float) -> "AmbiguityBounds":
        return cls(sigma_lower**2, sigma_upper**2)

    @property
    def sigma_lower(self) -> float:
        return math.sqrt(self.sigma_lower_sq)

    @property
    def sigma_upper(self) -> float:
        return math.sqrt(self.sigma_upper_sq)

    @property
    def is_classical(self) -> bool:
        return self.sigma_lower_sq == self.sigma_upper_sq


@dataclass(frozen=True)
class AgentParams:
    """Exploration weight ``lam`` (temperature) and discount rate ``rho``."""

    lam: float
    rho: float

    def __post_init__(self):
        lam, rho = float(self.lam), float(self.rho)
        if not (math.isfinite(lam) and lam > 0):
            raise InvalidParameterError(f"lam must be > 0, got {self.lam}")
        if not (math.isfinite(rho) and rho > 0):
            raise InvalidParameterError(f"rho must be > 0, got {self.rho}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "rho", rho)


def drift(x, u, m: ModelParams):
    _check_finite(x=x, u=u)
    return m.A * x + m.F * u


def diffusion(x, u, m: ModelParams):
    _check_finite(x=x, u=u)
    return m.C * x + m.D * u


def reward(x, u, m: ModelParams):
    """Running reward ``-(M/2 x^2 + I x u + K/2 u^2 + P x + Q u)``."""
    _check_finite(x=x, u=u)
    return -(0.5 * m.M * x * x + m.I * x * u + 0.5 * m.K * u * u + m.P * x + m.Q * u)


def g_tilde(c, b: AmbiguityBounds):
    """Lower-expectation second-order operator ``1/2 (sl^2 c^+ - su^2 c^-)``.

    Nonnegative curvature is weighted by the lower variance, negative curvature by
    the upper one, so the agent always evaluates the worst case.
    """
    _check_finite(c=c)
    c = np.asarray(c, dtype=float)
    out = np.where(c >= 0, 0.5 * b.sigma_lower_sq * c, 0.5 * b.sigma_upper_sq * c)
    return float(out) if out.ndim == 0 else out
