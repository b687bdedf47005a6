"""Relaxed (density-valued) controls and the Boltzmann optimal policy.

A relaxed control is a probability density over actions. The exploratory
coefficients average the primitive drift, squared diffusion and reward against it,
and the entropy-regularized Hamiltonian is maximized by the Gibbs density
``theta*(u) ~ exp(Psi(x, u) / lam)`` with
``Psi = r + sigma^2 G~[v''] + b v'``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from .exceptions import DomainError, IllPosedPolicyError, QuadratureError
from .model import AmbiguityBounds, ModelParams, diffusion, drift, g_tilde, reward
from .quadrature import integrate

NORMALIZATION_TOL = 1e-6
QUAD_REL_TOL = 1e-10
# Gaussian mass beyond 8 standard deviations is ~1e-15.
TRUNCATION_WIDTH = 8.0


@dataclass(frozen=True)
class PolicyDensity:
    """Action density ``pdf`` treated as zero outside ``support = (lo, hi)``.

    Construction checks that the density integrates to one within
    ``NORMALIZATION_TOL``.
    """

    pdf: Callable[[np.ndarray], np.ndarray]
    support: Tuple[float, float]
    log_partition: Optional[float] = field(default=None, compare=False)

    def __post_init__(self):
        lo, hi = (float(s) for s in self.support)
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise DomainError(f"support must be a finite interval with lo < hi, got {self.support}")
        object.__setattr__(self, "support", (lo, hi))
        grid = np.linspace(lo, hi, 257)
        if np.any(np.asarray(self.pdf(grid)) < 0):
            raise DomainError("density takes negative values on its support")
        mass = self.integrate(lambda u: np.ones_like(u))
        if abs(mass - 1.0) > NORMALIZATION_TOL:
            raise DomainError(f"density integrates to {mass!r}, not 1")

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        lo, hi = self.support
        inside = (u >= lo) & (u <= hi)
        out = np.where(inside, self.pdf(np.clip(u, lo, hi)), 0.0)
        return float(out) if out.ndim == 0 else out

    def integrate(self, g: Callable[[np.ndarray], np.ndarray]) -> float:
        """``int g(u) theta(u) du`` over the support."""
        lo, hi = self.support
        val, _ = integrate(lambda u: g(u) * self.pdf(u), lo, hi, rel_tol=QUAD_REL_TOL)
        return val

    @classmethod
    def gaussian(cls, mean: float, var: float, width: float = TRUNCATION_WIDTH) -> "PolicyDensity":
        if not var > 0:
            raise DomainError(f"Gaussian variance must be > 0, got {var}")
        s = math.sqrt(var)
        c = 1.0 / math.sqrt(2 * math.pi * var)
        return cls(lambda u: c * np.exp(-0.5 * ((u - mean) / s) ** 2),
                   (mean - width * s, mean + width * s))

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "PolicyDensity":
        h = 1.0 / (hi - lo)
        return cls(lambda u: np.full_like(np.asarray(u, dtype=float), h), (lo, hi))


@dataclass(frozen=True)
class DifferentiableValue:
    """First and second derivative of a candidate value function (``v0`` optional)."""

    v1: Callable[[float], float]
    v2: Callable[[float], float]
    v0: Optional[Callable[[float], float]] = None

    @classmethod
    def quadratic(cls, k2: float, k1: float, k0: float = 0.0) -> "DifferentiableValue":
        return cls(v1=lambda x: k2 * x + k1, v2=lambda x: k2,
                   v0=lambda x: 0.5 * k2 * x * x + k1 * x + k0)


def relaxed_drift(x: float, theta: PolicyDensity, m: ModelParams) -> float:
    return theta.integrate(lambda u: drift(x, u, m))


def relaxed_vol(x: float, theta: PolicyDensity, m: ModelParams) -> float:
    second = theta.integrate(lambda u: diffusion(x, u, m) ** 2)
    return math.sqrt(max(second, 0.0))


def relaxed_reward(x: float, theta: PolicyDensity, m: ModelParams) -> float:
    return theta.integrate(lambda u: reward(x, u, m))


def entropy(theta: PolicyDensity) -> float:
    """Differential entropy ``-int theta ln theta`` with ``0 ln 0 = 0``."""
    def integrand(u):
        p = np.asarray(theta.pdf(u), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(p > 0, -p * np.log(np.where(p > 0, p, 1.0)), 0.0)
        return out

    lo, hi = theta.support
    val, _ = integrate(integrand, lo, hi, rel_tol=QUAD_REL_TOL)
    return val


def hamiltonian_exponent(x: float, dv: DifferentiableValue, m: ModelParams,
                         b: AmbiguityBounds) -> Callable[[np.ndarray], np.ndarray]:
    """``u -> Psi(x, u)`` for the LQ primitives."""
    _check = np.asarray([x, dv.v1(x), dv.v2(x)], dtype=float)
    if not np.all(np.isfinite(_check)):
        raise DomainError("state or value derivatives are not finite")
    g = g_tilde(dv.v2(x), b)
    vp = float(dv.v1(x))

    def psi(u):
        u = np.asarray(u, dtype=float)
        return reward(x, u, m) + diffusion(x, u, m) ** 2 * g + drift(x, u, m) * vp

    return psi


def _quadratic_support(psi, lam):
    # Psi is quadratic in u for LQ primitives; a 5-point fit recovers it exactly.
    u = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    a, bcoef, _ = np.polyfit(u, psi(u), 2)
    if not a < 0:
        raise IllPosedPolicyError(
            "exponent is not concave in the action (K - 2 D^2 G~[v''] <= 0); "
            "the Gibbs density is not normalizable on the real line"
        )
    mu = -bcoef / (2 * a)
    sd = math.sqrt(lam / (-2 * a))
    return mu - TRUNCATION_WIDTH * sd, mu + TRUNCATION_WIDTH * sd, mu


def boltzmann_density(psi: Callable[[np.ndarray], np.ndarray], lam: float,
                      support: Tuple[float, float], peak: Optional[float] = None) -> PolicyDensity:
    """Normalized ``exp(psi / lam)`` on a bounded support.

    The exponent is shifted by its maximum before exponentiation; the shift
    cancels in the normalization, and ``log_partition`` restores it so that
    ``lam * log_partition = lam * ln int exp(psi / lam) du``.
    """
    if not lam > 0:
        raise DomainError(f"lam must be > 0, got {lam}")
    lo, hi = float(support[0]), float(support[1])
    grid = np.linspace(lo, hi, 2049)
    if peak is not None and lo <= peak <= hi:
        grid = np.append(grid, peak)
    with np.errstate(over="raise", invalid="raise"):
        try:
            vals = np.asarray(psi(grid), dtype=float)
        except FloatingPointError as exc:
            raise IllPosedPolicyError(f"exponent overflows on the support: {exc}") from exc
    if not np.all(np.isfinite(vals)):
        raise IllPosedPolicyError("exponent is not finite on the support")
    shift = float(vals.max())

    def unnormalized(u):
        return np.exp((np.asarray(psi(u), dtype=float) - shift) / lam)

    try:
        z, _ = integrate(unnormalized, lo, hi, rel_tol=QUAD_REL_TOL)
    except QuadratureError as exc:
        raise IllPosedPolicyError(f"normalizing integral failed: {exc}") from exc
    if not (math.isfinite(z) and z > 0):
        raise IllPosedPolicyError(f"normalizing integral is {z!r}")

    return PolicyDensity(lambda u: unnormalized(u) / z, (lo, hi),
                         log_partition=shift / lam + math.log(z))


def boltzmann_policy(x: float, dv: DifferentiableValue, m: ModelParams, b: AmbiguityBounds,
                     lam: float, support: Optional[Tuple[float, float]] = None) -> PolicyDensity:
    """Optimal relaxed control at state ``x`` for the candidate value ``dv``.

    Without an explicit ``support`` the action line is truncated at
    ``mu_hat +/- 8 sd_hat`` from a quadratic fit of the exponent.
    """
    psi = hamiltonian_exponent(x, dv, m, b)
    peak = None
    if support is None:
        lo, hi, peak = _quadratic_support(psi, lam)
        support = (lo, hi)
    return boltzmann_density(psi, lam, support, peak=peak)


def hjb_maximum(x: float, dv: DifferentiableValue, m: ModelParams, b: AmbiguityBounds,
                lam: float, support: Optional[Tuple[float, float]] = None) -> float:
    """Maximized right-hand side of the entropy-regularized HJB at ``x``.

    At the Gibbs optimum, ``int (Psi - lam ln theta*) theta* du = lam ln Z``, so a
    solution ``v`` satisfies ``rho v(x) == hjb_maximum(x, ...)``.
    """
    theta = boltzmann_policy(x, dv, m, b, lam, support)
    return lam * theta.log_partition
