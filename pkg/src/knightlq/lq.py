"""Closed-form solution of the exploratory LQ problem on the concave branch.

With ``v(x) = k2/2 x^2 + k1 x + k0`` and ``k2 < 0`` the operator G~[v''] equals
``sigma_upper_sq * k2 / 2``, so only the upper variance enters the coefficients.
``k2`` solves a scalar rational equation (found by sign-change scan, bisection and a
Newton polish); ``k1`` and ``k0`` then follow by substitution.

Two coefficient conventions are available through ``form``:

``"printed"`` (default)
    The published coefficient equations, taken verbatim. These reproduce the
    published policy variances and sensitivity signs.
``"consistent"``
    The equations obtained by substituting the quadratic ansatz into the HJB
    whose maximizer is the Gaussian policy. They differ from ``"printed"`` by the
    weight on the squared-mean term and by ``rho`` vs ``1/rho`` on the linear
    terms; only this form makes ``V`` equal the discounted reward actually
    collected by the policy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .exceptions import (
    DegenerateError,
    IllPosedPolicyError,
    InvalidParameterError,
    MultipleRootsError,
    NoSolutionError,
)
from .model import AgentParams, AmbiguityBounds, ModelParams, g_tilde
from .relaxed import DifferentiableValue

logger = logging.getLogger(__name__)

FORMS = ("printed", "consistent")
ROOT_RESIDUAL_TOL = 1e-12
BRACKET_WIDTH = 1e-14
K_MAX_START = 1e3
K_MAX_LIMIT = 1e9
_SCAN_POINTS = 100_001

TWO_PI_E = 2.0 * math.pi * math.e


def _check_form(form):
    if form not in FORMS:
        raise ValueError(f"form must be one of {FORMS}, got {form!r}")


@dataclass(frozen=True)
class HjbCoefficients:
    k2: float
    k1: float
    k0: float

    def __post_init__(self):
        for name in ("k2", "k1", "k0"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise InvalidParameterError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, v)
        if not self.k2 < 0:
            raise InvalidParameterError(f"only the concave branch k2 < 0 is supported, got {self.k2}")


@dataclass(frozen=True)
class GaussianPolicy:
    """Gaussian action law; ``variance == 0`` is the Dirac limit at ``mean``."""

    mean: float
    variance: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.variance)):
            raise InvalidParameterError("policy mean and variance must be finite")
        if self.variance < 0:
            raise InvalidParameterError(f"policy variance must be >= 0, got {self.variance}")

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @property
    def is_dirac(self) -> bool:
        return self.variance == 0.0

    @property
    def entropy(self) -> float:
        return 0.5 * math.log(TWO_PI_E * self.variance)

    def pdf(self, u):
        u = np.asarray(u, dtype=float)
        return np.exp(-0.5 * (u - self.mean) ** 2 / self.variance) / math.sqrt(2 * math.pi * self.variance)


def well_posedness_margin(k2: float, m: ModelParams, b: AmbiguityBounds) -> float:
    """``K - k2 D^2 sigma_upper_sq``; must be positive."""
    return m.K - k2 * m.D**2 * b.sigma_upper_sq


def _gain(k2, m, b):
    return (m.C * m.D * b.sigma_upper_sq + m.F) * k2 - m.I


def k2_residual(k2, m: ModelParams, b: AmbiguityBounds, rho: float, form: str = "printed"):
    """``k2 - RHS(k2)`` of the quadratic-coefficient equation (vectorized in ``k2``)."""
    _check_form(form)
    k2 = np.asarray(k2, dtype=float)
    den = well_posedness_margin(k2, m, b)
    if np.any(den == 0):
        raise DegenerateError("k2 sits on the pole K - k2 D^2 sigma_upper_sq = 0")
    g = _gain(k2, m, b)
    lin = (m.C**2 * b.sigma_upper_sq + 2 * m.A) * k2 - m.M
    if form == "printed":
        rhs = 2 * g * g / (rho * den) + rho * lin
    else:
        rhs = g * g / (rho * den) + lin / rho
    out = k2 - rhs
    return float(out) if out.ndim == 0 else out


def _k2_residual_slope(k2, m, b, rho, form):
    den = well_posedness_margin(k2, m, b)
    g = _gain(k2, m, b)
    dg = m.C * m.D * b.sigma_upper_sq + m.F
    dden = -m.D**2 * b.sigma_upper_sq
    dratio = (2 * g * dg * den - g * g * dden) / den**2
    lin_slope = m.C**2 * b.sigma_upper_sq + 2 * m.A
    if form == "printed":
        return 1.0 - (2 * dratio / rho + rho * lin_slope)
    return 1.0 - (dratio / rho + lin_slope / rho)


def _bisect(f, lo, hi, flo):
    while hi - lo > BRACKET_WIDTH:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def admissible_k2_roots(m: ModelParams, b: AmbiguityBounds, rho: float,
                        form: str = "printed") -> list:
    """All admissible roots (``k2 < 0``, positive margin), sorted by ``|k2|``."""
    _check_form(form)
    if not rho > 0:
        raise InvalidParameterError(f"rho must be > 0, got {rho}")

    def f(k):
        return k2_residual(k, m, b, rho, form)

    k_max = K_MAX_START
    while True:
        # dense near zero (geometric) and uniform over the whole range
        grid = np.unique(np.concatenate([
            -np.geomspace(1e-12, k_max, _SCAN_POINTS),
            -np.linspace(0.0, k_max, _SCAN_POINTS)[1:],
        ]))
        vals = f(grid)
        brackets = []
        exact = grid[vals == 0].tolist()
        s = np.sign(vals)
        idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
        brackets = [(grid[i], grid[i + 1], vals[i]) for i in idx]
        if brackets or exact:
            break
        k_max *= 2
        if k_max > K_MAX_LIMIT:
            raise NoSolutionError(
                f"no sign change of the k2 residual on [-{K_MAX_LIMIT:g}, 0)"
            )

    roots = list(exact)
    for lo, hi, flo in brackets:
        r = _bisect(f, lo, hi, flo)
        # one Newton step, kept only if it improves the residual
        slope = _k2_residual_slope(r, m, b, rho, form)
        if slope != 0 and math.isfinite(slope):
            cand = r - f(r) / slope
            if cand < 0 and abs(f(cand)) < abs(f(r)):
                r = cand
        roots.append(float(r))

    roots = [r for r in roots if r < 0 and well_posedness_margin(r, m, b) > 0]
    if not roots:
        raise NoSolutionError("k2 equation has no root with k2 < 0 and K - k2 D^2 su^2 > 0")
    roots.sort(key=abs)
    for r in roots:
        res = abs(f(r))
        if res >= ROOT_RESIDUAL_TOL:
            logger.warning("k2 root %.17g has residual %.3e above %.0e", r, res, ROOT_RESIDUAL_TOL)
    return roots


RootChoice = Union[str, int]


def solve_k2(m: ModelParams, b: AmbiguityBounds, rho: float, form: str = "printed",
             root: RootChoice = "smallest") -> float:
    """Admissible negative root of the ``k2`` equation.

    ``root="smallest"`` picks the root of least magnitude and logs any others;
    ``root="unique"`` raises ``MultipleRootsError`` when several exist; an integer
    indexes the roots sorted by magnitude.
    """
    roots = admissible_k2_roots(m, b, rho, form)
    if isinstance(root, (int, np.integer)) and not isinstance(root, bool):
        return roots[root]
    if root == "unique":
        if len(roots) > 1:
            raise MultipleRootsError(roots)
        return roots[0]
    if root == "smallest":
        if len(roots) > 1:
            logger.warning("multiple admissible k2 roots %s; using %r", roots, roots[0])
        return roots[0]
    raise ValueError(f"root must be 'smallest', 'unique' or an int, got {root!r}")


def compute_k1(k2: float, m: ModelParams, b: AmbiguityBounds, rho: float,
               form: str = "printed") -> float:
    _check_form(form)
    den = well_posedness_margin(k2, m, b)
    if den == 0:
        raise DegenerateError("K - k2 D^2 sigma_upper_sq = 0")
    g = _gain(k2, m, b)
    if form == "printed":
        coef = 1.0 - 2 * g * m.F / (rho * den) - rho * m.A
        rhs = -2 * g * m.Q / (rho * den) - rho * m.P
    else:
        coef = rho - g * m.F / den - m.A
        rhs = -g * m.Q / den - m.P
    if coef == 0:
        raise DegenerateError("the linear equation for k1 has a zero coefficient")
    return rhs / coef


def compute_k0(k1: float, k2: float, m: ModelParams, b: AmbiguityBounds, rho: float,
               lam: float, form: str = "printed") -> float:
    _check_form(form)
    den = well_posedness_margin(k2, m, b)
    if not den > 0:
        raise IllPosedPolicyError(f"K - k2 D^2 sigma_upper_sq = {den} must be > 0")
    if not lam > 0:
        raise InvalidParameterError(f"lam must be > 0, got {lam}")
    weight = 1.0 if form == "printed" else 0.5
    return (weight * (k1 * m.F - m.Q) ** 2 / (rho * den)
            + lam / (2 * rho) * (math.log(TWO_PI_E * lam / den) - 1.0))


def solve_hjb(m: ModelParams, b: AmbiguityBounds, agent: AgentParams, form: str = "printed",
              root: RootChoice = "smallest") -> HjbCoefficients:
    k2 = solve_k2(m, b, agent.rho, form, root)
    k1 = compute_k1(k2, m, b, agent.rho, form)
    k0 = compute_k0(k1, k2, m, b, agent.rho, agent.lam, form)
    return HjbCoefficients(k2, k1, k0)


def exploratory_value(x, coeffs: HjbCoefficients):
    x = np.asarray(x, dtype=float)
    out = 0.5 * coeffs.k2 * x * x + coeffs.k1 * x + coeffs.k0
    return float(out) if out.ndim == 0 else out


def exploration_constant(k2: float, m: ModelParams, b: AmbiguityBounds, agent: AgentParams) -> float:
    """``lam/(2 rho) (ln(2 pi e lam / (K - k2 D^2 su^2)) - 1)``, the exploratory value premium."""
    den = well_posedness_margin(k2, m, b)
    if not den > 0:
        raise IllPosedPolicyError(f"K - k2 D^2 sigma_upper_sq = {den} must be > 0")
    return agent.lam / (2 * agent.rho) * (math.log(TWO_PI_E * agent.lam / den) - 1.0)


def non_exploratory_value(x, coeffs: HjbCoefficients, m: ModelParams, b: AmbiguityBounds,
                          agent: AgentParams):
    alpha0 = coeffs.k0 - exploration_constant(coeffs.k2, m, b, agent)
    x = np.asarray(x, dtype=float)
    out = 0.5 * coeffs.k2 * x * x + coeffs.k1 * x + alpha0
    return float(out) if out.ndim == 0 else out


def _feedback_mean(x, coeffs, m, b):
    den = well_posedness_margin(coeffs.k2, m, b)
    if not den > 0:
        raise IllPosedPolicyError(
            f"K - k2 D^2 sigma_upper_sq = {den} must be > 0 for a well-posed policy"
        )
    return (_gain(coeffs.k2, m, b) * x + coeffs.k1 * m.F - m.Q) / den, den


def non_exploratory_control(x, coeffs: HjbCoefficients, m: ModelParams, b: AmbiguityBounds):
    """Deterministic optimal feedback ``u*(x)`` of the classical problem."""
    mean, _ = _feedback_mean(np.asarray(x, dtype=float), coeffs, m, b)
    return float(mean) if np.ndim(mean) == 0 else mean


def optimal_policy(x: float, coeffs: HjbCoefficients, m: ModelParams, b: AmbiguityBounds,
                   lam: float) -> GaussianPolicy:
    if lam < 0:
        raise InvalidParameterError(f"lam must be >= 0, got {lam}")
    mean, den = _feedback_mean(float(x), coeffs, m, b)
    return GaussianPolicy(float(mean), lam / den)


def lq_policy_from_value(x: float, dv: DifferentiableValue, m: ModelParams, b: AmbiguityBounds,
                         lam: float) -> GaussianPolicy:
    """Gaussian maximizer of the Hamiltonian for an arbitrary smooth candidate ``v``."""
    g = g_tilde(float(dv.v2(x)), b)
    den = m.K - 2 * m.D**2 * g
    if not den > 0:
        raise IllPosedPolicyError(
            f"K - 2 D^2 G~[v''(x)] = {den} <= 0 at x={x}: the policy is not well posed"
        )
    mean = (2 * m.C * m.D * x * g + m.F * float(dv.v1(x)) - m.I * x - m.Q) / den
    return GaussianPolicy(mean, lam / den)


def printed_hjb_residual(x, coeffs: HjbCoefficients, m: ModelParams, b: AmbiguityBounds,
                         agent: AgentParams):
    """Residual of the reduced LQ HJB as published, for the quadratic ``v``.

    ``rho v - [(2CDxG + Fv' - Ix - Q)^2 / (K - 2D^2 G) + (C^2 G - M/2) x^2
    + (A v' - P) x + lam/2 (ln(2 pi e lam / (K - 2D^2 G)) - 1)]`` with
    ``G = G~[k2]``.
    """
    x = np.asarray(x, dtype=float)
    g = g_tilde(coeffs.k2, b)
    den = m.K - 2 * m.D**2 * g
    vp = coeffs.k2 * x + coeffs.k1
    num = 2 * m.C * m.D * x * g + m.F * vp - m.I * x - m.Q
    rhs = (num**2 / den + (m.C**2 * g - 0.5 * m.M) * x**2 + (m.A * vp - m.P) * x
           + 0.5 * agent.lam * (math.log(TWO_PI_E * agent.lam / den) - 1.0))
    out = agent.rho * exploratory_value(x, coeffs) - rhs
    return float(out) if np.ndim(out) == 0 else out

