"""Closed-loop growth bounds, admissibility, exploration cost and the lam -> 0 limit."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Sequence

from .exceptions import DegenerateError, IllPosedPolicyError, InvalidParameterError, KnightLQError
from .lq import (
    HjbCoefficients,
    exploration_constant,
    exploratory_value,
    non_exploratory_value,
    optimal_policy,
    solve_hjb,
    well_posedness_margin,
)
from .model import AgentParams, AmbiguityBounds, ModelParams


@dataclass(frozen=True)
class StabilityCoefficients:
    """Closed-loop SDE ``dX = (A1 X + A2) dt + sqrt((B1 X + B2)^2 + C1) dB``.

    ``alpha`` and ``beta`` give the Gronwall bound
    ``E^[X_t^2] <= exp(alpha t) x^2 + beta/alpha (exp(alpha t) - 1)``.
    ``C1`` is zero for the classical (deterministic-feedback) process.
    """

    A1: float
    A2: float
    B1: float
    B2: float
    C1: float
    alpha: float
    beta: float
    sigma_upper_sq: float
    exploratory: bool


def stability_coefficients(coeffs: HjbCoefficients, m: ModelParams, b: AmbiguityBounds,
                           lam: float, exploratory: bool = True) -> StabilityCoefficients:
    den = well_posedness_margin(coeffs.k2, m, b)
    if not den > 0:
        raise IllPosedPolicyError(f"K - k2 D^2 sigma_upper_sq = {den} must be > 0")
    su2 = b.sigma_upper_sq
    gain = (coeffs.k2 * (m.F + m.C * m.D * su2) - m.I) / den
    offset = (coeffs.k1 * m.F - m.Q) / den
    A1 = m.A + m.F * gain
    A2 = m.F * offset
    B1 = m.C + m.D * gain
    B2 = m.D * offset
    C1 = lam * m.D**2 / den if exploratory else 0.0
    cross = abs(2 * A2 + 2 * su2 * B1 * B2) / 2
    alpha = 2 * A1 + su2 * B1**2 + cross
    beta = cross + su2 * (B2**2 + C1)
    return StabilityCoefficients(A1, A2, B1, B2, C1, alpha, beta, su2, exploratory)


class Admissibility(NamedTuple):
    admissible: bool
    margin: float


def check_admissibility(rho: float, sc: StabilityCoefficients) -> Admissibility:
    """Transversality holds when ``rho > alpha`` (strict)."""
    return Admissibility(rho > sc.alpha, rho - sc.alpha)


def dominating_bound(t: float, x0: float, sc: StabilityCoefficients) -> float:
    """Upper bound on the upper expectation of ``X_t^2`` started at ``x0``."""
    if sc.alpha == 0:
        raise DegenerateError("alpha == 0: the closed-form bound degenerates")
    growth = math.exp(sc.alpha * t)
    # expm1 keeps (e^{at} - 1)/a accurate for small |a t|
    return growth * x0 * x0 + sc.beta / sc.alpha * math.expm1(sc.alpha * t)


def exploration_cost(lam: float, rho: float) -> float:
    """Performance given up by exploring, net of the entropy bonus: ``lam / (2 rho)``."""
    if lam < 0 or not rho > 0:
        raise InvalidParameterError(f"need lam >= 0 and rho > 0, got lam={lam}, rho={rho}")
    return lam / (2 * rho)


def value_gap(coeffs: HjbCoefficients, m: ModelParams, b: AmbiguityBounds,
              agent: AgentParams) -> float:
    """``V(x) - V_ne(x)``, the same constant for every state."""
    return exploration_constant(coeffs.k2, m, b, agent)


def assembled_exploration_cost(x: float, coeffs: HjbCoefficients, m: ModelParams,
                               b: AmbiguityBounds, agent: AgentParams) -> float:
    """Exploration cost assembled term by term from value functions and entropy.

    ``(V_ne(x) - V(x)) - lam * int_0^inf e^{-rho t} int theta ln theta du dt``; the
    optimal variance does not depend on the state, so the inner integral is the
    constant ``-H`` and the time integral is ``1/rho``.
    """
    policy = optimal_policy(x, coeffs, m, b, agent.lam)
    neg_entropy_integral = -policy.entropy / agent.rho
    return ((non_exploratory_value(x, coeffs, m, b, agent) - exploratory_value(x, coeffs))
            - agent.lam * neg_entropy_integral)


class SweepRow(NamedTuple):
    lam: float
    variance: float
    abs_gap: float


def convergence_sweep(lambda_grid: Sequence[float], m: ModelParams, b: AmbiguityBounds,
                      rho: float, x: float, form: str = "printed") -> List[SweepRow]:
    """Policy variance and ``|V - V_ne|`` along a descending grid of ``lam``."""
    grid = [float(v) for v in lambda_grid]
    if not grid or any(v <= 0 for v in grid):
        raise InvalidParameterError("lambda grid must be non-empty and strictly positive")
    if any(b2 >= a2 for a2, b2 in zip(grid, grid[1:])):
        raise InvalidParameterError("lambda grid must be strictly descending")
    rows = []
    for i, lam in enumerate(grid):
        agent = AgentParams(lam, rho)
        try:
            coeffs = solve_hjb(m, b, agent, form=form)
            pol = optimal_policy(x, coeffs, m, b, lam)
            gap = value_gap(coeffs, m, b, agent)
        except KnightLQError as exc:
            raise IllPosedPolicyError(f"grid point {i} (lam={lam}) is ill-posed: {exc}") from exc
        rows.append(SweepRow(lam, pol.variance, abs(gap)))
    return rows
