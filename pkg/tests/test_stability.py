import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from knightlq.exceptions import DegenerateError, InvalidParameterError
from knightlq.lq import HjbCoefficients, exploratory_value, non_exploratory_value, solve_hjb, well_posedness_margin
from knightlq.model import REFERENCE_MODEL, AgentParams, AmbiguityBounds
from knightlq.stability import (
    StabilityCoefficients,
    assembled_exploration_cost,
    check_admissibility,
    convergence_sweep,
    dominating_bound,
    exploration_cost,
    stability_coefficients,
    value_gap,
)


def _solved(lam=0.6, rho=0.3, su2=1.0):
    b = AmbiguityBounds(0.01, su2)
    agent = AgentParams(lam, rho)
    return solve_hjb(REFERENCE_MODEL, b, agent), b, agent


def _sc(alpha, beta):
    return StabilityCoefficients(0, 0, 0, 0, 0, alpha, beta, 1.0, True)


def test_alpha_identical_for_both_processes():
    c, b, agent = _solved()
    e = stability_coefficients(c, REFERENCE_MODEL, b, agent.lam, exploratory=True)
    k = stability_coefficients(c, REFERENCE_MODEL, b, agent.lam, exploratory=False)
    assert e.alpha == k.alpha
    assert k.C1 == 0.0 and e.C1 > 0
    assert e.beta - k.beta == pytest.approx(b.sigma_upper_sq * e.C1, rel=1e-14)


def test_uncontrolled_system():
    m = REFERENCE_MODEL.replace(F=0.0, D=0.0)
    b = AmbiguityBounds(0.01, 0.64)
    c = HjbCoefficients(-1.0, 0.2, 0.0)
    sc = stability_coefficients(c, m, b, 0.6)
    assert (sc.A1, sc.A2, sc.B1, sc.B2) == (m.A, 0.0, m.C, 0.0)
    assert sc.alpha == pytest.approx(2 * m.A + 0.64 * m.C**2, rel=1e-15)


def test_reference_model_alpha_oracle():
    # direct evaluation of the closed-loop coefficients from the solved k2, k1
    c, b, agent = _solved()
    m = REFERENCE_MODEL
    den = m.K - c.k2 * m.D**2
    gain = (c.k2 * (m.F + m.C * m.D) - m.I) / den
    off = (c.k1 * m.F - m.Q) / den
    a1, a2, b1, b2 = m.A + m.F * gain, m.F * off, m.C + m.D * gain, m.D * off
    alpha = 2 * a1 + b1**2 + abs(2 * a2 + 2 * b1 * b2) / 2
    sc = stability_coefficients(c, m, b, agent.lam)
    assert sc.alpha == pytest.approx(alpha, rel=1e-14)
    assert sc.alpha < 0.3
    assert check_admissibility(0.3, sc).admissible


def test_admissibility_is_strict():
    sc = _sc(-0.25, 1.0)
    verdict = check_admissibility(0.75, sc)
    assert verdict.admissible and verdict.margin == pytest.approx(1.0)
    assert not check_admissibility(-0.25, sc).admissible


def test_dominating_bound_examples():
    sc = _sc(0.4, 0.7)
    assert dominating_bound(0.0, 2.0, sc) == 4.0
    assert dominating_bound(3.0, 2.0, _sc(0.4, 0.0)) == pytest.approx(math.exp(1.2) * 4.0)
    ts = np.linspace(0, 10, 50)
    ys = [dominating_bound(t, 1.0, sc) for t in ts]
    assert all(b > a for a, b in zip(ys, ys[1:]))
    with pytest.raises(DegenerateError):
        dominating_bound(1.0, 1.0, _sc(0.0, 1.0))


def test_discounted_bound_vanishes():
    c, b, agent = _solved()
    sc = stability_coefficients(c, REFERENCE_MODEL, b, agent.lam)
    vals = [math.exp(-agent.rho * t) * dominating_bound(t, 1.0, sc) for t in (10, 50, 100)]
    assert vals[0] > vals[1] > vals[2]


def test_exploration_cost_examples():
    assert exploration_cost(0.6, 0.3) == pytest.approx(1.0, abs=1e-15)
    assert exploration_cost(0.0, 0.3) == 0.0
    with pytest.raises(InvalidParameterError):
        exploration_cost(0.6, 0.0)


@pytest.mark.parametrize("lam", [0.1, 0.6, 2.0])
@pytest.mark.parametrize("rho", [0.2, 0.3, 1.5])
def test_assembled_cost_identity(lam, rho):
    for su in (0.1, 0.5, 1.0):
        c, b, agent = _solved(lam, rho, su * su)
        for x in (-5.0, 0.0, 7.0):
            assert assembled_exploration_cost(x, c, REFERENCE_MODEL, b, agent) == pytest.approx(lam / (2 * rho), abs=1e-12)


def test_value_gap_cross_module():
    c, b, agent = _solved()
    gap = value_gap(c, REFERENCE_MODEL, b, agent)
    for x in (-5.0, 0.0, 7.0):
        d = exploratory_value(x, c) - non_exploratory_value(x, c, REFERENCE_MODEL, b, agent)
        assert d == pytest.approx(gap, abs=1e-12)


def test_value_gap_log_vanishes():
    c, b, _ = _solved()
    lam = well_posedness_margin(c.k2, REFERENCE_MODEL, b) / (2 * math.pi * math.e)
    agent = AgentParams(lam, 0.3)
    assert value_gap(c, REFERENCE_MODEL, b, agent) == pytest.approx(-lam / 0.6, rel=1e-14)


def test_convergence_sweep():
    b = AmbiguityBounds(0.01, 1.0)
    rows = convergence_sweep([0.01, 0.005, 0.001], REFERENCE_MODEL, b, 0.3, 1.0)
    var = [r.variance for r in rows]
    assert var[0] > var[1] > var[2]
    ratios = [r.variance / r.lam for r in rows]
    assert max(ratios) - min(ratios) < 1e-12
    assert rows[2].abs_gap < rows[0].abs_gap


@pytest.mark.parametrize("grid", [[], [0.01, 0.01], [0.001, 0.01], [0.01, -0.1]])
def test_convergence_sweep_rejects_bad_grid(grid):
    with pytest.raises(InvalidParameterError):
        convergence_sweep(grid, REFERENCE_MODEL, AmbiguityBounds(0.01, 1.0), 0.3, 1.0)


@settings(max_examples=40, deadline=None)
@given(lam=st.floats(1e-3, 3.0), rho=st.floats(0.2, 2.0), su=st.floats(0.1, 1.5))
def test_alpha_equality_property(lam, rho, su):
    b = AmbiguityBounds(min(0.01, su * su), su * su)
    c = solve_hjb(REFERENCE_MODEL, b, AgentParams(lam, rho))
    e = stability_coefficients(c, REFERENCE_MODEL, b, lam, True)
    k = stability_coefficients(c, REFERENCE_MODEL, b, lam, False)
    assert e.alpha == k.alpha
