import math

import numpy as np
import pytest

from knightlq.exceptions import QuadratureError
from knightlq.quadrature import integrate


@pytest.mark.parametrize("f,a,b,exact", [
    (np.sin, 0.0, math.pi, 2.0),
    (np.exp, -1.0, 2.0, math.e**2 - math.exp(-1)),
    (lambda u: 1.0 / (1.0 + u * u), -50.0, 50.0, 2 * math.atan(50.0)),
    (lambda u: np.exp(-0.5 * u * u) / math.sqrt(2 * math.pi), -8.0, 8.0, math.erf(8 / math.sqrt(2))),
    (np.sqrt, 0.0, 1.0, 2.0 / 3.0),
])
def test_against_closed_forms(f, a, b, exact):
    val, err = integrate(f, a, b)
    assert val == pytest.approx(exact, rel=1e-10)
    assert err <= 1e-10 * abs(exact) + 1e-14


def test_reversed_and_empty_intervals():
    v, _ = integrate(np.cos, 1.0, 0.0)
    assert v == pytest.approx(-math.sin(1.0), rel=1e-12)
    assert integrate(np.cos, 2.0, 2.0) == (0.0, 0.0)


def test_matches_scipy_quad():
    from scipy.integrate import quad

    f = lambda u: np.exp(-((u - 0.3) ** 2) / 0.02) * np.cos(3 * u)  # noqa: E731
    ours, _ = integrate(f, -2.0, 2.0)
    ref, _ = quad(f, -2.0, 2.0, epsabs=1e-14, epsrel=1e-12, limit=200)
    assert ours == pytest.approx(ref, rel=1e-10)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_integrand_raises():
    with pytest.raises(QuadratureError):
        integrate(lambda u: 1.0 / u, -1.0, 1.0)


def test_subinterval_cap_raises():
    with pytest.raises(QuadratureError):
        integrate(lambda u: np.sign(u - 1 / 3), 0.0, 1.0, rel_tol=0.0, abs_tol=0.0, max_subintervals=64)
