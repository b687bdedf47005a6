import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from knightlq.estimators import BatchVarianceBounds, ExploratoryLQPolicy
from knightlq.exceptions import InvalidParameterError
from knightlq.lq import optimal_policy, solve_hjb
from knightlq.model import REFERENCE_MODEL, AgentParams, AmbiguityBounds


def test_bounds_estimator_matches_function():
    data = np.random.default_rng(0).normal(0, 0.7, 10_007)
    est = BatchVarianceBounds(n_batches=10).fit(data.reshape(-1, 1))
    assert est.sigma_lower_sq_ <= 0.49 <= est.sigma_upper_sq_
    assert est.n_discarded_ == 7
    assert est.batch_variances_.shape == (10,)
    assert est.to_bounds().sigma_upper_sq == est.sigma_upper_sq_


def test_bounds_estimator_input_validation():
    with pytest.raises(ValueError):
        BatchVarianceBounds().fit(np.zeros((10, 2)))
    with pytest.raises(ValueError):
        BatchVarianceBounds().fit([1.0, np.nan, 2.0])
    with pytest.raises(NotFittedError):
        BatchVarianceBounds().to_bounds()


def test_policy_estimator_params_and_clone():
    est = ExploratoryLQPolicy(sigma_lower_sq=0.01, sigma_upper_sq=1.0, rho=1.5)
    params = est.get_params()
    assert params["rho"] == 1.5 and params["K"] == REFERENCE_MODEL.K
    twin = clone(est).set_params(rho=0.1)
    assert twin.rho == 0.1 and est.rho == 1.5


def test_policy_estimator_predictions():
    est = ExploratoryLQPolicy(sigma_lower_sq=0.01, sigma_upper_sq=1.0).fit()
    b = AmbiguityBounds(0.01, 1.0)
    c = solve_hjb(REFERENCE_MODEL, b, AgentParams(0.6, 0.3))
    xs = np.array([-1.0, 0.0, 2.0])
    pol = [optimal_policy(x, c, REFERENCE_MODEL, b, 0.6) for x in xs]
    np.testing.assert_allclose(est.predict(xs), [p.mean for p in pol], rtol=0, atol=1e-15)
    np.testing.assert_allclose(est.predict_variance(xs[:, None]), [p.variance for p in pol])
    assert est.admissible_
    a = est.sample(xs, random_state=4)
    assert np.array_equal(a, est.sample(xs, random_state=4))
    assert est.value([1.0])[0] == pytest.approx(0.5 * c.k2 + c.k1 + c.k0)
    gap = est.value(xs) - est.non_exploratory_value(xs)
    np.testing.assert_allclose(gap, gap[0], atol=1e-12)


def test_policy_estimator_from_data():
    data = np.random.default_rng(1).normal(0, 0.8, 5000)
    est = ExploratoryLQPolicy(n_batches=5).fit(data)
    assert est.bounds_.sigma_lower_sq <= 0.64 <= est.bounds_.sigma_upper_sq
    with pytest.raises(InvalidParameterError):
        ExploratoryLQPolicy().fit()


def test_policy_estimator_not_fitted():
    with pytest.raises(NotFittedError):
        ExploratoryLQPolicy().predict([0.0])
