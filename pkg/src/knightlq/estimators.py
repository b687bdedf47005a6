"""scikit-learn style wrappers around the bounds estimator and the LQ policy."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from .estimation import BatchedSamples, estimate_bounds
from .exceptions import InvalidParameterError
from .lq import exploratory_value, non_exploratory_value, optimal_policy, solve_hjb
from .model import REFERENCE_MODEL, AgentParams, AmbiguityBounds, ModelParams
from .stability import check_admissibility, stability_coefficients


def _column(X, name="X"):
    X = check_array(X, ensure_2d=False, dtype=np.float64)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"{name} must be 1-D or a single column, got shape {X.shape}")
        X = X[:, 0]
    return X


class BatchVarianceBounds(BaseEstimator):
    """Max-mean estimate of the volatility interval from a 1-D sample.

    Parameters
    ----------
    n_batches : int
        Number of equal consecutive batches ``m``; trailing observations that do
        not fill a batch are dropped.

    Attributes
    ----------
    sigma_lower_sq_, sigma_upper_sq_ : float
    batch_variances_ : ndarray of shape (n_batches,)
    n_discarded_ : int
    degenerate_ : bool
    """

    def __init__(self, n_batches=10):
        self.n_batches = n_batches

    def fit(self, X, y=None):
        data = _column(X)
        est = estimate_bounds(BatchedSamples.from_batch_count(data, self.n_batches))
        self.sigma_lower_sq_ = est.lower
        self.sigma_upper_sq_ = est.upper
        self.batch_variances_ = np.asarray(est.batch_variances)
        self.n_discarded_ = est.n_discarded
        self.degenerate_ = est.degenerate
        self.n_features_in_ = 1
        return self

    def to_bounds(self) -> AmbiguityBounds:
        check_is_fitted(self, "sigma_upper_sq_")
        return AmbiguityBounds(self.sigma_lower_sq_, self.sigma_upper_sq_)


class ExploratoryLQPolicy(BaseEstimator):
    """Optimal Gaussian exploration policy for the LQ problem.

    The volatility interval is taken from ``sigma_lower_sq``/``sigma_upper_sq``
    when both are set; otherwise ``fit`` estimates it from ``X`` (a 1-D sample of
    unit-time increments) with :class:`BatchVarianceBounds`. After fitting,
    ``predict`` returns the policy mean at each state and ``sample`` draws actions.
    Model defaults are the ``REFERENCE_MODEL`` parameters.
    """

    def __init__(self, A=REFERENCE_MODEL.A, F=REFERENCE_MODEL.F, C=REFERENCE_MODEL.C, D=REFERENCE_MODEL.D, M=REFERENCE_MODEL.M,
                 I=REFERENCE_MODEL.I, K=REFERENCE_MODEL.K, P=REFERENCE_MODEL.P, Q=REFERENCE_MODEL.Q,
                 sigma_lower_sq=None, sigma_upper_sq=None, lam=0.6, rho=0.3,
                 form="printed", root="smallest", n_batches=10):
        self.A = A
        self.F = F
        self.C = C
        self.D = D
        self.M = M
        self.I = I
        self.K = K
        self.P = P
        self.Q = Q
        self.sigma_lower_sq = sigma_lower_sq
        self.sigma_upper_sq = sigma_upper_sq
        self.lam = lam
        self.rho = rho
        self.form = form
        self.root = root
        self.n_batches = n_batches

    def _model(self):
        return ModelParams(A=self.A, F=self.F, C=self.C, D=self.D, M=self.M,
                           I=self.I, K=self.K, P=self.P, Q=self.Q)

    def fit(self, X=None, y=None):
        self.model_ = self._model()
        if self.sigma_lower_sq is not None and self.sigma_upper_sq is not None:
            self.bounds_ = AmbiguityBounds(self.sigma_lower_sq, self.sigma_upper_sq)
        elif X is None:
            raise InvalidParameterError("give sigma_lower_sq and sigma_upper_sq, or data to estimate them")
        else:
            self.bounds_estimator_ = BatchVarianceBounds(self.n_batches).fit(X)
            self.bounds_ = self.bounds_estimator_.to_bounds()
        self.agent_ = AgentParams(self.lam, self.rho)
        self.coeffs_ = solve_hjb(self.model_, self.bounds_, self.agent_, form=self.form, root=self.root)
        self.stability_ = stability_coefficients(self.coeffs_, self.model_, self.bounds_, self.lam)
        self.admissible_ = check_admissibility(self.rho, self.stability_).admissible
        self.variance_ = optimal_policy(0.0, self.coeffs_, self.model_, self.bounds_, self.lam).variance
        return self

    def _states(self, X):
        check_is_fitted(self, "coeffs_")
        return _column(X)

    def predict(self, X):
        """Policy mean ``mu(x)`` for each state."""
        x = self._states(X)
        return np.array([optimal_policy(xi, self.coeffs_, self.model_, self.bounds_, self.lam).mean
                         for xi in x])

    def predict_variance(self, X):
        x = self._states(X)
        return np.full(x.shape, self.variance_)

    def sample(self, X, random_state=None):
        """One action per state drawn from the Gaussian policy."""
        rng = check_random_state(random_state)
        mean = self.predict(X)
        return mean + np.sqrt(self.variance_) * rng.standard_normal(mean.shape)

    def value(self, X):
        return np.asarray(exploratory_value(self._states(X), self.coeffs_), dtype=float)

    def non_exploratory_value(self, X):
        return np.asarray(non_exploratory_value(self._states(X), self.coeffs_, self.model_,
                                                self.bounds_, self.agent_), dtype=float)
