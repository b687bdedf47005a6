"""Exploratory (entropy-regularized) LQ control under volatility ambiguity."""

from .config import VerificationConfig, load_config, parse_config
from .estimation import BatchedSamples, BoundsEstimate, batch_variance, estimate_bounds
from .estimators import BatchVarianceBounds, ExploratoryLQPolicy
from .exceptions import (
    ConfigError,
    DegenerateError,
    DomainError,
    HorizonTooShortError,
    IllPosedPolicyError,
    InvalidParameterError,
    KnightLQError,
    MultipleRootsError,
    NoSolutionError,
    NotAdmissibleError,
    QuadratureError,
)
from .harness import VerificationReport, run_mode, run_mode_a, run_mode_b, run_mode_c, run_mode_d
from .lq import (
    GaussianPolicy,
    HjbCoefficients,
    compute_k0,
    compute_k1,
    exploratory_value,
    non_exploratory_control,
    non_exploratory_value,
    optimal_policy,
    solve_hjb,
    solve_k2,
)
from .model import REFERENCE_MODEL, AgentParams, AmbiguityBounds, ModelParams, g_tilde
from .normality import ad_test, ks_test
from .relaxed import PolicyDensity, boltzmann_policy, entropy, hjb_maximum
from .simulation import (
    PathEnsemble,
    SimConfig,
    VolatilityScenario,
    default_scenarios,
    empirical_lln,
    estimate_discounted_reward,
    estimate_lower_expectation,
    simulate_classical,
    simulate_exploratory,
    simulate_g_brownian,
)
from .stability import (
    check_admissibility,
    dominating_bound,
    exploration_cost,
    stability_coefficients,
    value_gap,
)

__version__ = "0.1.0"
