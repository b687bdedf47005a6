"""Euler-Maruyama simulation of the closed-loop dynamics under volatility scenarios.

G-Brownian motion is approximated by a finite family of volatility paths
``sigma_t`` with ``sigma_t^2`` in ``[sigma_lower_sq, sigma_upper_sq]``; lower and
upper expectations are the min and max of per-scenario Monte Carlo means. A finite
family is an inner approximation: the reported upper value can only under-estimate
the true sublinear expectation (and the lower value over-estimate its lower
counterpart).

Randomness is drawn per block of ``PATH_BLOCK`` paths from a Philox stream keyed by
``(seed, block index)``, in chunks of ``NOISE_CHUNK`` steps; blocks are the unit of
parallel work and the state update is elementwise, so results are
bitwise identical for any worker count. All scenarios of one estimate share the
seed (common random numbers).
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import (
    HorizonTooShortError,
    InvalidParameterError,
    NotAdmissibleError,
)
from .lq import (
    GaussianPolicy,
    HjbCoefficients,
    exploratory_value,
    well_posedness_margin,
)
from .model import AgentParams, AmbiguityBounds, ModelParams
from .stability import (
    StabilityCoefficients,
    check_admissibility,
    dominating_bound,
    stability_coefficients,
)

logger = logging.getLogger(__name__)

PATH_BLOCK = 1024
NOISE_CHUNK = 128
WORKERS_ENV = "KNIGHTLQ_WORKERS"
_FEAS_RTOL = 1e-12


def n_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            logger.warning("ignoring non-integer %s=%r", WORKERS_ENV, raw)
    return os.cpu_count() or 1


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Counter-based stream for paths ``[block*PATH_BLOCK, (block+1)*PATH_BLOCK)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(block),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class VolatilityScenario:
    """A deterministic volatility path ``t -> sigma_t``.

    ``values`` are volatility multipliers (not variances). For the piecewise kind,
    ``values[i]`` applies on ``[breakpoints[i-1], breakpoints[i])``.
    """

    kind: str
    values: Tuple[float, ...]
    breakpoints: Tuple[float, ...] = ()
    label: str = ""

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        bps = tuple(float(t) for t in self.breakpoints)
        if self.kind not in ("constant", "piecewise"):
            raise InvalidParameterError(f"unknown scenario kind {self.kind!r}")
        if any(not (math.isfinite(v) and v > 0) for v in vals):
            raise InvalidParameterError("volatility multipliers must be finite and > 0")
        if self.kind == "constant" and (len(vals) != 1 or bps):
            raise InvalidParameterError("a constant scenario has one value and no breakpoints")
        if self.kind == "piecewise":
            if len(vals) != len(bps) + 1:
                raise InvalidParameterError("piecewise scenario needs len(values) == len(breakpoints) + 1")
            if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
                raise InvalidParameterError("breakpoints must be strictly increasing")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "breakpoints", bps)
        if not self.label:
            object.__setattr__(self, "label", self._default_label())

    def _default_label(self):
        if self.kind == "constant":
            return f"constant({self.values[0]:.6g})"
        return f"piecewise[{len(self.values)}]"

    @classmethod
    def constant(cls, sigma: float, label: str = "") -> "VolatilityScenario":
        return cls("constant", (sigma,), (), label)

    @classmethod
    def lower(cls, b: AmbiguityBounds) -> "VolatilityScenario":
        return cls.constant(b.sigma_lower, "lower")

    @classmethod
    def upper(cls, b: AmbiguityBounds) -> "VolatilityScenario":
        return cls.constant(b.sigma_upper, "upper")

    @classmethod
    def random_piecewise(cls, b: AmbiguityBounds, horizon: float, dt: float, n_pieces: int,
                         rng: np.random.Generator, label: str = "") -> "VolatilityScenario":
        """Variances uniform on the interval, breakpoints on distinct grid times."""
        n_steps = int(round(horizon / dt))
        n_pieces = max(1, min(int(n_pieces), n_steps))
        cuts = np.sort(rng.choice(np.arange(1, n_steps), size=n_pieces - 1, replace=False)) if n_pieces > 1 else []
        variances = rng.uniform(b.sigma_lower_sq, b.sigma_upper_sq, size=n_pieces)
        return cls("piecewise", tuple(np.sqrt(variances)), tuple(np.asarray(cuts) * dt), label)

    def sigma_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full_like(t, self.values[0])
        idx = np.searchsorted(np.asarray(self.breakpoints), t, side="right")
        return np.asarray(self.values)[idx]

    def check_feasible(self, b: AmbiguityBounds):
        for v in self.values:
            v2 = v * v
            lo = b.sigma_lower_sq * (1 - _FEAS_RTOL)
            hi = b.sigma_upper_sq * (1 + _FEAS_RTOL)
            if not lo <= v2 <= hi:
                raise InvalidParameterError(
                    f"scenario {self.label}: sigma^2 = {v2} outside [{b.sigma_lower_sq}, {b.sigma_upper_sq}]"
                )

    @property
    def is_lower_extreme(self):
        return self.kind == "constant" and self.label == "lower"


def default_scenarios(b: AmbiguityBounds, horizon: float, dt: float, n_random: int = 8,
                      seed: int = 0, n_pieces: int = 4) -> List[VolatilityScenario]:
    """Both constant extremes plus ``n_random`` random piecewise-constant paths."""
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(0x5CE,)))
    out = [VolatilityScenario.lower(b), VolatilityScenario.upper(b)]
    for i in range(n_random):
        out.append(VolatilityScenario.random_piecewise(b, horizon, dt, n_pieces, rng, f"random{i}"))
    return out


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    horizon: float = 20.0
    n_paths: int = 10_000
    seed: int = 0
    record_every: int = 1

    def __post_init__(self):
        if not (self.dt > 0 and self.horizon > 0 and self.dt <= self.horizon):
            raise InvalidParameterError(f"need 0 < dt <= horizon, got dt={self.dt}, horizon={self.horizon}")
        if int(self.n_paths) < 1:
            raise InvalidParameterError("n_paths must be >= 1")
        if int(self.record_every) < 1:
            raise InvalidParameterError("record_every must be >= 1")
        steps = self.horizon / self.dt
        if abs(steps - round(steps)) > 1e-9 * steps:
            logger.warning("horizon/dt = %r is not an integer; rounding the step count", steps)

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


@dataclass
class PathEnsemble:
    times: np.ndarray
    states: np.ndarray
    actions: Optional[np.ndarray]
    scenario: VolatilityScenario
    diverged: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    @property
    def terminal(self) -> np.ndarray:
        return self.states[:, -1]

    def to_csv(self, fh=None) -> Optional[str]:
        """Write ``time,path_id,state,action`` rows; returns text when ``fh`` is None."""
        own = fh is None
        buf = io.StringIO() if own else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "path_id", "state", "action"])
        acts = self.actions
        for p in range(self.n_paths):
            for j, t in enumerate(self.times):
                a = repr(float(acts[p, j])) if acts is not None else ""
                w.writerow([repr(float(t)), p, repr(float(self.states[p, j])), a])
        return buf.getvalue() if own else None


def _linear_closed_loop(coeffs, m, b):
    den = well_posedness_margin(coeffs.k2, m, b)
    gain = (coeffs.k2 * (m.F + m.C * m.D * b.sigma_upper_sq) - m.I) / den
    offset = (coeffs.k1 * m.F - m.Q) / den
    return gain, offset, den


def _draw(rngs, sizes, shape_fn, workers):
    def one(i):
        return rngs[i].standard_normal(shape_fn(sizes[i]))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(one, range(len(rngs))))
    else:
        parts = [one(i) for i in range(len(rngs))]
    return np.concatenate(parts, axis=-1)


def _simulate(x0, sc, scenario, cfg, gain=None, offset=0.0, action_std=0.0, record=True,
              running=None, discount=0.0):
    n_paths = int(cfg.n_paths)
    n_blocks = -(-n_paths // PATH_BLOCK)
    sizes = [min(PATH_BLOCK, n_paths - i * PATH_BLOCK) for i in range(n_blocks)]
    rngs = [block_rng(cfg.seed, i) for i in range(n_blocks)]
    workers = min(n_workers(), n_blocks)
    n_steps, dt = cfg.n_steps, cfg.dt
    sqdt = math.sqrt(dt)
    sig = scenario.sigma_at(np.arange(n_steps) * dt)
    # per step each block draws xi, then z when the policy is random; drawing a
    # (steps, k, n) array consumes the stream in exactly that order
    k = 2 if action_std > 0 else 1

    rec_idx = np.arange(0, n_steps + 1, cfg.record_every)
    if rec_idx[-1] != n_steps:
        rec_idx = np.append(rec_idx, n_steps)
    states = np.empty((n_paths, rec_idx.size)) if record else None
    actions = np.empty((n_paths, rec_idx.size)) if (record and gain is not None) else None
    acc = np.zeros(n_paths) if running is not None else None
    if running is not None:
        t = np.arange(n_steps) * dt
        # exact integral of exp(-discount s) over each step
        w = -math.expm1(-discount * dt) / discount if discount > 0 else dt
        weights = np.exp(-discount * t) * w

    x = np.full(n_paths, float(x0))
    r = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for s0 in range(0, n_steps, NOISE_CHUNK):
            s1 = min(s0 + NOISE_CHUNK, n_steps)
            noise = _draw(rngs, sizes, lambda n: (s1 - s0, k, n), workers)
            for j in range(s1 - s0):
                step = s0 + j
                xi = noise[j, 0]
                if record and rec_idx[r] == step:
                    states[:, r] = x
                    if actions is not None:
                        actions[:, r] = gain * x + offset + (action_std * noise[j, 1] if k == 2 else 0.0)
                    r += 1
                if running is not None:
                    acc += weights[step] * running(x)
                vol = np.sqrt((sc.B1 * x + sc.B2) ** 2 + sc.C1)
                x = x + (sc.A1 * x + sc.A2) * dt + vol * (sig[step] * sqdt) * xi
        if record:
            states[:, r] = x
            if actions is not None:
                extra = action_std * _draw(rngs, sizes, lambda n: n, workers) if k == 2 else 0.0
                actions[:, r] = gain * x + offset + extra

    diverged = ~np.isfinite(x)
    if record:
        diverged |= ~np.all(np.isfinite(states), axis=1)
    if diverged.any():
        logger.warning("%d of %d paths blew up (non-finite state) under scenario %s",
                       int(diverged.sum()), n_paths, scenario.label)
    return states, actions, acc, diverged


def _recorded_times(cfg):
    idx = np.arange(0, cfg.n_steps + 1, cfg.record_every)
    if idx[-1] != cfg.n_steps:
        idx = np.append(idx, cfg.n_steps)
    return idx * cfg.dt


def simulate_exploratory(x0: float, coeffs: HjbCoefficients, m: ModelParams, b: AmbiguityBounds,
                         agent: AgentParams, scenario: VolatilityScenario,
                         cfg: SimConfig) -> PathEnsemble:
    """Paths of the exploratory closed loop under the Gaussian optimal policy.

    The state follows the relaxed coefficients; ``actions`` are draws from the
    policy at the recorded states, kept for inspection and export.
    """
    scenario.check_feasible(b)
    sc = stability_coefficients(coeffs, m, b, agent.lam, exploratory=True)
    if not check_admissibility(agent.rho, sc).admissible:
        logger.warning("rho=%g <= alpha=%g: transversality is not guaranteed", agent.rho, sc.alpha)
    gain, offset, den = _linear_closed_loop(coeffs, m, b)
    states, actions, _, diverged = _simulate(x0, sc, scenario, cfg, gain, offset,
                                             math.sqrt(agent.lam / den))
    return PathEnsemble(_recorded_times(cfg), states, actions, scenario, diverged)


def simulate_classical(x0: float, coeffs: HjbCoefficients, m: ModelParams, b: AmbiguityBounds,
                       scenario: VolatilityScenario, cfg: SimConfig) -> PathEnsemble:
    """Paths under the deterministic feedback ``u*(x)`` (no exploration noise)."""
    scenario.check_feasible(b)
    sc = stability_coefficients(coeffs, m, b, 0.0, exploratory=False)
    gain, offset, _ = _linear_closed_loop(coeffs, m, b)
    states, actions, _, diverged = _simulate(x0, sc, scenario, cfg, gain, offset, 0.0)
    return PathEnsemble(_recorded_times(cfg), states, actions, scenario, diverged)


def simulate_g_brownian(scenario: VolatilityScenario, cfg: SimConfig, x0: float = 0.0) -> PathEnsemble:
    """Paths of ``dB = sigma_t dW`` started at ``x0``."""
    sc = StabilityCoefficients(0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, False)
    states, _, _, diverged = _simulate(x0, sc, scenario, cfg)
    return PathEnsemble(_recorded_times(cfg), states, None, scenario, diverged)


@dataclass(frozen=True)
class ExpectationEstimate:
    lower: float
    upper: float
    means: Tuple[float, ...]
    stderrs: Tuple[float, ...]
    labels: Tuple[str, ...]

    def stderr_of(self, label: str) -> float:
        return self.stderrs[self.labels.index(label)]

    def mean_of(self, label: str) -> float:
        return self.means[self.labels.index(label)]


def _require_extremes(scenarios, b):
    if len(scenarios) < 2:
        raise InvalidParameterError("need at least two scenarios")
    if b is None:
        return
    have_lo = have_hi = False
    for s in scenarios:
        s.check_feasible(b)
        if s.kind == "constant":
            v2 = s.values[0] ** 2
            have_lo |= math.isclose(v2, b.sigma_lower_sq, rel_tol=_FEAS_RTOL)
            have_hi |= math.isclose(v2, b.sigma_upper_sq, rel_tol=_FEAS_RTOL)
    if not (have_lo and have_hi):
        raise InvalidParameterError("scenario set must contain both constant extremes")


def _mean_se(values):
    values = np.asarray(values, dtype=float)
    n = values.size
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    return mean, se


def estimate_lower_expectation(functional: Callable[[PathEnsemble], np.ndarray],
                               scenarios: Sequence[VolatilityScenario],
                               simulate: Callable[[VolatilityScenario, SimConfig], PathEnsemble],
                               cfg: SimConfig, bounds: Optional[AmbiguityBounds] = None
                               ) -> ExpectationEstimate:
    """Lower/upper expectation of a path functional over a scenario family.

    ``functional`` maps an ensemble to one value per path (scalars broadcast).
    """
    if not scenarios:
        raise InvalidParameterError("empty scenario set")
    _require_extremes(list(scenarios), bounds)
    means, ses = [], []
    for s in scenarios:
        ens = simulate(s, cfg)
        vals = np.broadcast_to(np.asarray(functional(ens), dtype=float), (ens.n_paths,))
        mu, se = _mean_se(vals)
        means.append(mu)
        ses.append(se)
    return ExpectationEstimate(min(means), max(means), tuple(means), tuple(ses),
                               tuple(s.label for s in scenarios))


@dataclass(frozen=True)
class RewardEstimate(ExpectationEstimate):
    value: float = float("nan")
    entropy_integral: float = float("nan")
    truncation_bound: float = float("nan")

    @property
    def relative_error(self) -> float:
        return abs(self.lower - self.value) / abs(self.value)


def estimate_discounted_reward(x0: float, coeffs: HjbCoefficients, m: ModelParams,
                               b: AmbiguityBounds, agent: AgentParams,
                               scenarios: Sequence[VolatilityScenario], cfg: SimConfig,
                               check_horizon: bool = True) -> RewardEstimate:
    """Monte Carlo of ``int e^{-rho t} (r~ + lam H) dt`` under each scenario.

    The running reward is averaged exactly over the Gaussian policy, and each
    step is weighted by the exact integral of the discount factor over it.
    ``lower`` is the value comparable to ``V(x0)``.
    """
    if not scenarios:
        raise InvalidParameterError("empty scenario set")
    for s in scenarios:
        s.check_feasible(b)
    sc = stability_coefficients(coeffs, m, b, agent.lam, exploratory=True)
    adm = check_admissibility(agent.rho, sc)
    if not adm.admissible:
        raise NotAdmissibleError(f"rho={agent.rho} <= alpha={sc.alpha}")
    value = exploratory_value(x0, coeffs)
    tail = math.exp(-agent.rho * cfg.horizon) * dominating_bound(cfg.horizon, x0, sc)
    if check_horizon and not tail < 0.01 * abs(value):
        raise HorizonTooShortError(
            f"e^(-rho T) Y_T = {tail:.4g} is not below 1% of |V(x0)| = {abs(value):.4g}; "
            "increase the horizon"
        )

    gain, offset, den = _linear_closed_loop(coeffs, m, b)
    var = agent.lam / den
    ent = 0.5 * math.log(2 * math.pi * math.e * var)

    def running(x):
        mu = gain * x + offset
        r = -(0.5 * m.M * x * x + m.I * x * mu + 0.5 * m.K * (mu * mu + var) + m.P * x + m.Q * mu)
        return r + agent.lam * ent

    means, ses = [], []
    for s in scenarios:
        _, _, acc, _ = _simulate(x0, sc, s, cfg, record=False, running=running, discount=agent.rho)
        mu, se = _mean_se(acc)
        means.append(mu)
        ses.append(se)
    ent_int = agent.lam * ent * (-math.expm1(-agent.rho * cfg.horizon)) / agent.rho
    return RewardEstimate(min(means), max(means), tuple(means), tuple(ses),
                          tuple(s.label for s in scenarios), value=value,
                          entropy_integral=ent_int, truncation_bound=tail)


def sample_action(policy: GaussianPolicy, rng: np.random.Generator, size=None):
    """``mean + std * xi`` with ``xi`` standard normal; the Dirac policy returns the mean."""
    if policy.is_dirac:
        return policy.mean if size is None else np.full(size, policy.mean)
    xi = rng.standard_normal(size)
    return policy.mean + policy.std * xi


@dataclass(frozen=True)
class LLNReport:
    drift_mean: float
    drift_interval: Tuple[float, float]
    square_mean: float
    square_interval: Tuple[float, float]
    drift_ok: bool
    square_ok: bool

    @property
    def passed(self) -> bool:
        return self.drift_ok and self.square_ok


def empirical_lln(x0: float, theta: GaussianPolicy, m: ModelParams, b: AmbiguityBounds,
                  N: int, dt: float, scenario: str = "mixed", seed: int = 0,
                  n_se: float = 4.0) -> LLNReport:
    """Check one-step averages of ``N`` independent copies against the relaxed intervals.

    Each copy samples an action from ``theta`` and a Gaussian increment scaled by
    its own volatility: the lower or upper extreme, or (``"mixed"``) a variance
    drawn uniformly from the interval. The averages of ``dx`` and ``dx^2`` must
    lie in ``[b~ dt]`` and ``[E b^2 dt^2 + sl^2 s~^2 dt, E b^2 dt^2 + su^2 s~^2 dt]``
    widened by ``n_se`` standard errors.
    """
    if N < 100:
        raise InvalidParameterError("N must be >= 100")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(0x11,)))
    u = sample_action(theta, rng, N)
    if scenario == "mixed":
        var = rng.uniform(b.sigma_lower_sq, b.sigma_upper_sq, N)
    elif scenario in ("lower", "upper"):
        var = np.full(N, b.sigma_lower_sq if scenario == "lower" else b.sigma_upper_sq)
    else:
        raise InvalidParameterError(f"unknown scenario {scenario!r}")
    xi = rng.standard_normal(N)
    bu = m.A * x0 + m.F * u
    su = m.C * x0 + m.D * u
    dx = bu * dt + su * np.sqrt(var * dt) * xi

    mu, s2 = theta.mean, theta.variance
    b_rel = m.A * x0 + m.F * mu
    b2_rel = b_rel**2 + m.F**2 * s2
    vol2_rel = (m.C * x0 + m.D * mu) ** 2 + m.D**2 * s2

    d_mean, d_se = _mean_se(dx)
    q_mean, q_se = _mean_se(dx * dx)
    d_lo, d_hi = b_rel * dt - n_se * d_se, b_rel * dt + n_se * d_se
    q_lo = b2_rel * dt * dt + b.sigma_lower_sq * vol2_rel * dt - n_se * q_se
    q_hi = b2_rel * dt * dt + b.sigma_upper_sq * vol2_rel * dt + n_se * q_se
    return LLNReport(d_mean, (d_lo, d_hi), q_mean, (q_lo, q_hi),
                     d_lo <= d_mean <= d_hi, q_lo <= q_mean <= q_hi)
