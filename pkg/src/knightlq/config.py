"""Verification config files.

INI-style text with four sections::

    [model]      A F C D M I K P Q
    [ambiguity]  sigma_lower_sq, and sigma_upper_sq or sigma_upper_grid
    [agent]      lambda or lambda_grid, rho or rho_grid
    [test]       x_test epsilon N

Grids are comma-separated. ``sigma_upper_grid`` lists volatilities (the
``sigma_upper`` values that figures are labelled with), which are squared on
load; ``sigma_upper_sq`` is a variance. Unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

from .exceptions import ConfigError
from .model import AgentParams, AmbiguityBounds, ModelParams

MODEL_KEYS = ("A", "F", "C", "D", "M", "I", "K", "P", "Q")
_ALLOWED = {
    "model": set(MODEL_KEYS),
    "ambiguity": {"sigma_lower_sq", "sigma_upper_sq", "sigma_upper_grid"},
    "agent": {"lambda", "lambda_grid", "rho", "rho_grid"},
    "test": {"x_test", "epsilon", "n"},
}
DEFAULT_EPSILON = 1e-10
DEFAULT_N = 10_000


def _floats(text: str, key: str) -> Tuple[float, ...]:
    try:
        vals = tuple(float(tok) for tok in text.replace(";", ",").split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {text!r} as numbers") from exc
    if not vals:
        raise ConfigError(f"{key}: empty grid")
    if not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"{key}: values must be finite")
    return vals


@dataclass(frozen=True)
class VerificationConfig:
    """Parsed verification settings.

    ``model`` is kept as a raw mapping so that an invalid parameter set can still
    be loaded and reported row by row; use :meth:`model_params` to validate it.
    """

    model: Dict[str, float]
    sigma_lower_sq: float
    sigma_upper_sq_grid: Tuple[float, ...]
    lambda_grid: Tuple[float, ...]
    rho_grid: Tuple[float, ...]
    x_test: float = 1.0
    epsilon: float = DEFAULT_EPSILON
    N: int = DEFAULT_N
    source: str = field(default="", compare=False)

    def __post_init__(self):
        missing = [k for k in MODEL_KEYS if k not in self.model]
        if missing:
            raise ConfigError(f"[model] is missing {', '.join(missing)}")
        for name in ("sigma_upper_sq_grid", "lambda_grid", "rho_grid"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must be non-empty")
        if not self.N >= 100:
            raise ConfigError(f"N must be >= 100, got {self.N}")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")
        if not (self.sigma_lower_sq > 0 and all(v >= self.sigma_lower_sq for v in self.sigma_upper_sq_grid)):
            raise ConfigError("need 0 < sigma_lower_sq <= every sigma_upper_sq")
        if any(r <= 0 for r in self.rho_grid):
            raise ConfigError("rho values must be > 0")
        if any(v < 0 for v in self.lambda_grid):
            raise ConfigError("lambda values must be >= 0")

    def model_params(self) -> ModelParams:
        """Validated model; raises ``InvalidParameterError`` for e.g. ``K <= 0``."""
        return ModelParams(**self.model)

    def bounds(self, sigma_upper_sq: float) -> AmbiguityBounds:
        return AmbiguityBounds(self.sigma_lower_sq, sigma_upper_sq)

    @property
    def lam(self) -> float:
        return self.lambda_grid[0]

    @property
    def rho(self) -> float:
        return self.rho_grid[0]

    def agent(self, lam=None, rho=None) -> AgentParams:
        return AgentParams(self.lam if lam is None else lam, self.rho if rho is None else rho)


def parse_config(text: str, source: str = "<string>") -> VerificationConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep model letters case-sensitive
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    raw = {}
    for sec in cp.sections():
        if sec not in _ALLOWED:
            raise ConfigError(f"{source}: unknown section [{sec}]")
        for key, val in cp.items(sec):
            norm = key if sec == "model" else key.lower()
            if norm not in _ALLOWED[sec]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{sec}]")
            raw[(sec, norm)] = val

    def one(sec, key, default=None):
        if (sec, key) not in raw:
            if default is None:
                raise ConfigError(f"{source}: missing {key} in [{sec}]")
            return default
        vals = _floats(raw[(sec, key)], key)
        if len(vals) != 1:
            raise ConfigError(f"{source}: {key} takes a single value")
        return vals[0]

    def scalar_or_grid(sec, scalar_key, grid_key, transform=lambda v: v):
        has_s, has_g = (sec, scalar_key) in raw, (sec, grid_key) in raw
        if has_s == has_g:
            raise ConfigError(f"{source}: give exactly one of {scalar_key} / {grid_key} in [{sec}]")
        if has_s:
            return (one(sec, scalar_key),)
        return tuple(transform(v) for v in _floats(raw[(sec, grid_key)], grid_key))

    model = {k: one("model", k) for k in MODEL_KEYS}
    su_grid = scalar_or_grid("ambiguity", "sigma_upper_sq", "sigma_upper_grid", lambda v: v * v)
    n_val = one("test", "n", float(DEFAULT_N))
    if n_val != int(n_val):
        raise ConfigError(f"{source}: N must be an integer")
    return VerificationConfig(
        model=model,
        sigma_lower_sq=one("ambiguity", "sigma_lower_sq"),
        sigma_upper_sq_grid=su_grid,
        lambda_grid=scalar_or_grid("agent", "lambda", "lambda_grid"),
        rho_grid=scalar_or_grid("agent", "rho", "rho_grid"),
        x_test=one("test", "x_test", 1.0),
        epsilon=one("test", "epsilon", DEFAULT_EPSILON),
        N=int(n_val),
        source=source,
    )


def load_config(path) -> VerificationConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, source=str(path))

