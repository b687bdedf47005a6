"""Batch max-mean estimation of the volatility-uncertainty interval.

Data are cut into ``m`` consecutive batches of ``n`` observations, a variance is
computed per batch (divisor ``n``), and the interval is ``[min, max]`` over batches.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, InvalidParameterError
from .model import AmbiguityBounds

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BatchedSamples:
    data: np.ndarray
    m: int
    n: int

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float).ravel()
        if not np.all(np.isfinite(data)):
            raise DomainError("sample data contains non-finite values")
        m, n = int(self.m), int(self.n)
        if m < 2 or n < 2:
            raise InvalidParameterError(f"need m >= 2 and n >= 2, got m={m}, n={n}")
        if m * n > data.size:
            raise InvalidParameterError(
                f"m*n = {m * n} exceeds the number of observations ({data.size})"
            )
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "n", n)

    @classmethod
    def from_batch_count(cls, data, m: int) -> "BatchedSamples":
        """Use the largest per-batch size that fits ``m`` batches."""
        data = np.asarray(data, dtype=float).ravel()
        return cls(data, m, data.size // max(int(m), 1))

    @property
    def n_discarded(self) -> int:
        return self.data.size - self.m * self.n

    def batches(self) -> np.ndarray:
        """``(m, n)`` view of the used observations, in data order."""
        return self.data[: self.m * self.n].reshape(self.m, self.n)


@dataclass(frozen=True)
class BoundsEstimate:
    lower: float
    upper: float
    batch_variances: np.ndarray
    n_discarded: int = 0
    degenerate: bool = False

    def to_bounds(self) -> AmbiguityBounds:
        """Raises ``InvalidParameterError`` for a degenerate (zero lower) estimate."""
        return AmbiguityBounds(self.lower, self.upper)


def batch_variance(batch) -> float:
    x = np.asarray(batch, dtype=float).ravel()
    if x.size < 2:
        raise InvalidParameterError(f"batch needs at least 2 observations, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DomainError("batch contains non-finite values")
    return float(np.mean((x - x.mean()) ** 2))


def estimate_bounds(s: BatchedSamples) -> BoundsEstimate:
    if s.n_discarded:
        logger.info("discarding %d trailing observations beyond m*n", s.n_discarded)
    batches = s.batches()
    mu = batches.mean(axis=1, keepdims=True)
    variances = np.mean((batches - mu) ** 2, axis=1)
    lower, upper = float(variances.min()), float(variances.max())
    degenerate = lower <= 0.0
    if degenerate:
        logger.warning("estimated lower variance is zero; at least one batch is constant")
    return BoundsEstimate(lower, upper, variances, s.n_discarded, degenerate)
