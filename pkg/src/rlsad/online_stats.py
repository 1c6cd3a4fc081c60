"""Welford running mean/variance and Z-scores of the prediction error."""
from __future__ import annotations

import math
from collections import deque
from itertools import islice

from rlsad.errors import ConfigError, NonFiniteSampleError, UndefinedStatisticsError

__all__ = ["RunningStats"]


class RunningStats:
    """Single-pass mean and variance.

    Besides ``n``, ``mean`` and ``m2`` the instance keeps the relative change
    of the sample variance for the most recent ``history`` updates, which is
    what :meth:`is_variance_stable` inspects.
    """

    def __init__(self, history: int = 256):
        if history < 2:
            raise ConfigError("history must be >= 2")
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0
        self._changes: deque[float] = deque(maxlen=history)

    def update(self, x: float) -> None:
        if not math.isfinite(x):
            raise NonFiniteSampleError(f"non-finite value {x!r} rejected")
        old_var = self.sample_variance if self.n >= 2 else None

        self.n += 1
        old_mean = self.mean
        self.mean = old_mean + (x - old_mean) / self.n
        self.m2 = self.m2 + (x - old_mean) * (x - self.mean)

        if old_var is None or old_var == 0.0:
            self._changes.append(math.inf)
        else:
            self._changes.append(abs(self.sample_variance - old_var) / old_var)

    @property
    def sample_variance(self) -> float:
        """s^2 = M2 / (n - 1); NaN below two samples."""
        if self.n < 2:
            return math.nan
        return self.m2 / (self.n - 1)

    @property
    def population_variance(self) -> float:
        if self.n < 1:
            return math.nan
        return self.m2 / self.n

    @property
    def std(self) -> float:
        return math.sqrt(self.sample_variance)

    def z_score(self, x: float) -> float:
        """|x - mean| / s using the sample standard deviation."""
        if self.n < 2 or self.m2 <= 0.0:
            raise UndefinedStatisticsError(
                f"z-score undefined with n={self.n}, m2={self.m2}"
            )
        return abs(x - self.mean) / self.std

    def is_variance_stable(self, window: int = 50, rel_tol: float = 0.05) -> bool:
        """True iff each of the last ``window`` updates changed s^2 by < rel_tol."""
        if window < 2:
            raise ConfigError("window must be >= 2")
        if window > self._changes.maxlen:
            raise ConfigError(
                f"window {window} exceeds tracked history {self._changes.maxlen}"
            )
        if self.n < window or len(self._changes) < window:
            return False
        return all(c < rel_tol for c in islice(reversed(self._changes), window))

    def copy(self) -> "RunningStats":
        other = RunningStats(self._changes.maxlen)
        other.n, other.mean, other.m2 = self.n, self.mean, self.m2
        other._changes.extend(self._changes)
        return other

    def __repr__(self):
        return f"RunningStats(n={self.n}, mean={self.mean!r}, m2={self.m2!r})"
