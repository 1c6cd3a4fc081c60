"""ARX regressors and the recursive least squares estimator.

The model is the monic ARX form

    y(k) + a1 y(k-1) + ... + a_na y(k-na) = b0 u(k) + ... + b_nb u(k-nb) + n(k)

so the coefficient vector is theta = [-a1 .. -a_na, b0 .. b_nb] and the
regressor is phi(k) = [y(k-1) .. y(k-na), u(k), u(k-1) .. u(k-nb)], giving
y(k) = phi(k) . theta + n(k).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from rlsad.errors import ConfigError, NonFiniteSampleError

__all__ = [
    "ArxOrder",
    "RegressorBuffer",
    "RLSEstimator",
    "build_regressor",
    "init_rls",
]


@dataclass(frozen=True)
class ArxOrder:
    """Lag counts of an ARX model: ``na`` past outputs, ``nb`` past inputs."""

    na: int
    nb: int

    def __post_init__(self):
        for name in ("na", "nb"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 0:
                raise ConfigError(f"{name} must be a non-negative integer, got {value!r}")

    @property
    def dim(self) -> int:
        return self.na + self.nb + 1

    @property
    def history(self) -> int:
        """Samples of history needed before the first full regressor."""
        return max(self.na, self.nb)


def build_regressor(y_past, u_window, order: ArxOrder) -> np.ndarray:
    """Stack a regressor from lagged signals.

    ``y_past`` holds y(k-1) .. y(k-na) (most recent first) and ``u_window``
    holds u(k) .. u(k-nb).
    """
    y_past = np.asarray(y_past, dtype=float).ravel()
    u_window = np.asarray(u_window, dtype=float).ravel()
    if y_past.size != order.na or u_window.size != order.nb + 1:
        raise ValueError(
            f"expected {order.na} past outputs and {order.nb + 1} inputs, "
            f"got {y_past.size} and {u_window.size}"
        )
    phi = np.concatenate([y_past, u_window])
    if not np.all(np.isfinite(phi)):
        raise NonFiniteSampleError("regressor contains non-finite entries")
    return phi


class RegressorBuffer:
    """Ring of the most recent inputs/outputs for one channel.

    Call :meth:`regressor` with the current input to get phi(k), then
    :meth:`push` with the current (u, y) once the sample has been used.
    """

    def __init__(self, order: ArxOrder):
        self.order = order
        self._y = np.zeros(order.na)
        self._u = np.zeros(order.nb + 1)
        self.count = 0

    @property
    def primed(self) -> bool:
        return self.count >= self.order.history

    def regressor(self, u: float) -> np.ndarray:
        if not self.primed:
            raise RuntimeError("regressor buffer not primed yet")
        phi = np.empty(self.order.dim)
        na = self.order.na
        phi[:na] = self._y
        phi[na] = u
        phi[na + 1:] = self._u[: self.order.nb]
        return phi

    def push(self, u: float, y: float) -> None:
        if self.order.na:
            self._y[1:] = self._y[:-1]
            self._y[0] = y
        if self.order.nb:
            self._u[1:] = self._u[:-1]
            self._u[0] = u
        self.count += 1

    def clear(self) -> None:
        self._y[:] = 0.0
        self._u[:] = 0.0
        self.count = 0


class RLSEstimator:
    """Recursive least squares for y = phi . theta.

    ``epsilon`` is the threshold on the infinity norm of the parameter step
    used by :meth:`is_stable`; the consecutive-run counter is updated on
    every call to :meth:`update`.
    """

    def __init__(
        self,
        order: ArxOrder,
        cov_scale: float = 1e6,
        forgetting: float = 1.0,
        epsilon: float = 1e-3,
    ):
        if not (math.isfinite(cov_scale) and cov_scale > 0):
            raise ConfigError(f"cov_scale must be positive and finite, got {cov_scale!r}")
        if not (0.0 < forgetting <= 1.0):
            raise ConfigError(f"forgetting factor must lie in (0, 1], got {forgetting!r}")
        if not (math.isfinite(epsilon) and epsilon > 0):
            raise ConfigError(f"epsilon must be positive, got {epsilon!r}")
        self.order = order
        self.cov_scale = float(cov_scale)
        self.forgetting = float(forgetting)
        self.epsilon = float(epsilon)
        self.theta = np.zeros(order.dim)
        self.cov = np.eye(order.dim) * self.cov_scale
        self._scratch = np.empty_like(self.cov)
        self.step = 0
        self.last_update_norm = math.inf
        self.calm_streak = 0

    @property
    def dim(self) -> int:
        return self.order.dim

    def predict(self, phi) -> float:
        phi = np.asarray(phi, dtype=float)
        if phi.shape != (self.dim,):
            raise ValueError(f"regressor has shape {phi.shape}, expected ({self.dim},)")
        return float(phi @ self.theta)

    def update(self, phi, y: float) -> float:
        """Apply one RLS step and return the a-priori prediction error.

        Non-finite inputs raise :class:`NonFiniteSampleError` and leave the
        estimator untouched.
        """
        phi = np.asarray(phi, dtype=float)
        if phi.shape != (self.dim,):
            raise ValueError(f"regressor has shape {phi.shape}, expected ({self.dim},)")
        # a sum is non-finite whenever any term is
        if not (math.isfinite(y) and math.isfinite(float(np.add.reduce(phi)))):
            raise NonFiniteSampleError("non-finite sample rejected")

        err = float(y - phi @ self.theta)
        c_phi = self.cov @ phi
        gain = c_phi / (self.forgetting + phi @ c_phi)
        delta = gain * err
        if not math.isfinite(float(np.add.reduce(delta))):
            raise NonFiniteSampleError("update produced non-finite parameters")

        self.theta = self.theta + delta
        # cov is kept exactly symmetric, so phi^T C == (C phi)^T
        scratch = self._scratch
        np.multiply.outer(gain, c_phi, out=scratch)
        cov = self.cov
        cov -= scratch
        if self.forgetting != 1.0:
            cov /= self.forgetting
        np.add(cov, cov.T, out=scratch)
        np.multiply(scratch, 0.5, out=cov)

        self.step += 1
        self.last_update_norm = float(np.max(np.abs(delta)))
        if self.last_update_norm < self.epsilon:
            self.calm_streak += 1
        else:
            self.calm_streak = 0
        return err

    def is_stable(self, hold: int = 50) -> bool:
        """True once the last ``hold`` updates all moved theta by < epsilon."""
        if hold < 1:
            raise ConfigError("hold must be >= 1")
        return self.calm_streak >= hold


def init_rls(order: ArxOrder, cov_scale: float = 1e6, **kwargs) -> RLSEstimator:
    """Zero model with covariance ``cov_scale * I``."""
    return RLSEstimator(order, cov_scale=cov_scale, **kwargs)
