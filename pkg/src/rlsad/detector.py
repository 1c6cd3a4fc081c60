"""Per-channel detection state machine and multi-channel aggregation.

A channel walks through WARMUP -> MODEL_STABLE -> ARMED -> ANOMALY:

* WARMUP: only the RLS model is updated. Leaves once the model step norm has
  stayed below epsilon for ``stability_hold`` updates and at least
  ``warmup_min_samples`` samples have been seen.
* MODEL_STABLE: prediction errors also feed the running statistics. Leaves
  once the error variance has settled.
* ARMED: each error is scored against the statistics gathered so far; a
  Z-score at or above ``z_threshold`` raises an event.
* ANOMALY: latched. Nothing is updated until :meth:`ChannelDetector.reset`.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from rlsad.arx_rls import ArxOrder, RegressorBuffer, RLSEstimator
from rlsad.errors import ConfigError, NonFiniteSampleError, StreamError
from rlsad.online_stats import RunningStats

log = logging.getLogger(__name__)

__all__ = [
    "ChannelConfig",
    "ChannelDetector",
    "DetectionEvent",
    "Phase",
    "SystemAnomaly",
    "TraceRow",
    "aggregate",
]

ANOMALY = "anomaly"
DATA_QUALITY = "data_quality"


class Phase(enum.IntEnum):
    WARMUP = 0
    MODEL_STABLE = 1
    ARMED = 2
    ANOMALY = 3

    @property
    def label(self) -> str:
        return {0: "Warmup", 1: "ModelStable", 2: "Armed", 3: "Anomaly"}[int(self)]


@dataclass(frozen=True)
class ChannelConfig:
    name: str
    input_field: str
    output_field: str
    order: ArxOrder = ArxOrder(25, 25)
    cov_scale: float = 1e6
    # step-norm bound on theta; 1e-3 needs minutes of data at dim 51
    epsilon: float = 0.05
    stability_hold: int = 50
    warmup_min_samples: int = 200
    z_threshold: float = 4.5
    variance_window: int = 50
    variance_rel_tol: float = 0.05
    derived_output: bool = False
    forgetting: float = 1.0
    stats_from_start: bool = False

    def __post_init__(self):
        if not self.name:
            raise ConfigError("channel needs a name")
        if not self.z_threshold > 0:
            raise ConfigError(f"{self.name}: z_threshold must be > 0")
        if self.warmup_min_samples < self.order.dim:
            raise ConfigError(
                f"{self.name}: warmup_min_samples ({self.warmup_min_samples}) "
                f"must be >= model dimension ({self.order.dim})"
            )
        if self.stability_hold < 1:
            raise ConfigError(f"{self.name}: stability_hold must be >= 1")
        if self.variance_window < 2:
            raise ConfigError(f"{self.name}: variance_window must be >= 2")
        if not self.variance_rel_tol > 0:
            raise ConfigError(f"{self.name}: variance_rel_tol must be > 0")


@dataclass(frozen=True)
class DetectionEvent:
    channel: str
    t: float
    z: float
    err: float
    phase: Phase
    kind: str = ANOMALY


@dataclass(frozen=True)
class TraceRow:
    t: float
    u: float
    y: float
    y_hat: float
    err: float
    sigma: float
    z: float
    phase: Phase


@dataclass(frozen=True)
class SystemAnomaly:
    t: float
    channel: str
    z: float


class ChannelDetector:
    """Runs one input/output pair through RLS and the Z-score test."""

    def __init__(self, config: ChannelConfig):
        self.config = config
        self.quality_events: list = []
        self.reset()

    def reset(self) -> "ChannelDetector":
        cfg = self.config
        self.rls = RLSEstimator(cfg.order, cfg.cov_scale, cfg.forgetting, cfg.epsilon)
        self.stats = RunningStats(history=max(256, cfg.variance_window))
        self.buffer = RegressorBuffer(cfg.order)
        self.phase = Phase.WARMUP
        self.samples = 0
        self.last_t: Optional[float] = None
        self.last_row: Optional[TraceRow] = None
        self.armed_at: Optional[float] = None
        return self

    def _z_or_nan(self, err: float) -> float:
        if self.stats.n >= 2 and self.stats.m2 > 0.0:
            return self.stats.z_score(err)
        return math.nan

    def _quality(self, t: float, reason: str) -> DetectionEvent:
        log.warning("%s: sample at t=%r skipped (%s)", self.config.name, t, reason)
        event = DetectionEvent(self.config.name, t, math.nan, math.nan, self.phase, DATA_QUALITY)
        self.quality_events.append(event)
        return event

    def step(self, t: float, u: float, y: float) -> Optional[DetectionEvent]:
        """Consume one sample.

        Returns an anomaly event, a data-quality event for a rejected
        sample, or None.
        """
        if self.last_t is not None and t < self.last_t:
            raise StreamError(
                f"{self.config.name}: timestamp went backwards ({t!r} < {self.last_t!r})"
            )
        self.last_row = None
        if not (math.isfinite(t) and math.isfinite(u) and math.isfinite(y)):
            if math.isfinite(t):
                self.last_t = t
            return self._quality(t, "non-finite value")
        self.last_t = t

        if not self.buffer.primed:
            self.buffer.push(u, y)
            self.samples += 1
            return None

        phi = self.buffer.regressor(u)
        y_hat = self.rls.predict(phi)

        if self.phase is Phase.ANOMALY:
            err = y - y_hat
            self.buffer.push(u, y)
            self.samples += 1
            self.last_row = TraceRow(t, u, y, y_hat, err, self.stats.std, self._z_or_nan(err),
                                     self.phase)
            return None

        try:
            err = self.rls.update(phi, y)
        except NonFiniteSampleError as exc:
            return self._quality(t, str(exc))
        self.buffer.push(u, y)
        self.samples += 1
        cfg = self.config
        z = self._z_or_nan(err)
        event = None

        if self.phase is Phase.WARMUP:
            if cfg.stats_from_start:
                self.stats.update(err)
            if self.rls.is_stable(cfg.stability_hold) and self.samples >= cfg.warmup_min_samples:
                self.phase = Phase.MODEL_STABLE
        elif self.phase is Phase.MODEL_STABLE:
            self.stats.update(err)
            if self.stats.is_variance_stable(cfg.variance_window, cfg.variance_rel_tol):
                self.phase = Phase.ARMED
                self.armed_at = t
        elif not math.isnan(z) and z >= cfg.z_threshold:
            self.phase = Phase.ANOMALY
            event = DetectionEvent(cfg.name, t, z, err, Phase.ARMED)
        else:
            self.stats.update(err)

        self.last_row = TraceRow(t, u, y, y_hat, err, self.stats.std, z, self.phase)
        return event

    def run(self, samples: Iterable) -> list:
        """Step through ``(t, u, y)`` triples and return the anomaly events."""
        events = []
        for t, u, y in samples:
            ev = self.step(t, u, y)
            if ev is not None and ev.kind == ANOMALY:
                events.append(ev)
        return events

    @property
    def theta(self) -> np.ndarray:
        return self.rls.theta


def aggregate(events: Iterable[DetectionEvent], until: Optional[float] = None
              ) -> Optional[SystemAnomaly]:
    """OR over channels: earliest anomaly wins, ties go to the smaller name."""
    best = None
    for ev in events:
        if ev.kind != ANOMALY or (until is not None and ev.t > until):
            continue
        if best is None or (ev.t, ev.channel) < (best.t, best.channel):
            best = ev
    if best is None:
        return None
    return SystemAnomaly(best.t, best.channel, best.z)
