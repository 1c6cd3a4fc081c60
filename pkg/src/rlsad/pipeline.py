"""Glue: run a set of channel detectors over frames, and the file-level steps."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from rlsad.detector import ANOMALY, ChannelDetector, SystemAnomaly, aggregate
from rlsad.simulator import Scenario, Simulation
from rlsad.telemetry_io import (
    RateWarning,
    RunConfig,
    TelemetryFrame,
    check_rate,
    derive_channel,
    load_telemetry,
    write_events,
    write_telemetry,
    write_trace,
    write_truth,
)

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    events: list
    traces: dict
    armed_at: dict
    samples: int
    rate_report: Optional[object] = None
    quality_events: list = field(default_factory=list)

    @property
    def system_anomaly(self) -> Optional[SystemAnomaly]:
        return aggregate(self.events)


class Monitor:
    """One :class:`ChannelDetector` per configured channel, fed frame by frame."""

    def __init__(self, config: RunConfig, keep_traces: bool = True):
        self.config = config
        self.detectors = {c.name: ChannelDetector(c) for c in config.channels}
        self.keep_traces = keep_traces
        self.traces = {name: [] for name in self.detectors}
        self.events: list = []
        self.samples = 0

    def process(self, frame: TelemetryFrame) -> list:
        fired = []
        for cfg in self.config.channels:
            det = self.detectors[cfg.name]
            u, y = derive_channel(frame, cfg)
            ev = det.step(frame.t, u, y)
            if self.keep_traces and det.last_row is not None:
                self.traces[cfg.name].append(det.last_row)
            if ev is not None and ev.kind == ANOMALY:
                fired.append(ev)
        self.samples += 1
        self.events.extend(fired)
        return fired

    def reset(self) -> None:
        for det in self.detectors.values():
            det.reset()
        self.traces = {name: [] for name in self.detectors}
        self.events = []
        self.samples = 0

    def result(self, rate_report=None) -> RunResult:
        return RunResult(
            events=list(self.events),
            traces=self.traces,
            armed_at={n: d.armed_at for n, d in self.detectors.items()},
            samples=self.samples,
            rate_report=rate_report,
            quality_events=[e for d in self.detectors.values() for e in d.quality_events],
        )


def run_detection(frames: Iterable[TelemetryFrame], config: RunConfig,
                  keep_traces: bool = True) -> RunResult:
    frames = list(frames)
    report = None
    if len(frames) >= 2:
        report = check_rate(frames, config.nominal_rate_hz, config.jitter_tolerance, warn=False)
        if not report.ok:
            warnings.warn(
                f"{report.n_violations} of {report.n_periods} sample periods off the "
                f"{config.nominal_rate_hz} Hz nominal rate",
                RateWarning,
                stacklevel=2,
            )
    mon = Monitor(config, keep_traces)
    for fr in frames:
        mon.process(fr)
    return mon.result(report)


def detect_file(path, config: RunConfig, out_dir, delimiter: str = ",") -> RunResult:
    """Run detection over one telemetry file and write its outputs.

    Writes ``STEM.events.csv`` and one ``STEM.CHANNEL.trace.csv`` per channel
    into ``out_dir``.
    """
    path, out_dir = Path(path), Path(out_dir)
    frames = load_telemetry(path, config.time_column, config.columns)
    result = run_detection(frames, config)
    ext = "tsv" if delimiter == "\t" else "csv"
    stem = path.name.split(".")[0]
    for name, rows in result.traces.items():
        write_trace(rows, out_dir / f"{stem}.{name}.trace.{ext}", delimiter)
    write_events(sorted(result.events, key=lambda e: (e.t, e.channel)),
                 out_dir / f"{stem}.events.{ext}", delimiter)
    return result


def write_simulation(sim: Simulation, out_dir, delimiter: str = ",") -> tuple:
    """Write ``NAME.csv`` telemetry and ``NAME.truth.json``; returns both paths."""
    out_dir = Path(out_dir)
    ext = "tsv" if delimiter == "\t" else "csv"
    tel = out_dir / f"{sim.truth.scenario}.{ext}"
    truth = out_dir / f"{sim.truth.scenario}.truth.json"
    write_telemetry(sim.columns, tel, delimiter=delimiter)
    write_truth(sim.truth, truth)
    return tel, truth


def simulate_scenarios(scenarios: Sequence[Scenario], out_dir, delimiter: str = ",") -> list:
    return [write_simulation(sc.run(), out_dir, delimiter) for sc in scenarios]
