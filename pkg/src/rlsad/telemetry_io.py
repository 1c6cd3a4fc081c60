"""Delimited-text telemetry, trace/event files, truth sidecars and run configs.

Telemetry files carry a header row; one column holds time in seconds and the
rest are decimal reals. Trace files have the columns of :data:`TRACE_COLUMNS`
and event files those of :data:`EVENT_COLUMNS`. Floats are written with
``repr`` so a write/read round trip is exact.
"""
from __future__ import annotations

import configparser
import contextlib
import csv
import json
import math
import os
import tempfile
import warnings
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np

from rlsad.arx_rls import ArxOrder
from rlsad.detector import ChannelConfig, DetectionEvent, Phase, TraceRow
from rlsad.errors import ConfigError, RowError, SchemaError, StreamError
from rlsad.simulator import GroundTruth

__all__ = [
    "EVENT_COLUMNS",
    "TRACE_COLUMNS",
    "RateReport",
    "RateWarning",
    "RunConfig",
    "TelemetryFrame",
    "atomic_write",
    "check_rate",
    "default_run_config",
    "derive_channel",
    "load_run_config",
    "load_telemetry",
    "read_events",
    "read_trace",
    "read_truth",
    "write_events",
    "write_run_config",
    "write_telemetry",
    "write_trace",
    "write_truth",
]

TRACE_COLUMNS = ("t", "u", "y", "y_hat", "err", "sigma", "z", "phase")
EVENT_COLUMNS = ("t", "channel", "z", "err")
DELIMITERS = {"csv": ",", "tsv": "\t"}


class RateWarning(UserWarning):
    """Inter-sample periods strayed from the nominal rate."""


@dataclass(frozen=True)
class TelemetryFrame:
    t: float
    values: Mapping[str, float]


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    return repr(float(x))


def delimiter_for(path, fmt: Optional[str] = None) -> str:
    if fmt is not None:
        try:
            return DELIMITERS[fmt]
        except KeyError:
            raise ConfigError(f"unknown format {fmt!r}; choose from {sorted(DELIMITERS)}")
    return "\t" if str(path).endswith((".tsv", ".tab")) else ","


@contextlib.contextmanager
def atomic_write(path, mode: str = "w"):
    """Write to a temporary sibling and rename over ``path`` on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, newline="") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def load_telemetry(path, time_column: str = "t", columns: Optional[Sequence[str]] = None,
                   delimiter: Optional[str] = None) -> Iterator[TelemetryFrame]:
    """Stream frames from a delimited text file.

    ``columns`` restricts (and requires) the value columns; by default every
    non-time column is read. Raises :class:`SchemaError` for missing columns,
    :class:`RowError` for unparsable cells and :class:`StreamError` when time
    does not strictly increase. Errors carry the 1-based file line number.
    """
    path = Path(path)
    delim = delimiter or delimiter_for(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise SchemaError(f"{path}: cannot open ({exc.strerror})") from exc
    with fh:
        reader = csv.reader(fh, delimiter=delim)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row")
        if time_column not in header:
            raise SchemaError(f"{path}: missing time column {time_column!r}")
        wanted = [c for c in header if c != time_column] if columns is None else list(columns)
        missing = [c for c in wanted if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(map(repr, missing))}")
        t_idx = header.index(time_column)
        idx = [(c, header.index(c)) for c in wanted]

        last_t = None
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise RowError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
            try:
                t = float(row[t_idx])
                values = {c: float(row[i]) for c, i in idx}
            except ValueError as exc:
                raise RowError(f"{path}:{line}: non-numeric cell ({exc})") from None
            if not math.isfinite(t):
                raise RowError(f"{path}:{line}: non-finite time {row[t_idx]!r}")
            if last_t is not None and t <= last_t:
                raise StreamError(
                    f"{path}:{line}: time {t!r} does not increase (previous {last_t!r})"
                )
            last_t = t
            yield TelemetryFrame(t, values)


def write_telemetry(columns: Mapping[str, Sequence[float]], path, time_column: str = "t",
                    delimiter: str = ",") -> None:
    """Write column arrays (time column first) as delimited text."""
    names = [time_column] + [c for c in columns if c != time_column]
    cols = [np.asarray(columns[c], dtype=float) for c in names]
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise ValueError("all columns must have the same length")
    with atomic_write(path) as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(names)
        for k in range(n):
            w.writerow([repr(float(c[k])) for c in cols])


@dataclass(frozen=True)
class RateReport:
    n_periods: int
    n_violations: int
    violation_indices: tuple
    mean_rate_hz: float
    nominal_rate_hz: float
    tolerance: float

    @property
    def fraction(self) -> float:
        return self.n_violations / self.n_periods if self.n_periods else 0.0

    @property
    def ok(self) -> bool:
        return self.n_violations == 0


def check_rate(frames_or_times: Iterable, nominal_rate_hz: float = 25.0,
               tolerance: float = 0.2, warn: bool = True) -> RateReport:
    """Count inter-sample periods deviating from 1/nominal by more than ``tolerance``.

    The tolerance is relative to the nominal period. Violations only warn
    (:class:`RateWarning`); the stream is used as-is.
    """
    if nominal_rate_hz <= 0:
        raise ConfigError("nominal_rate_hz must be positive")
    times = np.array([getattr(f, "t", f) for f in frames_or_times], dtype=float)
    if times.size < 2:
        raise ValueError("need at least two frames to check the rate")
    nominal = 1.0 / nominal_rate_hz
    periods = np.diff(times)
    bad = np.flatnonzero(np.abs(periods - nominal) > tolerance * nominal)
    span = times[-1] - times[0]
    report = RateReport(
        n_periods=int(periods.size),
        n_violations=int(bad.size),
        violation_indices=tuple(int(i) for i in bad),
        mean_rate_hz=float(periods.size / span) if span > 0 else math.inf,
        nominal_rate_hz=nominal_rate_hz,
        tolerance=tolerance,
    )
    if warn and bad.size:
        warnings.warn(
            f"{bad.size} of {periods.size} sample periods ({100 * report.fraction:.2f}%) "
            f"outside +/-{100 * tolerance:.0f}% of the {nominal_rate_hz} Hz nominal rate",
            RateWarning,
            stacklevel=2,
        )
    return report


def derive_channel(frame: TelemetryFrame, cfg: ChannelConfig) -> tuple:
    """Return ``(u, y)`` for one channel; y is measured minus commanded if derived."""
    try:
        u = frame.values[cfg.input_field]
        y = frame.values[cfg.output_field]
    except KeyError as exc:
        raise SchemaError(f"channel {cfg.name!r}: frame lacks column {exc.args[0]!r}") from None
    if cfg.derived_output:
        y = y - u
    return u, y


def write_trace(rows: Iterable[TraceRow], path, delimiter: str = ",") -> int:
    """Write trace rows; returns the number of rows written."""
    count = 0
    with atomic_write(path) as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r.t), _fmt(r.u), _fmt(r.y), _fmt(r.y_hat), _fmt(r.err),
                        _fmt(r.sigma), _fmt(r.z), r.phase.label])
            count += 1
    return count


_PHASE_BY_LABEL = {p.label: p for p in Phase}


def read_trace(path, delimiter: Optional[str] = None) -> list:
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter or delimiter_for(path))
        header = tuple(next(reader))
        if header != TRACE_COLUMNS:
            raise SchemaError(f"{path}: unexpected trace header {header}")
        return [TraceRow(*(float(x) for x in row[:7]), _PHASE_BY_LABEL[row[7]])
                for row in reader if row]


def write_events(events: Iterable[DetectionEvent], path, delimiter: str = ",") -> int:
    count = 0
    with atomic_write(path) as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(EVENT_COLUMNS)
        for ev in events:
            w.writerow([_fmt(ev.t), ev.channel, _fmt(ev.z), _fmt(ev.err)])
            count += 1
    return count


def read_events(path, delimiter: Optional[str] = None) -> list:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter or delimiter_for(path))
        try:
            header = tuple(next(reader))
        except StopIteration:
            raise SchemaError(f"{path}: empty events file")
        if header != EVENT_COLUMNS:
            raise SchemaError(f"{path}: unexpected events header {header}")
        out = []
        for row in reader:
            if not row:
                continue
            try:
                out.append(DetectionEvent(row[1], float(row[0]), float(row[2]), float(row[3]),
                                          Phase.ARMED))
            except (IndexError, ValueError):
                raise RowError(f"{path}:{reader.line_num}: malformed event row") from None
        return out


def write_truth(truth: GroundTruth, path) -> None:
    with atomic_write(path) as fh:
        json.dump(truth.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_truth(path) -> GroundTruth:
    with open(path) as fh:
        try:
            return GroundTruth.from_dict(json.load(fh))
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"{path}: malformed ground-truth sidecar ({exc})") from None


# --------------------------------------------------------------------------
# run configuration

@dataclass
class RunConfig:
    channels: list
    nominal_rate_hz: float = 25.0
    jitter_tolerance: float = 0.2
    time_column: str = "t"
    fault_onset_s: Optional[float] = None
    fault_kind: Optional[str] = None

    def __post_init__(self):
        if not self.nominal_rate_hz > 0:
            raise ConfigError("nominal_rate_hz must be positive")
        if not self.jitter_tolerance >= 0:
            raise ConfigError("jitter_tolerance must be >= 0")
        names = [c.name for c in self.channels]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate channel names in {names}")

    @property
    def columns(self) -> list:
        cols = []
        for c in self.channels:
            for col in (c.input_field, c.output_field):
                if col not in cols:
                    cols.append(col)
        return cols

    def with_threshold(self, z_threshold: float) -> "RunConfig":
        from dataclasses import replace

        return replace(self, channels=[replace(c, z_threshold=z_threshold)
                                       for c in self.channels])


def default_run_config() -> RunConfig:
    """Roll/pitch command-vs-measured pairs plus their error signals."""
    channels = []
    for axis in ("roll", "pitch"):
        cmd, meas = f"{axis}_cmd", f"{axis}_meas"
        channels.append(ChannelConfig(axis, cmd, meas))
        channels.append(ChannelConfig(f"{axis}_err", cmd, meas, derived_output=True))
    return RunConfig(channels)


_CHANNEL_PREFIX = "channel:"
_INT_KEYS = {"na", "nb", "stability_hold", "warmup_min_samples", "variance_window"}
_FLOAT_KEYS = {"cov_scale", "epsilon", "z_threshold", "variance_rel_tol", "forgetting"}
_BOOL_KEYS = {"derived_output", "stats_from_start"}


def load_run_config(path) -> RunConfig:
    """Parse an INI file: a ``[run]`` section and one ``[channel:NAME]`` per pair.

    Keys in ``[defaults]`` apply to every channel unless overridden.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    run = parser["run"] if parser.has_section("run") else {}
    defaults = dict(parser["defaults"]) if parser.has_section("defaults") else {}
    known = {f.name for f in fields(ChannelConfig)} | {"na", "nb", "input", "output"}
    channels = []
    for section in parser.sections():
        if not section.startswith(_CHANNEL_PREFIX):
            continue
        name = section[len(_CHANNEL_PREFIX):].strip()
        opts = {**defaults, **{k: v for k, v in parser[section].items() if k not in parser.defaults()}}
        unknown = set(opts) - known
        if unknown:
            raise ConfigError(f"{path} [{section}]: unknown key(s) {sorted(unknown)}")
        try:
            kwargs = {}
            for key, raw in opts.items():
                if key in ("na", "nb"):
                    continue
                if key in ("input", "input_field"):
                    kwargs["input_field"] = raw.strip()
                elif key in ("output", "output_field"):
                    kwargs["output_field"] = raw.strip()
                elif key in _INT_KEYS:
                    kwargs[key] = int(raw)
                elif key in _FLOAT_KEYS:
                    kwargs[key] = float(raw)
                elif key in _BOOL_KEYS:
                    kwargs[key] = parser.BOOLEAN_STATES[raw.strip().lower()]
            na = int(opts.get("na", 25))
            nb = int(opts.get("nb", 25))
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"{path} [{section}]: bad value ({exc})") from None
        if "input_field" not in kwargs or "output_field" not in kwargs:
            raise ConfigError(f"{path} [{section}]: needs both 'input' and 'output'")
        channels.append(ChannelConfig(name=name, order=ArxOrder(na, nb), **kwargs))
    if not channels:
        raise ConfigError(f"{path}: no [channel:NAME] sections")

    try:
        onset = run.get("fault_onset_s")
        return RunConfig(
            channels=channels,
            nominal_rate_hz=float(run.get("nominal_rate_hz", 25.0)),
            jitter_tolerance=float(run.get("jitter_tolerance", 0.2)),
            time_column=run.get("time_column", "t").strip(),
            fault_onset_s=None if onset in (None, "") else float(onset),
            fault_kind=run.get("fault_kind") or None,
        )
    except ValueError as exc:
        raise ConfigError(f"{path} [run]: bad value ({exc})") from None


def write_run_config(cfg: RunConfig, path) -> None:
    parser = configparser.ConfigParser(interpolation=None)
    parser["run"] = {
        "nominal_rate_hz": repr(cfg.nominal_rate_hz),
        "jitter_tolerance": repr(cfg.jitter_tolerance),
        "time_column": cfg.time_column,
    }
    if cfg.fault_onset_s is not None:
        parser["run"]["fault_onset_s"] = repr(cfg.fault_onset_s)
    if cfg.fault_kind:
        parser["run"]["fault_kind"] = cfg.fault_kind
    for c in cfg.channels:
        parser[_CHANNEL_PREFIX + c.name] = {
            "input": c.input_field,
            "output": c.output_field,
            "na": str(c.order.na),
            "nb": str(c.order.nb),
            "cov_scale": repr(c.cov_scale),
            "epsilon": repr(c.epsilon),
            "stability_hold": str(c.stability_hold),
            "warmup_min_samples": str(c.warmup_min_samples),
            "z_threshold": repr(c.z_threshold),
            "variance_window": str(c.variance_window),
            "variance_rel_tol": repr(c.variance_rel_tol),
            "derived_output": str(c.derived_output).lower(),
            "forgetting": repr(c.forgetting),
            "stats_from_start": str(c.stats_from_start).lower(),
        }
    with atomic_write(path) as fh:
        parser.write(fh)
