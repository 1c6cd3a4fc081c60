"""Sequence-level scoring of detections against ground truth.

One recorded run is one sequence. A run without a fault is TN when silent
and FP otherwise. In a faulty run a detection at or after onset is a TP
(detection time = first such detection - onset); any detection before onset
is an FP, and a run without a valid post-onset detection is an FN. A run
that only alarms early is therefore counted as both FP and FN.

Precision and recall use those counts; accuracy is the fraction of
sequences judged correct (exactly TP or exactly TN), so a dual-counted run
costs one sequence, not two.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence

from rlsad.simulator import GroundTruth

log = logging.getLogger(__name__)

__all__ = [
    "CategoryRow",
    "Metrics",
    "SequenceVerdict",
    "TABLE_ORDER",
    "classify_sequence",
    "format_percent",
    "metrics_from_counts",
    "summarize",
    "write_report",
]

TABLE_ORDER = ("Engine", "Rudder", "Elevator", "Aileron", "Rudder/Aileron", "No Failure")

REPORT_COLUMNS = (
    "failure_type", "tests", "flight_time_s", "avg_detection_s", "max_detection_s",
    "tp", "fp", "fn", "tn", "precision_pct", "recall_pct", "accuracy_pct",
)


@dataclass(frozen=True)
class SequenceVerdict:
    scenario: str
    category: str
    fault_onset_s: Optional[float]
    first_detection_s: Optional[float]
    labels: frozenset
    detection_time_s: Optional[float] = None
    duration_s: float = math.nan

    @property
    def tp(self) -> bool:
        return "TP" in self.labels

    @property
    def fp(self) -> bool:
        return "FP" in self.labels

    @property
    def fn(self) -> bool:
        return "FN" in self.labels

    @property
    def tn(self) -> bool:
        return "TN" in self.labels

    @property
    def correct(self) -> bool:
        return self.labels in (frozenset({"TP"}), frozenset({"TN"}))


def classify_sequence(truth, detections: Iterable[float], deadline_s: float = math.inf,
                      scenario: Optional[str] = None, category: Optional[str] = None
                      ) -> SequenceVerdict:
    """Judge one sequence.

    ``truth`` is a :class:`GroundTruth`, a fault onset time, or None for a
    fault-free run. ``detections`` are event times (or objects with ``.t``).
    Post-onset detections later than ``deadline_s`` do not count.
    """
    duration = math.nan
    if isinstance(truth, GroundTruth):
        scenario = scenario or truth.scenario
        category = category or truth.category
        duration = truth.duration_s
        onset = truth.onset_s
    else:
        onset = None if truth is None else float(truth)
    times = sorted(float(getattr(d, "t", d)) for d in detections)
    first = times[0] if times else None

    if onset is None:
        labels = frozenset({"FP"} if times else {"TN"})
        return SequenceVerdict(scenario or "", category or "No Failure", None, first, labels,
                               None, duration)

    labels = set()
    if any(t < onset for t in times):
        labels.add("FP")
    valid = [t for t in times if onset <= t <= onset + deadline_s]
    det_time = None
    if valid:
        labels.add("TP")
        det_time = valid[0] - onset
    else:
        labels.add("FN")
    return SequenceVerdict(scenario or "", category or "Unknown", onset, first,
                           frozenset(labels), det_time, duration)


def format_percent(value: Optional[Fraction]) -> str:
    """Percentage truncated (not rounded) to two decimals; '-' if undefined."""
    if value is None:
        return "-"
    hundredths = math.floor(Fraction(value) * 10000)
    return f"{hundredths // 100}.{hundredths % 100:02d}"


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    fn: int
    tn: int
    n_sequences: int
    n_correct: int

    @property
    def precision(self) -> Optional[Fraction]:
        d = self.tp + self.fp
        return Fraction(self.tp, d) if d else None

    @property
    def recall(self) -> Optional[Fraction]:
        d = self.tp + self.fn
        return Fraction(self.tp, d) if d else None

    @property
    def accuracy(self) -> Optional[Fraction]:
        return Fraction(self.n_correct, self.n_sequences) if self.n_sequences else None


def metrics_from_counts(tp: int, fp: int, fn: int, tn: int,
                        n_sequences: Optional[int] = None) -> Metrics:
    """Metrics from raw counts.

    Without ``n_sequences`` every count is assumed to be its own sequence.
    When some sequences were counted as both FP and FN, pass the true
    sequence total.
    """
    if min(tp, fp, fn, tn) < 0:
        raise ValueError("counts must be non-negative")
    total = tp + fp + fn + tn
    if n_sequences is None:
        n_sequences = total
    dual = total - n_sequences
    if dual < 0 or dual > min(fp, fn):
        raise ValueError(f"{n_sequences} sequences is inconsistent with counts {tp, fp, fn, tn}")
    # assumes no TP or TN sequence also carries an FP
    n_correct = tp + tn
    return Metrics(tp, fp, fn, tn, n_sequences, n_correct)


@dataclass(frozen=True)
class CategoryRow:
    category: str
    tests: int
    flight_time_s: float
    avg_detection_s: Optional[float]
    max_detection_s: Optional[float]
    metrics: Metrics


def _metrics(verdicts: Sequence[SequenceVerdict]) -> Metrics:
    return Metrics(
        tp=sum(v.tp for v in verdicts),
        fp=sum(v.fp for v in verdicts),
        fn=sum(v.fn for v in verdicts),
        tn=sum(v.tn for v in verdicts),
        n_sequences=len(verdicts),
        n_correct=sum(v.correct for v in verdicts),
    )


def _row(category: str, verdicts: Sequence[SequenceVerdict]) -> CategoryRow:
    times = sorted(v.detection_time_s for v in verdicts if v.detection_time_s is not None)
    return CategoryRow(
        category=category,
        tests=len(verdicts),
        flight_time_s=math.fsum(sorted(v.duration_s for v in verdicts)),
        avg_detection_s=math.fsum(times) / len(times) if times else None,
        max_detection_s=times[-1] if times else None,
        metrics=_metrics(verdicts),
    )


@dataclass(frozen=True)
class Summary:
    rows: tuple
    total: CategoryRow

    @property
    def metrics(self) -> Metrics:
        return self.total.metrics


def summarize(verdicts: Iterable[SequenceVerdict]) -> Summary:
    """Per-category and total rows in the shape of a flight-test table.

    The result does not depend on the order of ``verdicts``.
    """
    verdicts = sorted(verdicts, key=lambda v: (v.category, v.scenario))
    if not verdicts:
        raise ValueError("need at least one verdict")
    by_cat: dict = {}
    for v in verdicts:
        by_cat.setdefault(v.category, []).append(v)
    order = [c for c in TABLE_ORDER if c in by_cat]
    order += sorted(c for c in by_cat if c not in TABLE_ORDER)
    rows = tuple(_row(c, by_cat[c]) for c in order)
    return Summary(rows, _row("Total", verdicts))


def _fmt_seconds(x: Optional[float]) -> str:
    return "-" if x is None or math.isnan(x) else f"{x:.2f}"


def report_lines(summary: Summary) -> list:
    lines = []
    for r in summary.rows + (summary.total,):
        m = r.metrics
        lines.append([
            r.category, str(r.tests), _fmt_seconds(r.flight_time_s),
            _fmt_seconds(r.avg_detection_s), _fmt_seconds(r.max_detection_s),
            str(m.tp), str(m.fp), str(m.fn), str(m.tn),
            format_percent(m.precision), format_percent(m.recall), format_percent(m.accuracy),
        ])
    return lines


def write_report(summary: Summary, path, delimiter: str = ",") -> None:
    from rlsad.telemetry_io import atomic_write

    with atomic_write(path) as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        w.writerows(report_lines(summary))


def read_report(path, delimiter: str = ",") -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh, delimiter=delimiter))


def evaluate_dirs(events_dir, truth_dir, deadline_s: float = math.inf) -> list:
    """Pair ``NAME.truth.json`` files with ``NAME.events.csv`` and classify.

    A missing events file counts as a run with no detections.
    """
    from rlsad.telemetry_io import read_events, read_truth

    events_dir, truth_dir = Path(events_dir), Path(truth_dir)
    truth_files = sorted(truth_dir.glob("*.truth.json"))
    if not truth_files:
        raise FileNotFoundError(f"no *.truth.json files in {truth_dir}")
    verdicts = []
    for tf in truth_files:
        truth = read_truth(tf)
        name = tf.name[: -len(".truth.json")]
        ev_path = events_dir / f"{name}.events.csv"
        if not ev_path.exists():
            ev_path = events_dir / f"{name}.events.tsv"
        if ev_path.exists():
            events = read_events(ev_path)
        else:
            log.warning("no events file for %s; treating as silent", name)
            events = []
        verdicts.append(classify_sequence(truth, events, deadline_s))
    return verdicts
