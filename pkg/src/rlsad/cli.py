"""Command-line front end: ``rlsad {simulate,detect,evaluate,sweep}``.

Defaults can be overridden through the environment: ``RLSAD_CONFIG``,
``RLSAD_SEED``, ``RLSAD_THRESHOLD`` and ``RLSAD_FORMAT``.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from pathlib import Path

from rlsad.errors import ConfigError, RlsadError, SchemaError
from rlsad.evaluation import (
    classify_sequence,
    evaluate_dirs,
    format_percent,
    report_lines,
    summarize,
    write_report,
    REPORT_COLUMNS,
)
from rlsad.pipeline import detect_file, run_detection, simulate_scenarios, write_simulation
from rlsad.simulator import DEFAULT_CHANNELS, FaultKind, FaultSpec, scenario_suite, simulate
from rlsad.telemetry_io import (
    DELIMITERS,
    atomic_write,
    default_run_config,
    load_run_config,
    load_telemetry,
    read_truth,
)

log = logging.getLogger("rlsad")

SWEEP_COLUMNS = ("threshold", "tp", "fp", "fn", "tn", "precision_pct", "recall_pct",
                 "accuracy_pct", "avg_detection_s", "max_detection_s")


def _env(name, default=None):
    value = os.environ.get(name)
    return default if value in (None, "") else value


def _float_list(text: str) -> list:
    try:
        values = [float(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty threshold list")
    return values


def _load_config(args):
    cfg = load_run_config(args.config) if args.config else default_run_config()
    if getattr(args, "threshold", None) is not None:
        cfg = cfg.with_threshold(args.threshold)
    return cfg


def _telemetry_inputs(paths) -> list:
    """Expand directories to their telemetry files (outputs are skipped)."""
    files = []
    for p in map(Path, paths):
        if p.is_dir():
            for f in sorted(p.iterdir()):
                if f.suffix in (".csv", ".tsv") and ".trace." not in f.name \
                        and ".events." not in f.name and f.is_file():
                    files.append(f)
        elif p.is_file():
            files.append(p)
        else:
            raise SchemaError(f"input not found: {p}")
    if not files:
        raise SchemaError(f"no telemetry files under {', '.join(map(str, paths))}")
    return files


def _prepare_out(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc.strerror}") from exc
    return out


def cmd_detect(args) -> int:
    cfg = _load_config(args)
    inputs = _telemetry_inputs(args.input)
    out = _prepare_out(args.out)
    delim = DELIMITERS[args.format]
    for path in inputs:
        result = detect_file(path, cfg, out, delim)
        armed = sum(t is not None for t in result.armed_at.values())
        sys_anom = result.system_anomaly
        first = "none" if sys_anom is None else f"{sys_anom.t:.2f} s ({sys_anom.channel})"
        print(f"{path.name}: {result.samples} samples, {armed}/{len(cfg.channels)} channels armed, "
              f"{len(result.events)} event(s), first detection {first}")
    return 0


def cmd_simulate(args) -> int:
    out = _prepare_out(args.out)
    delim = DELIMITERS[args.format]
    if args.suite:
        written = simulate_scenarios(scenario_suite(args.seed), out, delim)
        print(f"wrote {len(written)} scenarios to {out}")
        return 0
    fault = None
    if args.kind:
        if args.onset is None:
            raise ConfigError("--onset is required with --kind")
        if args.duration < args.onset + 10.0:
            raise ConfigError(f"--duration {args.duration} must be >= onset + 10 s")
        targets = tuple(t for t in (args.targets or "").split(",") if t)
        fault = FaultSpec(FaultKind(args.kind), args.onset, args.value, targets)
    sim = simulate(DEFAULT_CHANNELS, fault, args.duration, args.seed,
                   scenario=args.name, category=args.category or
                   ("No Failure" if fault is None else fault.kind.value))
    tel, truth = write_simulation(sim, out, delim)
    print(f"wrote {tel} and {truth}")
    return 0


def _print_table(columns, rows) -> None:
    widths = [max(len(str(c)), *(len(str(r[i])) for r in rows)) for i, c in enumerate(columns)]
    print("  ".join(str(c).ljust(w) for c, w in zip(columns, widths)))
    for r in rows:
        print("  ".join(str(x).ljust(w) for x, w in zip(r, widths)))


def cmd_evaluate(args) -> int:
    for p in (args.events, args.truth):
        if not Path(p).is_dir():
            raise SchemaError(f"not a directory: {p}")
    verdicts = evaluate_dirs(args.events, args.truth, args.deadline)
    summary = summarize(verdicts)
    write_report(summary, args.report, DELIMITERS[args.format])
    _print_table(REPORT_COLUMNS, report_lines(summary))
    return 0


def cmd_sweep(args) -> int:
    base = _load_config(args)
    inputs = _telemetry_inputs(args.input)
    truth_dir = Path(args.truth)
    truths = {}
    for path in inputs:
        tf = truth_dir / f"{path.name.split('.')[0]}.truth.json"
        if not tf.exists():
            raise SchemaError(f"missing ground truth {tf}")
        truths[path] = read_truth(tf)
    frames = {p: list(load_telemetry(p, base.time_column, base.columns)) for p in inputs}

    rows = []
    for thr in args.thresholds:
        cfg = base.with_threshold(thr)
        verdicts = [classify_sequence(truths[p], run_detection(frames[p], cfg, keep_traces=False)
                                      .events, args.deadline) for p in inputs]
        total = summarize(verdicts).total
        m = total.metrics
        rows.append([repr(float(thr)), m.tp, m.fp, m.fn, m.tn, format_percent(m.precision),
                     format_percent(m.recall), format_percent(m.accuracy),
                     "-" if total.avg_detection_s is None else f"{total.avg_detection_s:.2f}",
                     "-" if total.max_detection_s is None else f"{total.max_detection_s:.2f}"])
    with atomic_write(args.report) as fh:
        w = csv.writer(fh, delimiter=DELIMITERS[args.format], lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        w.writerows(rows)
    _print_table(SWEEP_COLUMNS, rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rlsad",
        description="Online RLS/ARX anomaly detection over input-output signal pairs.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=False):
        p.add_argument("--format", choices=sorted(DELIMITERS), default=_env("RLSAD_FORMAT", "csv"),
                       help="delimiter of written files")
        if config:
            p.add_argument("--config", default=_env("RLSAD_CONFIG"),
                           help="INI run config (default: roll/pitch channel set)")

    p = sub.add_parser("detect", help="run detection over telemetry files")
    common(p, config=True)
    p.add_argument("--input", nargs="+", required=True, help="telemetry files or directories")
    p.add_argument("--out", required=True, help="directory for traces and events")
    p.add_argument("--threshold", type=float,
                   default=None if _env("RLSAD_THRESHOLD") is None else float(_env("RLSAD_THRESHOLD")),
                   help="override every channel's z threshold")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("simulate", help="write synthetic telemetry with ground truth")
    common(p)
    p.add_argument("--suite", action="store_true", help="write the full scenario suite")
    p.add_argument("--seed", type=int, default=int(_env("RLSAD_SEED", 0)))
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=[k.value for k in FaultKind])
    p.add_argument("--onset", type=float)
    p.add_argument("--value", type=float)
    p.add_argument("--targets", help="comma-separated channel names (default: all)")
    p.add_argument("--duration", type=float, default=60.0)
    p.add_argument("--name", default="scenario")
    p.add_argument("--category")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="score events against ground truth")
    common(p)
    p.add_argument("--events", required=True, help="directory of NAME.events.csv")
    p.add_argument("--truth", required=True, help="directory of NAME.truth.json")
    p.add_argument("--report", required=True)
    p.add_argument("--deadline", type=float, default=math.inf,
                   help="max seconds after onset for a detection to count")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="detect + evaluate for several z thresholds")
    common(p, config=True)
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--thresholds", type=_float_list, required=True, help="e.g. 3,4.5,6")
    p.add_argument("--report", required=True)
    p.add_argument("--deadline", type=float, default=math.inf)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except RlsadError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, FileNotFoundError) as exc:
        print(f"error [IOError]: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
