import filecmp
import subprocess
import sys

import pytest

from rlsad.cli import main
from rlsad.detector import DetectionEvent, Phase
from rlsad.evaluation import read_report
from rlsad.simulator import FaultKind, FaultSpec, GroundTruth
from rlsad.telemetry_io import read_events, write_events, write_truth


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def small_set(tmp_path_factory):
    """Three recorded runs: a power cut, a stuck surface and a clean flight."""
    d = tmp_path_factory.mktemp("tel")
    assert run("simulate", "--out", d, "--name", "cut", "--kind", "PowerCut", "--onset", 30,
               "--value", 0, "--duration", 50, "--seed", 1, "--category", "Engine") == 0
    assert run("simulate", "--out", d, "--name", "stuck", "--kind", "StuckAtConstant",
               "--onset", 35, "--value", 0.25, "--targets", "roll", "--duration", 50,
               "--seed", 2, "--category", "Rudder") == 0
    assert run("simulate", "--out", d, "--name", "clean", "--duration", 50, "--seed", 3) == 0
    return d


# -- detect -------------------------------------------------------------------

def test_detect_clean_run(small_set, tmp_path, capsys):
    assert run("detect", "--input", small_set / "clean.csv", "--out", tmp_path) == 0
    assert read_events(tmp_path / "clean.events.csv") == []
    assert "4/4 channels armed" in capsys.readouterr().out
    for ch in ("roll", "roll_err", "pitch", "pitch_err"):
        assert (tmp_path / f"clean.{ch}.trace.csv").exists()


def test_detect_engine_cut(small_set, tmp_path):
    assert run("detect", "--input", small_set / "cut.csv", "--out", tmp_path) == 0
    events = read_events(tmp_path / "cut.events.csv")
    assert events and all(e.t >= 30.0 for e in events)
    assert [e.t for e in events] == sorted(e.t for e in events)


def test_detect_missing_column(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,roll_cmd,roll_meas,pitch_cmd\n0.0,0,0,0\n")
    code = run("detect", "--input", bad, "--out", tmp_path / "out")
    assert code != 0
    assert "pitch_meas" in capsys.readouterr().err


def test_detect_reports_stream_error_with_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,roll_cmd,roll_meas,pitch_cmd,pitch_meas\n0.0,0,0,0,0\n0.04,0,0,0,0\n"
                   "0.02,0,0,0,0\n")
    assert run("detect", "--input", bad, "--out", tmp_path / "out") == 4
    assert "bad.csv:4" in capsys.readouterr().err


def test_detect_missing_input(tmp_path):
    assert run("detect", "--input", tmp_path / "nope.csv", "--out", tmp_path) == 3


def test_detect_with_config_and_tsv(small_set, tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[channel:roll]\ninput = roll_cmd\noutput = roll_meas\nna = 4\nnb = 4\n")
    out = tmp_path / "out"
    assert run("detect", "--config", cfg, "--input", small_set / "clean.csv", "--out", out,
               "--format", "tsv") == 0
    assert sorted(p.name for p in out.iterdir()) == ["clean.events.tsv", "clean.roll.trace.tsv"]


def test_bad_config_exit_code(small_set, tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[run]\n")
    assert run("detect", "--config", cfg, "--input", small_set / "clean.csv",
               "--out", tmp_path) == 2


def test_env_overrides_threshold(small_set, tmp_path, monkeypatch):
    monkeypatch.setenv("RLSAD_THRESHOLD", "1e9")
    assert run("detect", "--input", small_set / "cut.csv", "--out", tmp_path) == 0
    assert read_events(tmp_path / "cut.events.csv") == []


# -- simulate -------------------------------------------------------------------

def test_suite_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("simulate", "--suite", "--seed", 7, "--out", a) == 0
    assert run("simulate", "--suite", "--seed", 7, "--out", b) == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    assert len(names) == 2 * 14
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    assert mismatch == [] and errors == []


def test_single_scenario_writes_two_files(tmp_path):
    assert run("simulate", "--out", tmp_path, "--kind", "StuckAtConstant", "--onset", 30,
               "--value", 0, "--duration", 45, "--name", "one") == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["one.csv", "one.truth.json"]


def test_duration_shorter_than_onset(tmp_path, capsys):
    code = run("simulate", "--out", tmp_path, "--kind", "StuckAtConstant", "--onset", 30,
               "--duration", 20)
    assert code == 2
    assert "duration" in capsys.readouterr().err
    assert list(tmp_path.iterdir()) == []


def test_bad_fault_kind_rejected_by_parser(tmp_path):
    with pytest.raises(SystemExit):
        run("simulate", "--out", tmp_path, "--kind", "Meteor", "--onset", 30)


# -- evaluate -------------------------------------------------------------------

def _published_counts_fixture(root):
    """22 runs whose totals are TP=15, FP=2, FN=2, TN=4."""
    ev = root / "events"
    truth = root / "truth"
    faulty = FaultSpec(FaultKind.STUCK, 30.0, 0.0)

    def add(name, category, fault, times):
        write_truth(GroundTruth(name, category, 60.0, fault), truth / f"{name}.truth.json")
        write_events([DetectionEvent("roll", t, 5.0, 0.1, Phase.ARMED) for t in times],
                     ev / f"{name}.events.csv")

    for k in range(15):
        add(f"hit{k:02d}", "Engine", faulty, [31.0 + k / 10])
    add("false_alarm", "No Failure", None, [12.0])
    add("early", "Rudder", faulty, [20.0])
    add("missed", "Aileron", faulty, [])
    for k in range(4):
        add(f"quiet{k}", "No Failure", None, [])
    return ev, truth


def test_evaluate_reproduces_published_rates(tmp_path, capsys):
    ev, truth = _published_counts_fixture(tmp_path)
    report = tmp_path / "report.csv"
    assert run("evaluate", "--events", ev, "--truth", truth, "--report", report) == 0
    total = read_report(report)[-1]
    assert (total["tp"], total["fp"], total["fn"], total["tn"]) == ("15", "2", "2", "4")
    assert (total["precision_pct"], total["recall_pct"], total["accuracy_pct"]) == \
        ("88.23", "88.23", "86.36")
    assert "86.36" in capsys.readouterr().out


def test_evaluate_empty_events_dir_is_all_fn(small_set, tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    report = tmp_path / "r.csv"
    assert run("evaluate", "--events", empty, "--truth", small_set, "--report", report) == 0
    total = read_report(report)[-1]
    assert (total["tp"], total["fn"], total["tn"], total["fp"]) == ("0", "2", "1", "0")
    assert total["recall_pct"] == "0.00"


def test_evaluate_needs_directories(tmp_path):
    assert run("evaluate", "--events", tmp_path / "x", "--truth", tmp_path,
               "--report", tmp_path / "r.csv") == 3


# -- sweep ----------------------------------------------------------------------

def test_sweep_rows_and_monotone_false_alarms(small_set, tmp_path):
    report = tmp_path / "sweep.csv"
    assert run("sweep", "--input", small_set, "--truth", small_set,
               "--thresholds", "2,3,4.5,6", "--report", report) == 0
    rows = read_report(report)
    assert [float(r["threshold"]) for r in rows] == [2.0, 3.0, 4.5, 6.0]
    fps = [int(r["fp"]) for r in rows]
    assert fps == sorted(fps, reverse=True)


def test_sweep_matches_detect_then_evaluate(small_set, tmp_path):
    sweep = tmp_path / "sweep.csv"
    assert run("sweep", "--input", small_set, "--truth", small_set, "--thresholds", "4.5",
               "--report", sweep) == 0
    out = tmp_path / "det"
    assert run("detect", "--input", small_set, "--out", out) == 0
    report = tmp_path / "eval.csv"
    assert run("evaluate", "--events", out, "--truth", small_set, "--report", report) == 0
    (row,) = read_report(sweep)
    total = read_report(report)[-1]
    for key in ("tp", "fp", "fn", "tn", "precision_pct", "recall_pct", "accuracy_pct",
                "avg_detection_s", "max_detection_s"):
        assert row[key] == total[key], key


def test_sweep_rejects_bad_threshold_list(small_set, tmp_path):
    with pytest.raises(SystemExit):
        run("sweep", "--input", small_set, "--truth", small_set, "--thresholds", "a,b",
            "--report", tmp_path / "s.csv")


def test_sweep_missing_truth(small_set, tmp_path):
    assert run("sweep", "--input", small_set / "cut.csv", "--truth", tmp_path,
               "--thresholds", "4.5", "--report", tmp_path / "s.csv") == 3


# -- entry point ------------------------------------------------------------------

def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "rlsad", "simulate", "--out", str(tmp_path),
                           "--duration", "20", "--name", "x"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "x.csv").exists()
