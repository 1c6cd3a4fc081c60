import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from rlsad.evaluation import (
    REPORT_COLUMNS,
    Metrics,
    classify_sequence,
    evaluate_dirs,
    format_percent,
    metrics_from_counts,
    read_report,
    report_lines,
    summarize,
    write_report,
)
from rlsad.simulator import FaultKind, FaultSpec, GroundTruth
from rlsad.telemetry_io import write_events, write_truth
from rlsad.detector import DetectionEvent, Phase


# -- classify -------------------------------------------------------------------

def test_true_positive_with_detection_time():
    v = classify_sequence(30.0, [32.28])
    assert v.labels == {"TP"}
    assert v.detection_time_s == pytest.approx(2.28, abs=1e-12)
    assert v.correct


def test_true_negative():
    v = classify_sequence(None, [])
    assert v.labels == {"TN"} and v.correct
    assert v.detection_time_s is None


def test_false_positive_on_clean_run():
    v = classify_sequence(None, [12.0, 40.0])
    assert v.labels == {"FP"} and not v.correct


def test_early_only_detection_is_both_fp_and_fn():
    v = classify_sequence(30.0, [25.0])
    assert v.labels == {"FP", "FN"}
    assert v.detection_time_s is None
    assert not v.correct


def test_missed_fault():
    assert classify_sequence(30.0, []).labels == {"FN"}


def test_early_and_late_detection():
    v = classify_sequence(30.0, [31.0, 20.0])
    assert v.labels == {"FP", "TP"}
    assert v.first_detection_s == 20.0
    assert v.detection_time_s == 1.0
    assert not v.correct


def test_detection_exactly_at_onset_is_tp():
    v = classify_sequence(30.0, [30.0])
    assert v.labels == {"TP"} and v.detection_time_s == 0.0


def test_deadline():
    assert classify_sequence(30.0, [40.0]).labels == {"TP"}
    assert classify_sequence(30.0, [40.0], deadline_s=6.0).labels == {"FN"}
    assert classify_sequence(30.0, [36.0], deadline_s=6.0).labels == {"TP"}


def test_truth_object_and_event_objects():
    truth = GroundTruth("engine_cut", "Engine", 60.0, FaultSpec(FaultKind.POWER_CUT, 30.0, 0.0))
    v = classify_sequence(truth, [DetectionEvent("roll", 31.5, 5.0, 0.1, Phase.ARMED)])
    assert (v.scenario, v.category, v.duration_s) == ("engine_cut", "Engine", 60.0)
    assert v.detection_time_s == 1.5


# -- metrics ----------------------------------------------------------------------

@pytest.mark.parametrize("value,text", [
    (Fraction(15, 17), "88.23"),   # 88.235..., truncated
    (Fraction(19, 22), "86.36"),   # 86.3636...
    (Fraction(1), "100.00"),
    (Fraction(0), "0.00"),
    (Fraction(1, 3), "33.33"),
    (None, "-"),
])
def test_format_percent(value, text):
    assert format_percent(value) == text


def _flight_log():
    """22 sequences: 15 caught, one clean false alarm, one early alarm that then
    missed, one plain miss, four silent clean runs."""
    return (
        [classify_sequence(30.0, [30.0 + 0.1 * k], scenario=f"f{k}", category="Engine")
         for k in range(15)]
        + [classify_sequence(None, [10.0], scenario="c0", category="No Failure"),
           classify_sequence(30.0, [20.0], scenario="x0", category="Rudder"),
           classify_sequence(30.0, [], scenario="x1", category="Aileron")]
        + [classify_sequence(None, [], scenario=f"c{k}", category="No Failure")
           for k in range(1, 5)]
    )


def test_metrics_fixture_from_counts():
    m = metrics_from_counts(15, 2, 2, 4, n_sequences=22)
    assert m.precision == Fraction(15, 17)
    assert m.recall == Fraction(15, 17)
    assert m.accuracy == Fraction(19, 22)
    assert [format_percent(x) for x in (m.precision, m.recall, m.accuracy)] == \
        ["88.23", "88.23", "86.36"]


def test_metrics_fixture_from_sequences():
    summary = summarize(_flight_log())
    m = summary.metrics
    assert (m.tp, m.fp, m.fn, m.tn, m.n_sequences) == (15, 2, 2, 4, 22)
    assert [format_percent(x) for x in (m.precision, m.recall, m.accuracy)] == \
        ["88.23", "88.23", "86.36"]


def test_counting_each_label_as_a_sequence_differs():
    # without the dual-counted run collapsed: 19 of 23
    assert metrics_from_counts(15, 2, 2, 4).accuracy == Fraction(19, 23)


def test_inconsistent_sequence_total_rejected():
    with pytest.raises(ValueError):
        metrics_from_counts(15, 2, 2, 4, n_sequences=20)
    with pytest.raises(ValueError):
        metrics_from_counts(1, -1, 0, 0)


def test_all_true_negatives():
    m = summarize([classify_sequence(None, [], scenario=f"c{k}") for k in range(5)]).metrics
    assert m.precision is None and m.recall is None
    assert m.accuracy == 1
    assert format_percent(m.precision) == "-"


def test_summary_rows_follow_table_order():
    verdicts = _flight_log()
    s = summarize(verdicts)
    assert [r.category for r in s.rows] == ["Engine", "Rudder", "Aileron", "No Failure"]
    engine = s.rows[0]
    assert engine.tests == 15
    assert engine.avg_detection_s == pytest.approx(0.7)
    assert engine.max_detection_s == pytest.approx(1.4)
    assert s.rows[1].avg_detection_s is None


def test_empty_summary_rejected():
    with pytest.raises(ValueError):
        summarize([])


onsets = st.one_of(st.none(), st.floats(1.0, 100.0))
sequences = st.lists(
    st.tuples(onsets, st.lists(st.floats(0.0, 120.0), max_size=3)),
    min_size=1, max_size=40,
)


def naive_counts(seqs):
    tp = fp = fn = tn = correct = 0
    for onset, dets in seqs:
        if onset is None:
            if dets:
                fp += 1
            else:
                tn += 1
                correct += 1
            continue
        early = [d for d in dets if d < onset]
        late = [d for d in dets if d >= onset]
        fp += bool(early)
        tp += bool(late)
        fn += not late
        correct += bool(late) and not early
    return tp, fp, fn, tn, correct


@settings(max_examples=200)
@given(sequences)
def test_counts_match_naive_tally(seqs):
    verdicts = [classify_sequence(o, d, scenario=str(i)) for i, (o, d) in enumerate(seqs)]
    m = summarize(verdicts).metrics
    tp, fp, fn, tn, correct = naive_counts(seqs)
    assert (m.tp, m.fp, m.fn, m.tn, m.n_correct) == (tp, fp, fn, tn, correct)
    assert m.n_sequences == len(seqs)
    if tp + fp:
        assert m.precision == Fraction(tp, tp + fp)
    if tp + fn:
        assert m.recall == Fraction(tp, tp + fn)
    assert m.accuracy == Fraction(correct, len(seqs))


@settings(max_examples=100)
@given(sequences, st.randoms(use_true_random=False))
def test_summary_is_permutation_invariant(seqs, rnd):
    cats = ["Engine", "Rudder", "No Failure"]
    verdicts = [classify_sequence(o, d, scenario=str(i), category=cats[i % 3])
                for i, (o, d) in enumerate(seqs)]
    shuffled = list(verdicts)
    rnd.shuffle(shuffled)
    assert report_lines(summarize(verdicts)) == report_lines(summarize(shuffled))
    assert summarize(verdicts).metrics == summarize(shuffled).metrics


# -- files ------------------------------------------------------------------------

def test_report_round_trip(tmp_path):
    s = summarize(_flight_log())
    write_report(s, tmp_path / "report.csv")
    rows = read_report(tmp_path / "report.csv")
    assert tuple(rows[0]) == REPORT_COLUMNS
    total = rows[-1]
    assert total["failure_type"] == "Total" and total["tests"] == "22"
    assert (total["precision_pct"], total["recall_pct"], total["accuracy_pct"]) == \
        ("88.23", "88.23", "86.36")
    assert len(rows) == len(report_lines(s))


def test_evaluate_dirs_missing_events_counts_as_silent(tmp_path):
    for k in range(3):
        write_truth(GroundTruth(f"s{k}", "Engine", 50.0, FaultSpec(FaultKind.STUCK, 30.0, 0.0)),
                    tmp_path / f"s{k}.truth.json")
    write_truth(GroundTruth("clean", "No Failure", 50.0), tmp_path / "clean.truth.json")
    write_events([DetectionEvent("roll", 31.0, 6.0, 0.2, Phase.ARMED)], tmp_path / "s1.events.csv")
    verdicts = {v.scenario: v for v in evaluate_dirs(tmp_path, tmp_path)}
    assert verdicts["s0"].labels == {"FN"}
    assert verdicts["s1"].labels == {"TP"}
    assert verdicts["clean"].labels == {"TN"}


def test_evaluate_dirs_needs_truth(tmp_path):
    with pytest.raises(FileNotFoundError):
        evaluate_dirs(tmp_path, tmp_path)


def test_metrics_dataclass_undefined_accuracy():
    assert Metrics(0, 0, 0, 0, 0, 0).accuracy is None
    assert math.isnan(summarize([classify_sequence(None, [])]).total.flight_time_s)
