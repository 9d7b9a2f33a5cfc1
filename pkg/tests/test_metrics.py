import numpy as np
import pytest

from burnscar.metrics import (
    ConfusionCounts,
    MetricsReport,
    aggregate_patch_metrics,
    confusion,
    events_detected,
    fp_fn_ratios,
    multiscale_iou,
    prf_iou,
    size_class,
    size_thresholds,
    summarize_reports,
)


def _loop_confusion(pred, label):
    """Per-pixel reference implementation."""
    tp = fp = fn = tn = 0
    for p, y in zip(pred.ravel(), label.ravel()):
        if p and y:
            tp += 1
        elif p and not y:
            fp += 1
        elif not p and y:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


# -------------------------------------------------------------- confusion


def test_confusion_perfect_prediction():
    label = np.zeros((4, 4))
    label.ravel()[:5] = 1
    c = confusion(label, label)
    assert (c.tp, c.fp, c.fn, c.tn) == (5, 0, 0, 11)


def test_confusion_all_false_positives():
    c = confusion(np.ones((2, 2)), np.zeros((2, 2)))
    assert (c.tp, c.fp, c.fn, c.tn) == (0, 4, 0, 0)


def test_confusion_matches_loop_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        pred = rng.random((16, 16)) < 0.5
        label = rng.random((16, 16)) < 0.3
        fast = confusion(pred, label)
        slow = _loop_confusion(pred, label)
        assert fast == slow
        assert fast.total == 256


def test_confusion_shape_mismatch():
    with pytest.raises(ValueError):
        confusion(np.zeros((2, 2)), np.zeros((3, 3)))


# ---------------------------------------------------------------- prf_iou


def test_prf_perfect():
    assert prf_iou(ConfusionCounts(tp=5)) == (1.0, 1.0, 1.0, 1.0)


def test_prf_hand_values():
    p, r, f1, iou = prf_iou(ConfusionCounts(tp=1, fp=1, fn=1))
    assert (p, r, f1) == (0.5, 0.5, 0.5)
    assert iou == pytest.approx(1 / 3)


def test_prf_all_undefined():
    assert prf_iou(ConfusionCounts(tn=10)) == (None, None, None, None)


def test_prf_zero_precision_recall_gives_undefined_f1():
    # tp=0 with both fp and fn present: P = R = 0, harmonic mean is 0/0
    p, r, f1, iou = prf_iou(ConfusionCounts(fp=3, fn=2, tn=5))
    assert p == 0.0 and r == 0.0
    assert f1 is None
    assert iou == 0.0


def test_f1_is_harmonic_mean():
    rng = np.random.default_rng(1)
    for _ in range(50):
        c = ConfusionCounts(*(int(v) for v in rng.integers(0, 30, size=4)))
        p, r, f1, _ = prf_iou(c)
        if p is not None and r is not None and p + r > 0:
            assert f1 == pytest.approx(2 * p * r / (p + r))


# ------------------------------------------------------------- size_class


def test_size_class_boundaries_256():
    # real-valued thresholds: 0.02*65536 = 1310.72, 0.1*65536 = 6553.6
    assert size_class(1310, 256, 256) == "small"
    assert size_class(1311, 256, 256) == "medium"
    assert size_class(6553, 256, 256) == "medium"
    assert size_class(6554, 256, 256) == "large"


def test_size_class_exhaustive_16():
    th1, th2 = size_thresholds(16, 16)
    assert th1 == pytest.approx(5.12)
    assert th2 == pytest.approx(25.6)
    for n in range(16 * 16 + 1):
        if n < th1:
            expected = "small"
        elif n < th2:
            expected = "medium"
        else:
            expected = "large"
        assert size_class(n, 16, 16) == expected


# ---------------------------------------------------------- multiscale_iou


def _mask(h, w, n, seed=0):
    rng = np.random.default_rng(seed)
    m = np.zeros(h * w)
    if n:
        m[rng.choice(h * w, size=n, replace=False)] = 1
    return m.reshape(h, w)


def test_multiscale_single_perfect_small():
    label = _mask(16, 16, 3)
    iou_s, iou_m, iou_l = multiscale_iou([(label, label)])
    assert iou_s == 1.0
    assert iou_m is None and iou_l is None


def test_multiscale_micro_sums_counts():
    # two small samples with group totals tp=10, fp=5, fn=5 -> IoU 0.5
    label_a = np.zeros((64, 64))
    label_a.ravel()[:10] = 1  # small: 10 < 0.02*4096 = 81.92
    pred_a = label_a.copy()  # tp 10
    label_b = np.zeros((64, 64))
    label_b.ravel()[:5] = 1
    pred_b = np.zeros((64, 64))
    pred_b.ravel()[5:10] = 1  # fn 5, fp 5
    iou_s, _, _ = multiscale_iou([(pred_a, label_a), (pred_b, label_b)])
    assert iou_s == pytest.approx(10 / (10 + 5 + 5))


def test_multiscale_groups_by_label_not_prediction():
    label = _mask(16, 16, 30)  # 30 >= 25.6: large group
    pred = np.zeros((16, 16))
    iou_s, iou_m, iou_l = multiscale_iou([(pred, label)])
    assert iou_l == 0.0
    assert iou_s is None and iou_m is None


def test_multiscale_negatives_excluded():
    neg = np.zeros((16, 16))
    assert multiscale_iou([(neg, neg)]) == (None, None, None)


def test_multiscale_macro_mode():
    label = _mask(16, 16, 3, seed=1)
    perfect = label.copy()
    miss = np.zeros((16, 16))
    iou_s, _, _ = multiscale_iou([(perfect, label), (miss, label)], aggregate="macro")
    assert iou_s == pytest.approx(0.5)  # mean of 1.0 and 0.0


def test_multiscale_counts_partition():
    rng = np.random.default_rng(5)
    samples = []
    total = ConfusionCounts()
    grouped = {s: ConfusionCounts() for s in ("small", "medium", "large")}
    for i in range(30):
        label = (rng.random((16, 16)) < rng.uniform(0, 0.3)).astype(float)
        pred = (rng.random((16, 16)) < 0.2).astype(float)
        samples.append((pred, label))
        n = int(label.sum())
        if n > 0:
            c = confusion(pred, label)
            total = total + c
            grouped[size_class(n, 16, 16)] = grouped[size_class(n, 16, 16)] + c
    by_group = sum(grouped.values(), ConfusionCounts())
    assert by_group == total


# --------------------------------------------------------- event retrieval


def test_single_overlap_pixel_counts():
    label = np.zeros((4, 4))
    label[1, 1] = 1
    pred = np.zeros((4, 4))
    pred[1, 1] = 1
    assert events_detected({"ev": [(pred, label)]}) == 1


def test_prediction_without_truth_not_counted():
    assert events_detected({"ev": [(np.ones((4, 4)), np.zeros((4, 4)))]}) == 0


def test_zero_overlap():
    label = np.zeros((4, 4))
    label[0, 0] = 1
    pred = np.zeros((4, 4))
    pred[3, 3] = 1
    assert events_detected({"a": [(pred, label)], "b": [(pred, label)]}) == 0


def test_events_monotone_in_predictions():
    rng = np.random.default_rng(2)
    for _ in range(20):
        per_event = {}
        grown = {}
        for e in range(4):
            label = (rng.random((8, 8)) < 0.2).astype(float)
            pred = (rng.random((8, 8)) < 0.1).astype(float)
            more = np.clip(pred + (rng.random((8, 8)) < 0.2), 0, 1)
            per_event[f"e{e}"] = [(pred, label)]
            grown[f"e{e}"] = [(more, label)]
        assert events_detected(grown) >= events_detected(per_event)


# ----------------------------------------------------------- fp/fn ratios


def test_ratios_perfect_event():
    out = fp_fn_ratios({"ev": ConfusionCounts(tp=10, tn=90)})
    assert out == [("ev", 0.0, 0.0)]


def test_ratios_hand_values_cross():
    c = ConfusionCounts(tp=0, fn=10, fp=5, tn=85)
    [(event, fp_ratio, fn_ratio)] = fp_fn_ratios({"ev": c})
    assert fp_ratio == pytest.approx(5 / 10)
    assert fn_ratio == pytest.approx(10 / 90)


def test_ratios_hand_values_rates():
    c = ConfusionCounts(tp=0, fn=10, fp=5, tn=85)
    [(_, fp_ratio, fn_ratio)] = fp_fn_ratios({"ev": c}, convention="rates")
    assert fp_ratio == pytest.approx(5 / 90)
    assert fn_ratio == pytest.approx(10 / 10)


def test_ratios_undefined_on_empty_denominator():
    # all-negative label: no ground-truth positives, so fp_ratio is 0/0
    c = ConfusionCounts(fp=5, tn=95)
    [(_, fp_ratio, fn_ratio)] = fp_fn_ratios({"ev": c})
    assert fp_ratio is None
    assert fn_ratio == 0.0
    # and the mirror case: all-positive label leaves fn_ratio undefined
    [(_, fp2, fn2)] = fp_fn_ratios({"ev": ConfusionCounts(tp=3, fn=7)})
    assert fn2 is None
    assert fp2 == 0.0


def test_ratios_unknown_convention():
    with pytest.raises(ValueError):
        fp_fn_ratios({}, convention="other")


# ------------------------------------------------------------ aggregation


def test_micro_aggregation_identity():
    rng = np.random.default_rng(7)
    records = []
    preds, labels = [], []
    for i in range(10):
        pred = (rng.random((8, 8)) < 0.4).astype(float)
        label = (rng.random((8, 8)) < 0.3).astype(float)
        records.append((f"e{i % 3}", pred, label))
        preds.append(pred.ravel())
        labels.append(label.ravel())
    report = aggregate_patch_metrics(records)
    concat = confusion(np.concatenate(preds), np.concatenate(labels))
    assert report.counts == concat
    assert report.iou == prf_iou(concat)[3]


def test_report_labels_as_predictions_perfect():
    rng = np.random.default_rng(8)
    records = []
    for i in range(6):
        label = (rng.random((16, 16)) < 0.2).astype(float)
        records.append((f"e{i}", label, label))
    report = aggregate_patch_metrics(records)
    assert report.precision == report.recall == report.f1 == report.iou == 1.0
    n_events_with_positives = len({e for e, _, l in records if l.any()})
    assert report.n_events_detected == n_events_with_positives


def test_report_all_zero_predictor():
    label = np.zeros((8, 8))
    label[:2, :2] = 1
    records = [("e0", np.zeros((8, 8)), label)]
    report = aggregate_patch_metrics(records)
    assert report.recall == 0.0
    assert report.precision is None
    assert report.n_events_detected == 0


def test_report_table_columns():
    report = aggregate_patch_metrics([("e0", np.ones((4, 4)), np.ones((4, 4)))])
    table = report.format_table()
    header = table.splitlines()[0]
    for col in ("Prec", "Rec", "F1", "IoU_S", "IoU_M", "IoU_L", "#Events"):
        assert col in header
    assert "100.00" in table.splitlines()[1]
    assert "n/a" in table.splitlines()[1]  # empty medium/large groups


def test_report_json_roundtrip(tmp_path):
    import json

    report = aggregate_patch_metrics([("e0", np.ones((4, 4)), np.ones((4, 4)))])
    report.metadata["note"] = "x"
    report.save_json(tmp_path / "r.json")
    d = json.loads((tmp_path / "r.json").read_text())
    assert d["precision"] == 1.0
    assert d["iou_m"] is None
    assert d["metadata"]["note"] == "x"


def test_summarize_identical_reports_zero_std():
    label = np.ones((4, 4))
    reports = [aggregate_patch_metrics([("e0", label, label)]) for _ in range(3)]
    summary = summarize_reports(reports)
    mean, std = summary["f1"]
    assert mean == 1.0 and std == 0.0


def test_lr_records_populate_lr_metrics():
    label = np.ones((4, 4))
    report = aggregate_patch_metrics(
        [("e0", label, label)], lr_records=[(np.ones((2, 2)), np.ones((2, 2)))]
    )
    assert report.lr_f1 == 1.0
    report2 = aggregate_patch_metrics([("e0", label, label)])
    assert report2.lr_f1 is None
