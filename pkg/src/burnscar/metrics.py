"""Evaluation metrics for binary burn masks.

Beyond the usual confusion-based scores, positive-labeled patches are
grouped into small/medium/large by their burnt-pixel count and an IoU
is reported per group; this keeps large scars from saturating a single
score and exposes how a model handles small events.  Undefined ratios
(0/0) are reported as None, never silently coerced to 0 or 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

SIZE_CLASSES = ("small", "medium", "large")

# Fractions of the patch area separating the small/medium/large groups.
TH1_FRACTION = 0.02
TH2_FRACTION = 0.1


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn + other.fn,
            self.tn + other.tn,
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(pred: np.ndarray, label: np.ndarray) -> ConfusionCounts:
    """Per-pixel confusion counts between two binary arrays."""
    pred = np.asarray(pred)
    label = np.asarray(label)
    if pred.shape != label.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {label.shape}")
    p = pred.astype(bool)
    y = label.astype(bool)
    tp = int(np.count_nonzero(p & y))
    fp = int(np.count_nonzero(p & ~y))
    fn = int(np.count_nonzero(~p & y))
    tn = int(np.count_nonzero(~p & ~y))
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def _ratio(num: int, den: int) -> float | None:
    return num / den if den > 0 else None


def prf_iou(c: ConfusionCounts):
    """Precision, recall, F1 and IoU for the positive class.

    Any 0/0 denominator yields None so empty cases are excluded from
    aggregation instead of polluting it.
    """
    precision = _ratio(c.tp, c.tp + c.fp)
    recall = _ratio(c.tp, c.tp + c.fn)
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    iou = _ratio(c.tp, c.tp + c.fp + c.fn)
    return precision, recall, f1, iou


def size_thresholds(h: int, w: int) -> tuple[float, float]:
    return TH1_FRACTION * h * w, TH2_FRACTION * h * w


def size_class(n_pos: int, h: int, w: int) -> str:
    """Small/medium/large bucket for a burnt-pixel count.

    Comparisons are against the real-valued thresholds 0.02*H*W and
    0.1*H*W (not their integer floors).
    """
    th1, th2 = size_thresholds(h, w)
    if n_pos < th1:
        return "small"
    if n_pos < th2:
        return "medium"
    return "large"


def multiscale_iou(
    samples: Iterable[tuple[np.ndarray, np.ndarray]],
    aggregate: str = "micro",
):
    """IoU per size group over positive-labeled samples.

    Samples are grouped by the size class of the LABEL's burnt-pixel
    count; negative samples (no burnt pixel) enter no group.  micro
    sums the confusion counts within a group before the ratio; macro
    averages per-sample IoUs.  Empty groups yield None.
    """
    if aggregate not in ("micro", "macro"):
        raise ValueError(f"unknown aggregate {aggregate!r}")
    counts = {s: ConfusionCounts() for s in SIZE_CLASSES}
    per_sample: dict[str, list[float]] = {s: [] for s in SIZE_CLASSES}
    for pred, label in samples:
        label = np.asarray(label)
        n_pos = int(np.count_nonzero(label))
        if n_pos == 0:
            continue
        h, w = label.shape
        group = size_class(n_pos, h, w)
        c = confusion(pred, label)
        counts[group] = counts[group] + c
        per_sample[group].append(c.tp / (c.tp + c.fp + c.fn))
    out = []
    for s in SIZE_CLASSES:
        if aggregate == "micro":
            c = counts[s]
            out.append(_ratio(c.tp, c.tp + c.fp + c.fn))
        else:
            vals = per_sample[s]
            out.append(float(np.mean(vals)) if vals else None)
    return tuple(out)


def events_detected(per_event: Mapping[str, Iterable[tuple[np.ndarray, np.ndarray]]]) -> int:
    """Count events where prediction and ground truth overlap anywhere.

    An event counts as retrieved as soon as one of its patches has at
    least one pixel that is positive in both the prediction and the
    label.
    """
    n = 0
    for _, pairs in per_event.items():
        for pred, label in pairs:
            if np.any(np.asarray(pred).astype(bool) & np.asarray(label).astype(bool)):
                n += 1
                break
    return n


def fp_fn_ratios(
    per_event: Mapping[str, ConfusionCounts], convention: str = "cross"
) -> list[tuple[str, float | None, float | None]]:
    """Per-event false positive / false negative ratios.

    The default "cross" convention scales each error count by the size
    of the opposite-outcome ground truth: fp_ratio = fp / (tp + fn)
    (false positives relative to the true burnt area) and fn_ratio =
    fn / (fp + tn) (false negatives relative to the unburnt area).
    convention="rates" gives the textbook false-positive and
    false-negative rates instead (fp over negatives, fn over positives).
    """
    if convention not in ("cross", "rates"):
        raise ValueError(f"unknown convention {convention!r}")
    out = []
    for event_id in sorted(per_event):
        c = per_event[event_id]
        n_pos = c.tp + c.fn
        n_neg = c.fp + c.tn
        if convention == "cross":
            fp_ratio = _ratio(c.fp, n_pos)
            fn_ratio = _ratio(c.fn, n_neg)
        else:
            fp_ratio = _ratio(c.fp, n_neg)
            fn_ratio = _ratio(c.fn, n_pos)
        out.append((event_id, fp_ratio, fn_ratio))
    return out


@dataclass
class MetricsReport:
    """Aggregated evaluation results for one split."""

    precision: float | None = None
    recall: float | None = None
    f1: float | None = None
    iou: float | None = None
    iou_s: float | None = None
    iou_m: float | None = None
    iou_l: float | None = None
    n_events_detected: int = 0
    n_events_total: int = 0
    n_patches: int = 0
    counts: ConfusionCounts = field(default_factory=ConfusionCounts)
    per_event: list = field(default_factory=list)  # (event_id, fp_ratio, fn_ratio)
    lr_precision: float | None = None
    lr_recall: float | None = None
    lr_f1: float | None = None
    lr_iou: float | None = None
    metadata: dict = field(default_factory=dict)

    COLUMNS = ("precision", "recall", "f1", "iou_s", "iou_m", "iou_l")

    def to_dict(self) -> dict:
        d = {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "iou": self.iou,
            "iou_s": self.iou_s,
            "iou_m": self.iou_m,
            "iou_l": self.iou_l,
            "n_events_detected": self.n_events_detected,
            "n_events_total": self.n_events_total,
            "n_patches": self.n_patches,
            "counts": {
                "tp": self.counts.tp,
                "fp": self.counts.fp,
                "fn": self.counts.fn,
                "tn": self.counts.tn,
            },
            "per_event": [
                {"event_id": e, "fp_ratio": a, "fn_ratio": b}
                for e, a, b in self.per_event
            ],
            "lr": {
                "precision": self.lr_precision,
                "recall": self.lr_recall,
                "f1": self.lr_f1,
                "iou": self.lr_iou,
            },
            "metadata": self.metadata,
        }
        return d

    def save_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    def format_table(self) -> str:
        headers = ("Prec", "Rec", "F1", "IoU_S", "IoU_M", "IoU_L", "#Events")
        vals = [
            getattr(self, c) for c in self.COLUMNS
        ] + [f"{self.n_events_detected}/{self.n_events_total}"]
        cells = [_fmt_metric(v) for v in vals]
        widths = [max(len(h), len(c)) for h, c in zip(headers, cells)]
        line1 = "  ".join(h.rjust(w) for h, w in zip(headers, widths))
        line2 = "  ".join(c.rjust(w) for c, w in zip(cells, widths))
        return line1 + "\n" + line2


def _fmt_metric(v) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, str):
        return v
    return f"{100 * v:.2f}" if isinstance(v, float) else str(v)


def aggregate_patch_metrics(
    records: Iterable[tuple[str, np.ndarray, np.ndarray]],
    lr_records: Iterable[tuple[np.ndarray, np.ndarray]] = (),
    ratio_convention: str = "cross",
    multiscale_aggregate: str = "micro",
) -> MetricsReport:
    """Build a MetricsReport from (event_id, pred, label) patch records.

    Global precision/recall/F1/IoU are micro-averaged over all pixels of
    all patches; the grouped IoUs cover positive-labeled patches only.
    """
    total = ConfusionCounts()
    per_event_counts: dict[str, ConfusionCounts] = {}
    per_event_pairs: dict[str, list] = {}
    pairs = []
    n_patches = 0
    for event_id, pred, label in records:
        c = confusion(pred, label)
        total = total + c
        per_event_counts[event_id] = per_event_counts.get(event_id, ConfusionCounts()) + c
        per_event_pairs.setdefault(event_id, []).append((pred, label))
        pairs.append((pred, label))
        n_patches += 1

    precision, recall, f1, iou = prf_iou(total)
    iou_s, iou_m, iou_l = multiscale_iou(pairs, aggregate=multiscale_aggregate)
    report = MetricsReport(
        precision=precision,
        recall=recall,
        f1=f1,
        iou=iou,
        iou_s=iou_s,
        iou_m=iou_m,
        iou_l=iou_l,
        n_events_detected=events_detected(per_event_pairs),
        n_events_total=len(per_event_pairs),
        n_patches=n_patches,
        counts=total,
        per_event=fp_fn_ratios(per_event_counts, convention=ratio_convention),
    )
    lr_total = ConfusionCounts()
    any_lr = False
    for pred, label in lr_records:
        lr_total = lr_total + confusion(pred, label)
        any_lr = True
    if any_lr:
        report.lr_precision, report.lr_recall, report.lr_f1, report.lr_iou = prf_iou(
            lr_total
        )
    return report


def summarize_reports(reports: list[MetricsReport]) -> dict:
    """Mean and std per metric over repeated runs (e.g. several seeds)."""
    summary = {}
    keys = list(MetricsReport.COLUMNS) + ["iou", "n_events_detected"]
    for key in keys:
        vals = [getattr(r, key) for r in reports]
        vals = [v for v in vals if v is not None]
        if vals:
            summary[key] = (float(np.mean(vals)), float(np.std(vals)))
        else:
            summary[key] = (None, None)
    return summary
