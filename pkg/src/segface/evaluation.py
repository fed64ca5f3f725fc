"""Frame-level detection metrics.

Each frame holds at most one face and the detector returns at most one box,
so every metric here is counted per frame:

* TP: face frame whose detection overlaps the face by at least ``delta``.
* FP: any other detection (on a no-face frame, or a miss-placed box on a face
  frame).
* FN: face frame without a correct detection. A miss-placed box is both FP
  and FN, which keeps ``tp + fn`` equal to the number of face frames.
* TN: no-face frame without a detection.

The false-positive *rate* uses detections on no-face frames over the number
of no-face frames.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from .geometry import iou

logger = logging.getLogger(__name__)

__all__ = [
    "FrameOutcome",
    "ConfusionCounts",
    "make_outcome",
    "apply_threshold",
    "confusion",
    "f1",
    "precision_recall",
    "sweep",
    "tpr_at_fpr",
    "recall_at_precision",
    "timing",
    "time_calls",
    "write_curve_csv",
]

CURVE_FIELDS = ("theta", "tp", "fp", "fn", "tn", "precision", "recall", "tpr", "fpr")


@dataclass(frozen=True)
class FrameOutcome:
    frame_id: object
    gt_present: bool
    detection: tuple | None  # (BBox, score)
    correct: bool

    def __post_init__(self):
        if self.correct and not (self.gt_present and self.detection is not None):
            raise ValueError("a correct outcome needs both a face and a detection")

    @property
    def score(self):
        return None if self.detection is None else self.detection[1]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0


def make_outcome(frame_id, gt_face, detection, delta=0.5):
    correct = gt_face is not None and detection is not None and iou(detection[0], gt_face) >= delta
    return FrameOutcome(frame_id, gt_face is not None, detection, bool(correct))


def apply_threshold(outcomes, theta):
    """Drop detections scoring below ``theta``."""
    out = []
    for o in outcomes:
        if o.detection is not None and o.detection[1] < theta:
            o = FrameOutcome(o.frame_id, o.gt_present, None, False)
        out.append(o)
    return out


def confusion(outcomes):
    tp = fp = fn = tn = 0
    for o in outcomes:
        if o.correct:
            tp += 1
            continue
        if o.detection is not None:
            fp += 1
        if o.gt_present:
            fn += 1
        elif o.detection is None:
            tn += 1
    return ConfusionCounts(tp, fp, fn, tn)


def f1(counts):
    """``2 TP / (2 TP + FP + FN)``; 0 (with a warning) when the denominator is 0."""
    denom = 2 * counts.tp + counts.fp + counts.fn
    if denom == 0:
        logger.warning("F1 undefined for empty counts; returning 0")
        return 0.0
    return 2 * counts.tp / denom


def precision_recall(counts):
    det = counts.tp + counts.fp
    faces = counts.tp + counts.fn
    return (counts.tp / det if det else None, counts.tp / faces if faces else None)


def sweep(outcomes):
    """Operating points at every distinct score plus +/- infinity, in increasing threshold order.

    Returns a list of dicts keyed by :data:`CURVE_FIELDS`; undefined ratios
    are ``None``.
    """
    gt = np.array([o.gt_present for o in outcomes], dtype=bool)
    has = np.array([o.detection is not None for o in outcomes], dtype=bool)
    correct = np.array([o.correct for o in outcomes], dtype=bool)
    scores = np.array([o.detection[1] if o.detection is not None else np.nan for o in outcomes], dtype=np.float64)
    n_face, n_noface = int(gt.sum()), int((~gt).sum())

    def sorted_scores(mask):
        return np.sort(scores[mask & has])

    s_tp = sorted_scores(correct)
    s_fp = sorted_scores(~correct)
    s_fp_noface = sorted_scores(~gt)
    thetas = [-math.inf] + sorted(set(scores[has].tolist())) + [math.inf]

    def at_least(sorted_arr, theta):
        return int(sorted_arr.size - np.searchsorted(sorted_arr, theta, side="left"))

    points = []
    for theta in thetas:
        tp, fp = at_least(s_tp, theta), at_least(s_fp, theta)
        fp_nf = at_least(s_fp_noface, theta)
        fn = n_face - tp
        points.append({
            "theta": theta,
            "tp": tp,
            "fp": fp,
            "fn": fn,
            "tn": n_noface - fp_nf,
            "precision": tp / (tp + fp) if tp + fp else None,
            "recall": tp / n_face if n_face else None,
            "tpr": tp / n_face if n_face else None,
            "fpr": fp_nf / n_noface if n_noface else None,
        })
    return points


def tpr_at_fpr(outcomes, fpr_target=0.01, points=None):
    """Best TPR over thresholds whose FPR is at most ``fpr_target``; ``None`` without no-face frames."""
    points = sweep(outcomes) if points is None else points
    ok = [p["tpr"] for p in points if p["fpr"] is not None and p["tpr"] is not None and p["fpr"] <= fpr_target]
    return max(ok) if ok else None


def recall_at_precision(outcomes, precision_target=0.99, points=None):
    """Best recall over thresholds reaching ``precision_target``; ``None`` when unreachable."""
    points = sweep(outcomes) if points is None else points
    ok = [p["recall"] for p in points
          if p["precision"] is not None and p["recall"] is not None and p["precision"] >= precision_target]
    return max(ok) if ok else None


def timing(seconds):
    """Summary of per-frame wall-clock durations (given in seconds), reported in milliseconds."""
    ms = np.asarray(seconds, dtype=np.float64) * 1000.0
    if ms.size == 0:
        raise ValueError("timing needs at least one frame")
    return {
        "frames": int(ms.size),
        "mean_ms": float(ms.mean()),
        "median_ms": float(np.median(ms)),
        "p95_ms": float(np.percentile(ms, 95)),
        "min_ms": float(ms.min()),
        "max_ms": float(ms.max()),
    }


def time_calls(fn, items):
    """Call ``fn`` on each item, returning ``(results, per-call seconds)``."""
    results, durations = [], []
    for item in items:
        t0 = time.perf_counter()
        results.append(fn(item))
        durations.append(time.perf_counter() - t0)
    return results, durations


def write_curve_csv(points, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CURVE_FIELDS, lineterminator="\n")
        writer.writeheader()
        for p in points:
            writer.writerow({k: ("" if p[k] is None else repr(p[k]) if isinstance(p[k], float) else p[k])
                             for k in CURVE_FIELDS})
