"""Independent brute-force references shared by the unit and acceptance tests."""

import math
import random

import numpy as np

from segface.detector import SegmentDetection
from segface.evaluation import FrameOutcome
from segface.geometry import BBox, FaceEstimate, SegmentKind


def pixel_iou(a, b):
    """IoU of integer boxes by painting both on a grid."""
    w = int(max(a.x2, b.x2, 1))
    h = int(max(a.y2, b.y2, 1))
    ma = np.zeros((h, w), dtype=bool)
    mb = np.zeros_like(ma)
    ma[int(a.y1):int(a.y2), int(a.x1):int(a.x2)] = True
    mb[int(b.y1):int(b.y2), int(b.x1):int(b.x2)] = True
    union = int((ma | mb).sum())
    return int((ma & mb).sum()) / union if union else 0.0


def l12_face(seg, img_w):
    """Left-half extrapolation written out directly: mirror the segment across its right edge."""
    x1, y1, x2, y2 = seg.as_tuple()
    return (x1, y1, min(img_w, x2 + (x2 - x1)), y2), (x2, y1 + (y2 - y1) / 2)


def brute_force_clusters(estimates, c, r_factor):
    """Anchor/member clusters by testing every pair independently."""
    out = []
    for k, (det_k, est_k) in enumerate(estimates):
        radius = r_factor * est_k.half_diagonal
        chosen = {det_k.kind: k}
        for j, (det_j, est_j) in enumerate(estimates):
            if j == k or det_j.kind == det_k.kind:
                continue
            d = math.dist(est_k.center, est_j.center)
            if d > radius:
                continue
            prev = chosen.get(det_j.kind)
            if prev is None or d < math.dist(est_k.center, estimates[prev][1].center):
                chosen[det_j.kind] = j
        if len(chosen) >= c:
            out.append((k, tuple(sorted(chosen.values())), radius))
    return out


def random_scene(rnd, n, spread=60.0):
    """Random detections with estimates whose centres crowd a few face locations."""
    kinds = list(SegmentKind)
    hubs = [(rnd.uniform(0, 300), rnd.uniform(0, 200)) for _ in range(rnd.randint(1, 4))]
    scene = []
    for _ in range(n):
        hx, hy = rnd.choice(hubs)
        size = rnd.uniform(30, 120)
        cx, cy = hx + rnd.gauss(0, spread / 6), hy + rnd.gauss(0, spread / 6)
        face = BBox(cx - size / 2, cy - size / 2, cx + size / 2, cy + size / 2)
        if rnd.random() < 0.1 and scene:  # exact coincidences
            face = scene[-1][1].face
            cx, cy = face.center
        kind = rnd.choice(kinds)
        est = FaceEstimate(face, (cx, cy), kind, 0.5 * math.hypot(face.width, face.height))
        scene.append((SegmentDetection(kind, face), est))
    return scene


def random_outcomes(rnd, n):
    """Scored frame outcomes with ties, misses, wrong boxes and no-face frames."""
    box = BBox(0, 0, 1, 1)
    levels = [rnd.uniform(-2, 2) for _ in range(rnd.randint(1, 12))]
    out = []
    for i in range(n):
        gt = rnd.random() < 0.7
        if rnd.random() < 0.15:
            out.append(FrameOutcome(i, gt, None, False))
            continue
        score = rnd.choice(levels) if rnd.random() < 0.4 else rnd.uniform(-3, 3)
        correct = gt and rnd.random() < 0.75
        out.append(FrameOutcome(i, gt, (box, score), correct))
    return out


def counts_at(outcomes, theta):
    """(tp, fp, fn, tn, detections on no-face frames) keeping detections scoring >= theta."""
    tp = fp = fn = tn = fp_nf = 0
    for o in outcomes:
        kept = o.detection is not None and o.detection[1] >= theta
        if o.gt_present:
            if kept and o.correct:
                tp += 1
            else:
                fn += 1
                if kept:
                    fp += 1
        else:
            if kept:
                fp += 1
                fp_nf += 1
            else:
                tn += 1
    return tp, fp, fn, tn, fp_nf


def thresholds(outcomes):
    scores = {o.detection[1] for o in outcomes if o.detection is not None}
    return [-math.inf] + sorted(scores) + [math.inf]


def oracle_f1(outcomes, theta):
    tp, fp, fn, _, _ = counts_at(outcomes, theta)
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def oracle_tpr_at_fpr(outcomes, target):
    n_face = sum(o.gt_present for o in outcomes)
    n_noface = len(outcomes) - n_face
    if n_noface == 0 or n_face == 0:
        return None
    best = None
    for theta in thresholds(outcomes):
        tp, _, _, _, fp_nf = counts_at(outcomes, theta)
        if fp_nf / n_noface <= target:
            best = tp / n_face if best is None else max(best, tp / n_face)
    return best


def oracle_recall_at_precision(outcomes, target):
    n_face = sum(o.gt_present for o in outcomes)
    if n_face == 0:
        return None
    best = None
    for theta in thresholds(outcomes):
        tp, fp, _, _, _ = counts_at(outcomes, theta)
        if tp + fp and tp / (tp + fp) >= target:
            best = tp / n_face if best is None else max(best, tp / n_face)
    return best


def global_equalization(img):
    """Histogram equalization reference: each value maps to its cumulative rank share of 255."""
    flat = np.sort(img.ravel())
    rank = np.searchsorted(flat, img, side="right")
    return np.floor(rank * 255.0 / flat.size + 0.5)


def seeded(seed):
    return random.Random(seed)
