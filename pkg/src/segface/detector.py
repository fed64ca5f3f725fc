"""Segment detectors.

Two backends produce :class:`SegmentDetection` lists for a frame:

* :class:`CascadeBackend` scans multi-block LBP boosted cascades over an
  image pyramid (one cascade per segment kind), using a single integral image
  per frame.
* :class:`FixtureBackend` is annotation driven: it emits the canonical
  sub-rectangles of a known face with seeded misses, jitter and false
  positives. It stands in for trained cascades in tests and synthetic
  experiments.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import DEFAULT_CANONICAL, BBox, SegmentKind, canonical_subrect, iou
from .imaging import integral
from .validation import check_fraction, check_gray_image

__all__ = [
    "SegmentDetection",
    "WeakClassifier",
    "Stage",
    "CascadeModel",
    "ScanParams",
    "Frame",
    "lbp_code",
    "cascade_detect",
    "evaluate_window",
    "merge_detections",
    "load_cascade",
    "save_cascade",
    "make_toy_cascade",
    "FixtureDetectorConfig",
    "fixture_detect",
    "FixtureBackend",
    "CascadeBackend",
]

# (row, col) of the eight neighbour cells, clockwise from top-left
_NEIGHBOURS = ((0, 0), (0, 1), (0, 2), (1, 2), (2, 2), (2, 1), (2, 0), (1, 0))


@dataclass(frozen=True)
class SegmentDetection:
    kind: SegmentKind
    box: BBox
    raw_score: float | None = None

    def sort_key(self):
        return (self.kind.order, self.box.x1, self.box.y1, self.box.x2, self.box.y2)


@dataclass(frozen=True)
class WeakClassifier:
    """3x3 multi-block LBP stump: cell geometry ``(x, y, cw, ch)`` and a 256-entry vote table."""

    rect: tuple
    votes: tuple

    def __post_init__(self):
        if len(self.rect) != 4 or self.rect[2] < 1 or self.rect[3] < 1:
            raise ValueError(f"bad MB-LBP block geometry {self.rect}")
        if len(self.votes) != 256:
            raise ValueError(f"vote table needs 256 entries, got {len(self.votes)}")


@dataclass(frozen=True)
class Stage:
    threshold: float
    weaks: tuple


@dataclass(frozen=True)
class ScanParams:
    scale_factor: float = 1.2
    step: float | None = None  # base-window pixels; None means window_w / 8


@dataclass(frozen=True)
class CascadeModel:
    kind: SegmentKind
    window_w: int
    window_h: int
    stages: tuple
    scan: ScanParams = field(default_factory=ScanParams)

    def __post_init__(self):
        if not self.stages:
            raise ValueError("a cascade needs at least one stage")
        for stage in self.stages:
            for weak in stage.weaks:
                x, y, cw, ch = weak.rect
                if x < 0 or y < 0 or x + 3 * cw > self.window_w or y + 3 * ch > self.window_h:
                    raise ValueError(f"block {weak.rect} does not fit the {self.window_w}x{self.window_h} window")


@dataclass
class Frame:
    """A frame handed to a detector backend.

    ``hint`` is the full (possibly off-image) face box used only by the
    fixture backend; ``size`` supplies ``(width, height)`` when ``image`` is
    omitted.
    """

    image: np.ndarray | None = None
    frame_id: int = 0
    hint: BBox | None = None
    size: tuple | None = None

    @property
    def width(self):
        return self.image.shape[1] if self.image is not None else self.size[0]

    @property
    def height(self):
        return self.image.shape[0] if self.image is not None else self.size[1]


def _cell_sums(ii, x, y, cw, ch):
    """Sums of the nine cells of a block whose top-left is ``(x, y)``; vectorised over x, y."""
    xs = [x + i * cw for i in range(4)]
    ys = [y + j * ch for j in range(4)]
    corner = [[ii[yy, xx] for xx in xs] for yy in ys]
    return [
        [corner[r + 1][c + 1] - corner[r][c + 1] - corner[r + 1][c] + corner[r][c] for c in range(3)]
        for r in range(3)
    ]


def _code_from_sums(s):
    centre = s[1][1]
    code = 0
    for bit, (r, c) in enumerate(_NEIGHBOURS):
        # equal-area cells, so comparing sums is comparing means
        code = code + (np.asarray(s[r][c] >= centre).astype(np.int64) << bit)
    return code


def lbp_code(ii, block):
    """Multi-block LBP code of a 3x3 cell block ``(x, y, cw, ch)`` in integral image ``ii``.

    Bit ``i`` is set when the ``i``-th neighbour cell (clockwise from top-left)
    has mean intensity >= the centre cell.
    """
    x, y, cw, ch = (int(v) for v in block)
    if x < 0 or y < 0 or cw < 1 or ch < 1 or x + 3 * cw > ii.shape[1] - 1 or y + 3 * ch > ii.shape[0] - 1:
        raise ValueError(f"block {block} lies outside the {ii.shape[1] - 1}x{ii.shape[0] - 1} image")
    return int(_code_from_sums(_cell_sums(ii, x, y, cw, ch)))


def _scaled_rect(rect, s):
    x, y, cw, ch = rect
    return int(x * s), int(y * s), max(1, int(cw * s)), max(1, int(ch * s))


def _pyramid(model, img_w, img_h, min_size, scale_factor):
    """Yield ``(scale, win_w, win_h)`` from ``min_size`` upward while the window fits."""
    s = min_size / min(model.window_w, model.window_h)
    while True:
        ww, wh = int(round(model.window_w * s)), int(round(model.window_h * s))
        if ww > img_w or wh > img_h:
            return
        yield s, ww, wh
        s *= scale_factor


def _step_pixels(model, step, s):
    base = model.window_w / 8.0 if step is None else step
    return max(1, int(round(base * s)))


def evaluate_window(model, ii, x, y, s=1.0):
    """Brute-force evaluation of every stage at one window.

    Returns ``(accepted, stage_sums)``; all stages are computed regardless of
    early rejection.
    """
    sums = []
    for stage in model.stages:
        total = 0.0
        for weak in stage.weaks:
            bx, by, cw, ch = _scaled_rect(weak.rect, s)
            total += weak.votes[lbp_code(ii, (x + bx, y + by, cw, ch))]
        sums.append(total)
    accepted = all(t >= st.threshold for t, st in zip(sums, model.stages))
    return accepted, sums


def cascade_detect(model, img, scale_factor=None, min_size=None, step=None, ii=None):
    """Scan ``model`` over ``img`` and return every accepted window, unmerged.

    The pyramid starts at ``min_size`` (smaller window side) and grows by
    ``scale_factor``; MB-LBP blocks are scaled with the window so a single
    integral image serves every level. Stages are evaluated only on windows
    that survived the previous stage. ``raw_score`` is the final-stage vote
    sum minus its threshold.
    """
    img = check_gray_image(img)
    scale_factor = model.scan.scale_factor if scale_factor is None else scale_factor
    step = model.scan.step if step is None else step
    min_size = min(model.window_w, model.window_h) if min_size is None else min_size
    if scale_factor <= 1:
        raise ValueError(f"scale_factor must exceed 1, got {scale_factor}")
    if min_size < min(model.window_w, model.window_h):
        raise ValueError(f"min_size {min_size} is smaller than the {model.window_w}x{model.window_h} window")
    if ii is None:
        ii = integral(img)
    img_h, img_w = img.shape
    out = []
    for s, ww, wh in _pyramid(model, img_w, img_h, min_size, scale_factor):
        sp = _step_pixels(model, step, s)
        gx = np.arange(0, img_w - ww + 1, sp, dtype=np.int64)
        gy = np.arange(0, img_h - wh + 1, sp, dtype=np.int64)
        px, py = (a.ravel() for a in np.meshgrid(gx, gy))
        alive = np.arange(px.size)
        margin = None
        for stage in model.stages:
            total = np.zeros(alive.size)
            for weak in stage.weaks:
                bx, by, cw, ch = _scaled_rect(weak.rect, s)
                codes = _code_from_sums(_cell_sums(ii, px[alive] + bx, py[alive] + by, cw, ch))
                total = total + np.asarray(weak.votes, dtype=np.float64)[codes]
            keep = total >= stage.threshold
            alive, margin = alive[keep], (total - stage.threshold)[keep]
            if alive.size == 0:
                break
        for i, m in zip(alive, margin if margin is not None else []):
            x, y = float(px[i]), float(py[i])
            out.append(SegmentDetection(model.kind, BBox(x, y, x + ww, y + wh), float(m)))
    return out


def merge_detections(dets, min_iou=0.3):
    """Group detections linked by pairwise IoU >= ``min_iou`` and average each group's corners."""
    n = len(dets)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if dets[i].kind == dets[j].kind and iou(dets[i].box, dets[j].box) >= min_iou:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(dets[i])
    merged = []
    for members in groups.values():
        corners = np.array([d.box.as_tuple() for d in members], dtype=np.float64).mean(axis=0)
        scores = [d.raw_score for d in members if d.raw_score is not None]
        merged.append(SegmentDetection(members[0].kind, BBox(*map(float, corners)), max(scores) if scores else None))
    merged.sort(key=SegmentDetection.sort_key)
    return merged


def cascade_to_dict(model):
    return {
        "kind": model.kind.value,
        "window": [model.window_w, model.window_h],
        "scan": {"scale_factor": model.scan.scale_factor, "step": model.scan.step},
        "stages": [
            {"threshold": st.threshold, "weaks": [{"rects": list(w.rect), "votes": list(w.votes)} for w in st.weaks]}
            for st in model.stages
        ],
    }


def cascade_from_dict(doc):
    try:
        scan = doc.get("scan") or {}
        return CascadeModel(
            kind=SegmentKind(doc["kind"]),
            window_w=int(doc["window"][0]),
            window_h=int(doc["window"][1]),
            stages=tuple(
                Stage(
                    float(st["threshold"]),
                    tuple(WeakClassifier(tuple(int(v) for v in w["rects"]), tuple(float(v) for v in w["votes"]))
                          for w in st["weaks"]),
                )
                for st in doc["stages"]
            ),
            scan=ScanParams(float(scan.get("scale_factor", 1.2)), scan.get("step")),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ValueError(f"malformed cascade description: {exc!r}") from exc


def load_cascade(path):
    with open(path) as fh:
        return cascade_from_dict(json.load(fh))


def save_cascade(model, path):
    with open(path, "w") as fh:
        json.dump(cascade_to_dict(model), fh)


def make_toy_cascade(kind, window=(24, 24), n_stages=3, n_weak=4, seed=0, vote=1.0):
    """Random MB-LBP cascade for benchmarking the scan machinery; detects nothing in particular."""
    rng = np.random.default_rng(seed)
    ww, wh = window
    stages = []
    for _ in range(n_stages):
        weaks = []
        for _ in range(n_weak):
            cw = int(rng.integers(1, ww // 3 + 1))
            ch = int(rng.integers(1, wh // 3 + 1))
            x = int(rng.integers(0, ww - 3 * cw + 1))
            y = int(rng.integers(0, wh - 3 * ch + 1))
            votes = tuple(float(v) for v in np.where(rng.random(256) < 0.5, vote, -vote))
            weaks.append(WeakClassifier((x, y, cw, ch), votes))
        stages.append(Stage(0.0, tuple(weaks)))
    return CascadeModel(kind, ww, wh, tuple(stages))


@dataclass(frozen=True)
class FixtureDetectorConfig:
    """Noise model of the annotation-driven detector.

    ``center_jitter_sd`` is a fraction of the face width/height and
    ``scale_jitter_sd`` the deviation of the log segment size. A segment is
    reported only when at least ``visibility`` of its area lies in the frame,
    and its box is then clipped to the frame.
    """

    miss_rate: float = 0.0
    false_positive_rate: float = 0.0
    center_jitter_sd: float = 0.0
    seed: int = 0
    visibility: float = 0.6
    scale_jitter_sd: float = 0.0

    def __post_init__(self):
        check_fraction(self.miss_rate, "miss_rate")
        check_fraction(self.visibility, "visibility")
        if min(self.false_positive_rate, self.center_jitter_sd, self.scale_jitter_sd) < 0:
            raise ValueError("false_positive_rate and jitter deviations must be non-negative")


def fixture_detect(cfg, kinds, gt_face, frame_id, img_w, img_h, canonical=None):
    """Deterministic synthetic segment detections for one frame.

    Random draws are made for all 14 kinds in their fixed order, so the output
    for a kind does not depend on which other kinds are active.
    """
    canonical = canonical or DEFAULT_CANONICAL
    active = set(kinds)
    rng = np.random.default_rng([int(cfg.seed) & 0xFFFFFFFF, int(frame_id) & 0xFFFFFFFF])
    out = []
    for kind in SegmentKind:
        missed = rng.random() < cfg.miss_rate
        jx, jy, js = (float(v) for v in rng.normal(0.0, 1.0, size=3))
        if gt_face is None or missed or kind not in active:
            continue
        seg = canonical_subrect(kind, gt_face, canonical)
        if cfg.center_jitter_sd > 0 or cfg.scale_jitter_sd > 0:
            cx = (seg.x1 + seg.x2) / 2 + jx * cfg.center_jitter_sd * gt_face.width
            cy = (seg.y1 + seg.y2) / 2 + jy * cfg.center_jitter_sd * gt_face.height
            half = 0.5 * math.exp(js * cfg.scale_jitter_sd)
            seg = BBox(cx - half * seg.width, cy - half * seg.height, cx + half * seg.width, cy + half * seg.height)
        visible = seg.clamp(img_w, img_h)
        if visible.area <= 0 or visible.area < cfg.visibility * seg.area:
            continue
        out.append(SegmentDetection(kind, visible))

    n_fp = int(rng.poisson(cfg.false_positive_rate)) if cfg.false_positive_rate > 0 else 0
    kind_list = [k for k in SegmentKind if k in active]
    short = min(img_w, img_h)
    for _ in range(n_fp):
        kind = kind_list[int(rng.integers(len(kind_list)))]
        size = float(rng.uniform(0.2, 0.6)) * short
        fx = float(rng.uniform(0, img_w - size))
        fy = float(rng.uniform(0, img_h - size))
        phantom = BBox(fx, fy, fx + size, fy + size)
        seg = canonical_subrect(kind, phantom, canonical)
        out.append(SegmentDetection(kind, seg))
    out.sort(key=SegmentDetection.sort_key)
    return out


class FixtureBackend:
    """Detector backend wrapping :func:`fixture_detect`; reads ``frame.hint``."""

    uses_pixels = False

    def __init__(self, config=None, kinds=None, canonical=None):
        self.config = config or FixtureDetectorConfig()
        self.kinds = tuple(kinds) if kinds is not None else tuple(SegmentKind)
        self.canonical = canonical

    def detect(self, frame, processed=None, scale=1.0):
        return fixture_detect(self.config, self.kinds, frame.hint, frame.frame_id, frame.width,
                              frame.height, self.canonical)


class CascadeBackend:
    """Runs one cascade per kind on the preprocessed frame and maps boxes back to frame coordinates."""

    uses_pixels = True

    def __init__(self, models, min_size=64, merge_iou=0.3):
        self.models = sorted(models, key=lambda m: m.kind.order)
        self.kinds = tuple(m.kind for m in self.models)
        if len(set(self.kinds)) != len(self.kinds):
            raise ValueError("one cascade per segment kind")
        self.min_size = min_size
        self.merge_iou = merge_iou

    def detect(self, frame, processed=None, scale=1.0):
        img = frame.image if processed is None else processed
        ii = integral(img)
        out = []
        for model in self.models:
            min_size = max(self.min_size, model.window_w, model.window_h)
            dets = cascade_detect(model, img, min_size=min_size, ii=ii)
            if self.merge_iou is not None:
                dets = merge_detections(dets, self.merge_iou)
            for d in dets:
                box = d.box.scale(scale).clamp(frame.width, frame.height)
                if box.area > 0:
                    out.append(SegmentDetection(d.kind, box, d.raw_score))
        out.sort(key=SegmentDetection.sort_key)
        return out

