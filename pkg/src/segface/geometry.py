"""Facial segment taxonomy, box algebra and segment-to-face extrapolation."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

__all__ = [
    "BBox",
    "SegmentKind",
    "FaceEstimate",
    "DEFAULT_CANONICAL",
    "C0",
    "CBEST",
    "iou",
    "estimate_full_face",
    "enclosing_box",
    "canonical_subrect",
    "parse_kinds",
]


@dataclass(frozen=True, order=True)
class BBox:
    """Axis-aligned box with top-left ``(x1, y1)`` and bottom-right ``(x2, y2)``."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if not (self.x1 <= self.x2 and self.y1 <= self.y2):
            raise ValueError(f"invalid box corners {self.as_tuple()}")

    @property
    def width(self):
        return self.x2 - self.x1

    @property
    def height(self):
        return self.y2 - self.y1

    @property
    def area(self):
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    @property
    def center(self):
        return ((self.x1 + self.x2) / 2, (self.y1 + self.y2) / 2)

    def as_tuple(self):
        return (self.x1, self.y1, self.x2, self.y2)

    def clamp(self, width, height):
        width, height = float(width), float(height)
        x1 = min(max(self.x1, 0.0), width)
        y1 = min(max(self.y1, 0.0), height)
        return BBox(x1, y1, max(x1, min(self.x2, width)), max(y1, min(self.y2, height)))

    def scale(self, factor):
        return BBox(self.x1 * factor, self.y1 * factor, self.x2 * factor, self.y2 * factor)

    @classmethod
    def from_seq(cls, seq):
        x1, y1, x2, y2 = (float(v) for v in seq)
        return cls(x1, y1, x2, y2)


class SegmentKind(enum.Enum):
    """The 14 facial segments, in the fixed order used for feature layouts."""

    EP = "EP"
    UL12 = "UL12"
    U12 = "U12"
    UR12 = "UR12"
    UL34 = "UL34"
    U34 = "U34"
    UR34 = "UR34"
    L12 = "L12"
    L34 = "L34"
    NS = "NS"
    R34 = "R34"
    R12 = "R12"
    B34 = "B34"
    B12 = "B12"

    @property
    def order(self):
        return _KIND_ORDER[self]

    def __lt__(self, other):
        if not isinstance(other, SegmentKind):
            return NotImplemented
        return self.order < other.order


_KIND_ORDER = {k: i for i, k in enumerate(SegmentKind)}

# Position of each segment inside a unit face, (u1, v1, u2, v2).
DEFAULT_CANONICAL = {
    SegmentKind.EP: (0.125, 0.2, 0.875, 0.45),
    SegmentKind.UL12: (0.0, 0.0, 0.5, 0.5),
    SegmentKind.U12: (0.0, 0.0, 1.0, 0.5),
    SegmentKind.UR12: (0.5, 0.0, 1.0, 0.5),
    SegmentKind.UL34: (0.0, 0.0, 0.75, 0.75),
    SegmentKind.U34: (0.0, 0.0, 1.0, 0.75),
    SegmentKind.UR34: (0.25, 0.0, 1.0, 0.75),
    SegmentKind.L12: (0.0, 0.0, 0.5, 1.0),
    SegmentKind.L34: (0.0, 0.0, 0.75, 1.0),
    SegmentKind.NS: (0.35, 0.35, 0.65, 0.75),
    SegmentKind.R34: (0.25, 0.0, 1.0, 1.0),
    SegmentKind.R12: (0.5, 0.0, 1.0, 1.0),
    SegmentKind.B34: (0.0, 0.25, 1.0, 1.0),
    SegmentKind.B12: (0.0, 0.5, 1.0, 1.0),
}

C0 = tuple(SegmentKind)
CBEST = (
    SegmentKind.NS,
    SegmentKind.EP,
    SegmentKind.UL34,
    SegmentKind.UR34,
    SegmentKind.U12,
    SegmentKind.L34,
    SegmentKind.UL12,
    SegmentKind.R12,
    SegmentKind.L12,
)


def parse_kinds(spec):
    """Resolve ``"C0"``, ``"Cbest"``, a comma list or a sequence of names to kinds."""
    if isinstance(spec, str):
        key = spec.strip().lower()
        if key == "c0":
            return C0
        if key == "cbest":
            return CBEST
        spec = [s for s in spec.split(",") if s.strip()]
    kinds = tuple(k if isinstance(k, SegmentKind) else SegmentKind(str(k).strip().upper()) for k in spec)
    if not kinds:
        raise ValueError("at least one segment kind is required")
    if len(set(kinds)) != len(kinds):
        raise ValueError(f"duplicate segment kinds in {[k.value for k in kinds]}")
    return kinds


def validate_canonical(table):
    for kind in SegmentKind:
        if kind not in table:
            raise ValueError(f"canonical table is missing {kind.value}")
        u1, v1, u2, v2 = table[kind]
        if not (0 <= u1 < u2 <= 1 and 0 <= v1 < v2 <= 1):
            raise ValueError(f"canonical rectangle for {kind.value} is degenerate: {table[kind]}")
    return table


@dataclass(frozen=True)
class FaceEstimate:
    """Full-face box implied by one segment.

    ``face`` is clamped to the image; ``center`` and ``half_diagonal`` refer to
    the unclamped estimate.
    """

    face: BBox
    center: tuple
    source_kind: SegmentKind
    half_diagonal: float


def iou(a, b):
    """Intersection over union of two boxes; 0 when the union is empty."""
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def canonical_subrect(kind, face, canonical=None):
    """Box that segment ``kind`` occupies inside ``face``."""
    u1, v1, u2, v2 = (canonical or DEFAULT_CANONICAL)[kind]
    w, h = face.width, face.height
    return BBox(face.x1 + u1 * w, face.y1 + v1 * h, face.x1 + u2 * w, face.y1 + v2 * h)


def _center_coord(lo, hi, a1, a2, extent):
    # Reference the segment edge nearest the face centre so the arithmetic
    # stays exact for the common half / three-quarter segments.
    if abs(0.5 - a2) < abs(0.5 - a1):
        return hi + (0.5 - a2) * extent
    return lo + (0.5 - a1) * extent


def estimate_full_face(kind, seg, img_w, img_h, canonical=None):
    """Extrapolate a segment box to the full face it implies.

    With canonical rectangle ``(u1, v1, u2, v2)`` the face has width
    ``W = seg.width / (u2 - u1)`` and height ``H = seg.height / (v2 - v1)``
    and extends ``u1 * W`` left of and ``(1 - u2) * W`` right of the segment
    (likewise vertically). The returned face box is clamped to the image.
    """
    if seg.width <= 0 or seg.height <= 0:
        raise ValueError(f"segment box {seg.as_tuple()} has no area")
    u1, v1, u2, v2 = (canonical or DEFAULT_CANONICAL)[kind]
    if not (u2 > u1 and v2 > v1):
        raise ValueError(f"canonical rectangle for {kind.value} has no extent")
    fw = seg.width / (u2 - u1)
    fh = seg.height / (v2 - v1)
    fx1 = seg.x1 - u1 * fw
    fy1 = seg.y1 - v1 * fh
    fx2 = seg.x2 + (1 - u2) * fw
    fy2 = seg.y2 + (1 - v2) * fh
    center = (_center_coord(seg.x1, seg.x2, u1, u2, fw), _center_coord(seg.y1, seg.y2, v1, v2, fh))
    face = BBox(fx1, fy1, fx2, fy2).clamp(img_w, img_h)
    return FaceEstimate(face, center, kind, 0.5 * math.hypot(fw, fh))


def enclosing_box(boxes):
    """Smallest box containing every box in ``boxes``."""
    boxes = list(boxes)
    if not boxes:
        raise ValueError("enclosing_box needs at least one box")
    return BBox(
        min(b.x1 for b in boxes),
        min(b.y1 for b in boxes),
        max(b.x2 for b in boxes),
        max(b.y2 for b in boxes),
    )
