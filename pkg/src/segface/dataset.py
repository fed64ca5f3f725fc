"""Annotations, model files and the synthetic scene generator."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .classifier import LinearModel, ProbabilityTables
from .geometry import BBox, SegmentKind, parse_kinds
from .imaging import image_size, write_pgm

__all__ = [
    "AnnotatedFrame",
    "assign_split",
    "load_annotations",
    "write_annotations",
    "annotation_counts",
    "save_model",
    "load_model",
    "model_to_dict",
    "model_from_dict",
    "FORMAT_VERSION",
    "SynthSpec",
    "synth_frame",
    "synth_dataset",
    "write_dataset",
]

FORMAT_VERSION = 1
SPLITS = ("train", "test")
_KNOWN_FIELDS = {"image", "face", "split", "full_face", "size"}


@dataclass
class AnnotatedFrame:
    image_path: str
    gt_face: BBox | None
    split: str
    frame_id: int = 0
    full_face: BBox | None = None  # unclipped face, when known (synthetic data)
    size: tuple | None = None
    extra: dict = field(default_factory=dict)

    def to_record(self, root=None):
        path = self.image_path
        if root is not None:
            path = os.path.relpath(path, root)
        rec = {"image": path, "face": None if self.gt_face is None else list(self.gt_face.as_tuple()),
               "split": self.split}
        if self.full_face is not None:
            rec["full_face"] = list(self.full_face.as_tuple())
        if self.size is not None:
            rec["size"] = list(self.size)
        rec.update(self.extra)
        return rec


def assign_split(n, seed=0, train_fraction=0.2):
    """Seeded split with ``round(train_fraction * n)`` training frames."""
    n_train = int(round(train_fraction * n))
    order = np.random.default_rng(seed).permutation(n)
    split = ["test"] * n
    for i in order[:n_train]:
        split[int(i)] = "train"
    return split


def _box_or_none(value, where):
    if value is None:
        return None
    if not isinstance(value, (list, tuple)) or len(value) != 4:
        raise ValueError(f"{where}: face must be [x1, y1, x2, y2] or null, got {value!r}")
    try:
        return BBox.from_seq(value)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{where}: bad face box {value!r}: {exc}") from exc


def load_annotations(path, seed=0, train_fraction=0.2, check_bounds=True, min_face=None):
    """Read a JSON-lines annotation file.

    Each line is ``{"image": ..., "face": [x1, y1, x2, y2] | null, "split": ...}``;
    unknown fields are ignored. Image paths are relative to the annotation
    file. Frames without a ``split`` receive a seeded 20/80 train/test split.
    """
    root = os.path.dirname(os.path.abspath(path))
    frames, missing_split = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if not isinstance(rec, dict) or "image" not in rec:
                    raise ValueError("expected an object with an 'image' field")
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed annotation: {exc}") from exc
            where = f"{path}:{lineno} ({rec['image']})"
            face = _box_or_none(rec.get("face"), where)
            full = _box_or_none(rec.get("full_face"), where)
            split = rec.get("split")
            if split is not None and split not in SPLITS:
                raise ValueError(f"{where}: split must be one of {SPLITS}, got {split!r}")
            image_path = os.path.join(root, rec["image"])
            size = tuple(int(v) for v in rec["size"]) if rec.get("size") else None
            if check_bounds and face is not None:
                if size is None and os.path.exists(image_path):
                    size = tuple(image_size(image_path))
                if size is not None and (face.x1 < 0 or face.y1 < 0 or face.x2 > size[0] or face.y2 > size[1]):
                    raise ValueError(f"{where}: face {face.as_tuple()} lies outside the {size[0]}x{size[1]} image")
                if min_face is not None and face.area < min_face * min_face:
                    raise ValueError(f"{where}: face smaller than the {min_face}x{min_face} minimum")
            if split is None:
                missing_split.append(len(frames))
            extra = {k: v for k, v in rec.items() if k not in _KNOWN_FIELDS}
            frames.append(AnnotatedFrame(image_path, face, split, len(frames), full, size, extra))
    if missing_split:
        splits = assign_split(len(missing_split), seed, train_fraction)
        for idx, s in zip(missing_split, splits):
            frames[idx].split = s
    return frames


def write_annotations(frames, path):
    root = os.path.dirname(os.path.abspath(path))
    with open(path, "w") as fh:
        for fr in frames:
            fh.write(json.dumps(fr.to_record(root), sort_keys=True) + "\n")


def annotation_counts(frames):
    faces = sum(f.gt_face is not None for f in frames)
    return {"frames": len(frames), "face_frames": faces, "no_face_frames": len(frames) - faces,
            "train": sum(f.split == "train" for f in frames), "test": sum(f.split == "test" for f in frames)}


# -- model files -------------------------------------------------------------


def _kind_names(kinds):
    return [k.value for k in sorted(kinds, key=lambda k: k.order)]


def model_to_dict(model, tables, config=None):
    return {
        "format_version": FORMAT_VERSION,
        "active_kinds": _kind_names(model.kinds),
        "weights": list(model.weights),
        "bias": model.bias,
        "tables": {
            "n_pos": tables.n_pos,
            "n_neg": tables.n_neg,
            "smoothing": tables.smoothing,
            "set_probs": [
                {"kinds": _kind_names(s), "pos": c[0], "neg": c[1],
                 "pT": tables.set_prob(s)[0], "pF": tables.set_prob(s)[1]}
                for s, c in tables.set_counts.items()
            ],
            "kind_probs": {
                k.value: {"pos": c[0], "neg": c[1], "pT": tables.kind_prob(k)[0], "pF": tables.kind_prob(k)[1]}
                for k, c in tables.kind_counts.items()
            },
        },
        "train_config": config or {},
    }


def model_from_dict(doc):
    if not isinstance(doc, dict):
        raise ValueError("model file must hold a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format_version {version!r} (expected {FORMAT_VERSION})")
    try:
        kinds = parse_kinds(doc["active_kinds"])
        weights = tuple(float(w) for w in doc["weights"])
        model = LinearModel(weights, float(doc["bias"]), tuple(sorted(kinds, key=lambda k: k.order)))
        t = doc["tables"]
        set_counts = {frozenset(SegmentKind(k) for k in e["kinds"]): (int(e["pos"]), int(e["neg"]))
                      for e in t["set_probs"]}
        kind_counts = {SegmentKind(k): (int(v["pos"]), int(v["neg"])) for k, v in t["kind_probs"].items()}
        tables = ProbabilityTables(set_counts, kind_counts, int(t["n_pos"]), int(t["n_neg"]),
                                   float(t.get("smoothing", 0.0)))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"corrupted model file: missing or invalid {exc}") from exc
    for e in t["set_probs"]:
        if (e.get("pT"), e.get("pF")) != tables.set_prob(frozenset(SegmentKind(k) for k in e["kinds"])):
            raise ValueError(f"corrupted model file: probabilities of {e['kinds']} disagree with their counts")
    return model, tables, doc.get("train_config", {})


def save_model(model, tables, config, path):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model, tables, config), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_model(path):
    """Return ``(LinearModel, ProbabilityTables, train_config)``."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: corrupted model file: {exc}") from exc
    return model_from_dict(doc)


# -- synthetic scenes ----------------------------------------------------------


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic desk-scale dataset.

    ``crop_fraction`` of the face frames have their face pushed across one
    of ``crop_sides`` so that between ``crop_min`` and ``crop_max`` of its
    extent falls outside the frame.
    """

    frame_count: int = 500
    no_face_fraction: float = 0.2
    crop_fraction: float = 0.3
    crop_min: float = 0.25
    crop_max: float = 0.5
    crop_sides: tuple = ("left", "right", "top", "bottom")
    clutter: float = 4.0
    width: int = 320
    height: int = 180
    face_min: int = 56
    face_max: int = 96
    aspect: float = 1.2
    seed: int = 0
    train_fraction: float = 0.2

    def __post_init__(self):
        for name in ("no_face_fraction", "crop_fraction", "crop_min", "crop_max", "train_fraction"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.crop_min > self.crop_max:
            raise ValueError("crop_min exceeds crop_max")
        if round(self.face_max * self.aspect) > self.height or self.face_max > self.width:
            raise ValueError("faces larger than the frame")
        bad = set(self.crop_sides) - {"left", "right", "top", "bottom"}
        if bad:
            raise ValueError(f"unknown crop sides {sorted(bad)}")


def _ellipse_mask(xx, yy, cx, cy, rx, ry):
    return ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0


def _draw_face(img, face, rng):
    """Paint a high-contrast face glyph for the (possibly off-frame) face box."""
    h, w = img.shape
    x0, y0 = max(0, int(math.floor(face.x1))), max(0, int(math.floor(face.y1)))
    x1, y1 = min(w, int(math.ceil(face.x2))), min(h, int(math.ceil(face.y2)))
    yy, xx = np.mgrid[y0:y1, x0:x1]
    # unit face coordinates
    u = (xx + 0.5 - face.x1) / face.width
    v = (yy + 0.5 - face.y1) / face.height
    patch = img[y0:y1, x0:x1]
    skin = int(rng.integers(170, 230))
    head = _ellipse_mask(u, v, 0.5, 0.5, 0.5, 0.5)
    r = np.hypot((u - 0.5) / 0.5, (v - 0.5) / 0.5)
    rings = (skin - 25 * (np.floor(r * 4) % 2)).astype(np.int64)
    patch[head] = np.clip(rings[head], 0, 255)
    dark = int(rng.integers(10, 50))
    for cx in (0.3, 0.7):
        patch[_ellipse_mask(u, v, cx, 0.33, 0.1, 0.06)] = dark
    patch[(np.abs(u - 0.5) < 0.05) & (v > 0.4) & (v < 0.68)] = dark + 40
    patch[_ellipse_mask(u, v, 0.5, 0.8, 0.18, 0.045)] = dark


def _draw_clutter(img, rng, count):
    h, w = img.shape
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(count):
        cx, cy = rng.uniform(0, w), rng.uniform(0, h)
        rx, ry = rng.uniform(4, w / 6), rng.uniform(4, h / 4)
        val = int(rng.integers(0, 256))
        if rng.random() < 0.5:
            mask = (np.abs(xx - cx) <= rx) & (np.abs(yy - cy) <= ry)
        else:
            mask = _ellipse_mask(xx, yy, cx, cy, rx, ry)
        img[mask] = val


def synth_frame(spec, frame_id, has_face, crop_side=None):
    """Render one frame; returns ``(image, visible_face, full_face, crop_amount)``."""
    rng = np.random.default_rng([spec.seed & 0xFFFFFFFF, frame_id])
    h, w = spec.height, spec.width
    gx = np.linspace(rng.uniform(40, 140), rng.uniform(40, 140), w)
    gy = np.linspace(0, rng.uniform(-30, 30), h)
    base = gx[None, :] + gy[:, None] + rng.normal(0, 6, size=(h, w))
    img = np.clip(np.round(base), 0, 255).astype(np.int64)
    _draw_clutter(img, rng, int(rng.poisson(spec.clutter)))
    visible = full = None
    amount = 0.0
    if has_face:
        fw = int(rng.integers(spec.face_min, spec.face_max + 1))
        fh = int(round(fw * spec.aspect))
        x = int(rng.integers(0, w - fw + 1))
        y = int(rng.integers(0, h - fh + 1))
        if crop_side is not None:
            f = rng.uniform(spec.crop_min, spec.crop_max)
            if crop_side in ("left", "right"):
                off = min(int(math.ceil(f * fw)), int(math.floor(spec.crop_max * fw)))
                x = -off if crop_side == "left" else w - fw + off
                amount = off / fw
            else:
                off = min(int(math.ceil(f * fh)), int(math.floor(spec.crop_max * fh)))
                y = -off if crop_side == "top" else h - fh + off
                amount = off / fh
        full = BBox(float(x), float(y), float(x + fw), float(y + fh))
        visible = full.clamp(w, h)
        _draw_face(img, full, rng)
    return img.astype(np.uint8), visible, full, amount


def synth_dataset(spec):
    """Generate ``(images, annotations)``; annotations are :class:`AnnotatedFrame` with relative paths."""
    n = spec.frame_count
    rng = np.random.default_rng([spec.seed & 0xFFFFFFFF, 0xFACE])
    n_noface = int(round(spec.no_face_fraction * n))
    order = rng.permutation(n)
    noface = set(int(i) for i in order[:n_noface])
    face_ids = [i for i in range(n) if i not in noface]
    n_crop = int(round(spec.crop_fraction * len(face_ids))) if spec.crop_sides else 0
    crop_ids = [face_ids[int(i)] for i in rng.permutation(len(face_ids))[:n_crop]]
    sides = {fid: spec.crop_sides[int(rng.integers(len(spec.crop_sides)))] for fid in sorted(crop_ids)}
    splits = assign_split(n, spec.seed, spec.train_fraction)

    images, annotations = [], []
    for i in range(n):
        img, visible, full, amount = synth_frame(spec, i, i not in noface, sides.get(i))
        extra = {"crop_side": sides.get(i), "crop_amount": amount} if i in sides else {}
        images.append(img)
        annotations.append(AnnotatedFrame(f"frames/{i:06d}.pgm", visible, splits[i], i, full,
                                          (spec.width, spec.height), extra))
    return images, annotations


def write_dataset(spec, out_dir):
    """Write frames, ``annotations.jsonl`` and ``manifest.json`` under ``out_dir``."""
    images, annotations = synth_dataset(spec)
    os.makedirs(os.path.join(out_dir, "frames"), exist_ok=True)
    for img, ann in zip(images, annotations):
        write_pgm(os.path.join(out_dir, ann.image_path), img)
    ann_path = os.path.join(out_dir, "annotations.jsonl")
    with open(ann_path, "w") as fh:
        for ann in annotations:
            fh.write(json.dumps(ann.to_record(), sort_keys=True) + "\n")
    counts = annotation_counts(annotations)
    counts["cropped_frames"] = sum("crop_side" in a.extra for a in annotations)
    manifest = {"counts": counts, "split_seed": spec.seed, "synth": _spec_dict(spec)}
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return ann_path


def _spec_dict(spec):
    d = dict(spec.__dict__)
    d["crop_sides"] = list(spec.crop_sides)
    return d
