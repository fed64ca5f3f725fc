"""``segface synth|train|detect|eval|bench --config <file> [--jobs N] [--seed S] [key=value ...]``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .classifier import feature_kinds
from .config import load_config
from .dataset import SynthSpec, annotation_counts, load_annotations, load_model, save_model, write_dataset
from .detector import CascadeBackend, Frame, make_toy_cascade
from .evaluation import (
    apply_threshold,
    confusion,
    f1,
    make_outcome,
    precision_recall,
    recall_at_precision,
    sweep,
    time_calls,
    timing,
    tpr_at_fpr,
    write_curve_csv,
)
from .geometry import CBEST, SegmentKind
from .imaging import read_image
from .pipeline import DetectionConfig, analyze_frame, check_frames, detect_face

logger = logging.getLogger("segface")

COMMANDS = ("synth", "train", "detect", "eval", "bench")


class CLIError(Exception):
    pass


def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _select(frames, split):
    return frames if split == "all" else [f for f in frames if f.split == split]


def _to_frame(ann, backend_name):
    hint = ann.full_face if ann.full_face is not None else ann.gt_face
    if os.path.exists(ann.image_path):
        return Frame(read_image(ann.image_path), ann.frame_id, hint)
    if backend_name == "fixture" and ann.size is not None:
        return Frame(None, ann.frame_id, hint, ann.size)
    raise CLIError(f"image not found: {ann.image_path}")


def _load_split(cfg, split):
    path = cfg.annotations_path
    if not os.path.exists(path):
        raise CLIError(f"annotation file not found: {path}")
    anns = _select(load_annotations(path, seed=cfg.seed), split)
    if not anns:
        raise CLIError(f"no {split} frames in {path}")
    return anns, [_to_frame(a, cfg.backend) for a in anns]


def _fitted_estimator(cfg):
    if not os.path.exists(cfg.model):
        raise CLIError(f"model file not found: {cfg.model}")
    model, tables, _ = load_model(cfg.model)
    expected = feature_kinds(cfg.kinds())
    if tuple(model.kinds) != expected:
        raise CLIError(
            f"model/config mismatch: model trained for {[k.value for k in model.kinds]}, "
            f"config selects {[k.value for k in expected]}"
        )
    est = cfg.estimator()
    est.model_, est.tables_ = model, tables
    return est


def _decide(args):
    est, frames = args
    return est.decision_function(frames)


def _decisions(est, frames, jobs):
    if jobs <= 1 or len(frames) < 2:
        return est.decision_function(frames)
    size = -(-len(frames) // jobs)
    chunks = [frames[i : i + size] for i in range(0, len(frames), size)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(_decide, [(est, c) for c in chunks]))
    return [d for part in parts for d in part]


def cmd_synth(cfg, args):
    spec = SynthSpec(
        frame_count=cfg.synth_frames,
        no_face_fraction=cfg.synth_no_face_fraction,
        crop_fraction=cfg.synth_crop_fraction,
        crop_min=cfg.synth_crop_min,
        crop_max=cfg.synth_crop_max,
        clutter=cfg.synth_clutter,
        width=cfg.synth_width,
        height=cfg.synth_height,
        seed=cfg.seed,
    )
    ann_path = write_dataset(spec, cfg.data_dir)
    manifest_path = os.path.join(cfg.data_dir, "manifest.json")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    manifest["config"] = cfg.to_dict()
    _dump_json(manifest, manifest_path)
    print(f"wrote {ann_path}: {json.dumps(manifest['counts'], sort_keys=True)}")


def cmd_train(cfg, args):
    anns, frames = _load_split(cfg, "train")
    est = cfg.estimator()
    try:
        est.fit(frames, [a.gt_face for a in anns])
    except ValueError as exc:
        raise CLIError(f"training failed: {exc}") from exc
    os.makedirs(os.path.dirname(os.path.abspath(cfg.model)), exist_ok=True)
    save_model(est.model_, est.tables_, cfg.to_dict(), cfg.model)
    print(f"wrote {cfg.model}: {est.n_positive_} face / {est.n_negative_} non-face training proposals")


def cmd_detect(cfg, args):
    est = _fitted_estimator(cfg)
    anns, frames = _load_split(cfg, cfg.split)
    root = os.path.dirname(os.path.abspath(cfg.annotations_path))
    for ann, det in zip(anns, _decisions(est, frames, args.jobs)):
        name = os.path.relpath(ann.image_path, root)
        if det is None or det[1] < cfg.theta:
            print(f"{name} NONE")
        else:
            b = det[0]
            print(f"{name} {b.x1:.2f} {b.y1:.2f} {b.x2:.2f} {b.y2:.2f} {det[1]:.6f}")


def evaluate(cfg, jobs=1):
    """Run the fitted model over the configured split; returns ``(report, curve points)``."""
    est = _fitted_estimator(cfg)
    anns, frames = _load_split(cfg, cfg.split)
    raw = [make_outcome(a.frame_id, a.gt_face, d, cfg.delta) for a, d in zip(anns, _decisions(est, frames, jobs))]
    points = sweep(raw)
    at_theta = apply_threshold(raw, cfg.theta)
    counts = confusion(at_theta)
    precision, recall = precision_recall(counts)
    cropped = [o for a, o in zip(anns, at_theta) if a.extra.get("crop_side") and o.gt_present]
    metrics = {
        "theta": cfg.theta,
        "delta": cfg.delta,
        "tp": counts.tp,
        "fp": counts.fp,
        "fn": counts.fn,
        "tn": counts.tn,
        "f1": f1(counts),
        "precision": precision,
        "recall": recall,
        "tpr_at_1pct_fpr": tpr_at_fpr(raw, 0.01, points),
        "recall_at_99pct_precision": recall_at_precision(raw, 0.99, points),
        "cropped_frames": len(cropped),
        "cropped_recall": (sum(o.correct for o in cropped) / len(cropped)) if cropped else None,
    }
    report = {
        "metrics": metrics,
        "counts": annotation_counts(anns),
        "split": cfg.split,
        "model": os.path.basename(cfg.model),
        "config": cfg.to_dict(),
    }
    return report, points


def cmd_eval(cfg, args):
    report, points = evaluate(cfg, args.jobs)
    os.makedirs(cfg.output_dir, exist_ok=True)
    _dump_json(report, os.path.join(cfg.output_dir, "report.json"))
    write_curve_csv(points, os.path.join(cfg.output_dir, "curve.csv"))
    m = report["metrics"]
    print(f"F1={m['f1']:.4f} precision={m['precision']} recall={m['recall']} "
          f"TPR@1%FPR={m['tpr_at_1pct_fpr']} recall@99%P={m['recall_at_99pct_precision']}")


def _cascade_scaling(cfg, frames):
    pre = cfg.estimator()._preprocessor()
    out = {}
    for label, kinds in (("one_kind", (SegmentKind.NS,)), ("nine_kinds", CBEST)):
        models = [make_toy_cascade(k, seed=k.order) for k in kinds]
        backend = CascadeBackend(models, min_size=cfg.bench_min_size, merge_iou=cfg.merge_iou)
        config = DetectionConfig(active_kinds=kinds, zeta=cfg.zeta, seed=cfg.seed)
        _, secs = time_calls(lambda f: analyze_frame(f, backend, config, pre), frames)
        out[label] = timing(secs)
    ratio = out["nine_kinds"]["mean_ms"] / out["one_kind"]["mean_ms"]
    out["ratio"] = ratio
    out["sublinear"] = ratio < 9.0
    return out


def cmd_bench(cfg, args):
    est = _fitted_estimator(cfg)
    anns, frames = _load_split(cfg, cfg.split)
    frames = check_frames(frames[: cfg.bench_frames])
    config, backend, pre = est._config(), est._backend(), est._preprocessor()
    dets, secs = time_calls(lambda f: detect_face(f, backend, est.tables_, est.model_, config, pre), frames)
    report = {"timing": timing(secs), "detections": sum(d is not None for d in dets), "config": cfg.to_dict()}
    logger.info("detect: %.2f ms mean over %d frames", report["timing"]["mean_ms"], len(frames))
    if cfg.bench_cascade_scaling and all(f.image is not None for f in frames):
        report["cascade_scaling"] = scaling = _cascade_scaling(cfg, frames)
        logger.info("toy cascades: 1 kind %.2f ms, 9 kinds %.2f ms (ratio %.2f)",
                    scaling["one_kind"]["mean_ms"], scaling["nine_kinds"]["mean_ms"], scaling["ratio"])
    os.makedirs(cfg.output_dir, exist_ok=True)
    _dump_json(report, os.path.join(cfg.output_dir, "bench.json"))
    print(json.dumps(report["timing"], sort_keys=True))
    if "cascade_scaling" in report:
        print(f"cascade scaling ratio (9 kinds / 1 kind): {report['cascade_scaling']['ratio']:.2f}")


HANDLERS = {"synth": cmd_synth, "train": cmd_train, "detect": cmd_detect, "eval": cmd_eval, "bench": cmd_bench}


def build_parser():
    parser = argparse.ArgumentParser(prog="segface", description=__doc__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="TOML configuration file")
    parser.add_argument("--jobs", type=int, default=1, help="frame-parallel workers for detect/eval")
    parser.add_argument("--seed", type=int, help="overrides the config seed")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("overrides", nargs="*", metavar="key=value")
    return parser


def main(argv=None):
    args = build_parser().parse_intermixed_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = list(args.overrides) + ([f"seed={args.seed}"] if args.seed is not None else [])
        cfg = load_config(args.config, overrides)
        if args.jobs < 1:
            raise CLIError("--jobs must be >= 1")
        HANDLERS[args.command](cfg, args)
    except (CLIError, ValueError, OSError) as exc:
        print(f"segface {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
