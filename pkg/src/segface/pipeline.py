"""End-to-end face detection from segment detections.

``preprocess -> segment detection -> face extrapolation -> clustering ->
proposals -> features -> linear score -> thresholded argmax``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .classifier import (
    LinearModel,
    build_tables,
    feature_kinds,
    featurize_many,
    label_proposals,
    train_linear,
)
from .clustering import ClusterParams, cluster_segments
from .detector import FixtureBackend, Frame
from .evaluation import confusion, f1, make_outcome
from .geometry import C0, BBox, estimate_full_face, parse_kinds
from .imaging import Preprocessor
from .proposal import generate_proposals
from .validation import check_gray_image

logger = logging.getLogger(__name__)

__all__ = [
    "DetectionConfig",
    "FrameAnalysis",
    "analyze_frame",
    "best_proposal",
    "detect_face",
    "SegmentFaceDetector",
    "check_frames",
]


@dataclass(frozen=True)
class DetectionConfig:
    active_kinds: tuple = C0
    theta: float = 0.0
    delta: float = 0.5
    zeta: int = 20
    cluster: ClusterParams = field(default_factory=ClusterParams)
    seed: int = 0
    canonical: dict | None = None

    def __post_init__(self):
        kinds = parse_kinds(self.active_kinds)
        object.__setattr__(self, "active_kinds", kinds)
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.zeta < 1:
            raise ValueError(f"zeta must be >= 1, got {self.zeta}")


@dataclass
class FrameAnalysis:
    detections: list
    estimates: list
    clusters: list
    proposals: list


def analyze_frame(frame, backend, config, preprocessor=None):
    """Run the pipeline up to proposal generation for one frame."""
    processed, scale = None, 1.0
    if frame.image is not None and preprocessor is not None:
        processed = preprocessor(frame.image)
        scale = float(preprocessor.factor)
    active = set(config.active_kinds)
    dets = [d for d in backend.detect(frame, processed, scale) if d.kind in active]
    estimates = [(d, estimate_full_face(d.kind, d.box, frame.width, frame.height, config.canonical)) for d in dets]
    clusters = cluster_segments(estimates, config.cluster)
    proposals = []
    for cl in clusters:
        seed = f"{config.seed}:{frame.frame_id}:{cl.center_idx}"
        proposals.extend(generate_proposals(cl, estimates, config.zeta, seed))
    return FrameAnalysis(dets, estimates, clusters, proposals)


def _pick(proposals, scores):
    # highest score, then larger box, then lexicographically smallest box
    best = min(range(len(proposals)),
               key=lambda i: (-scores[i], -proposals[i].box.area, proposals[i].box.as_tuple()))
    return proposals[best].box, float(scores[best])


def best_proposal(frame, backend, tables, model, config, preprocessor=None):
    """Highest-scoring ``(box, score)`` of a frame regardless of the threshold, or ``None``."""
    analysis = analyze_frame(frame, backend, config, preprocessor)
    if not analysis.proposals:
        return None
    scores = model.score(featurize_many(analysis.proposals, tables, model.kinds))
    return _pick(analysis.proposals, scores)


def detect_face(frame, backend, tables, model, config, preprocessor=None):
    """At most one face per frame: the best proposal if its score reaches ``config.theta``."""
    best = best_proposal(frame, backend, tables, model, config, preprocessor)
    if best is None or best[1] < config.theta:
        return None
    return best


def check_frames(X, sizes=None):
    """Coerce a sequence of images or :class:`Frame` objects to frames with ids."""
    frames = []
    for i, item in enumerate(X):
        if isinstance(item, Frame):
            if item.image is not None:
                item = Frame(check_gray_image(item.image), item.frame_id, item.hint, item.size)
            elif item.size is None:
                raise ValueError(f"frame {item.frame_id} has neither pixels nor a size")
            frames.append(item)
        else:
            frames.append(Frame(check_gray_image(item, name=f"X[{i}]"), i))
    return frames


class SegmentFaceDetector(BaseEstimator):
    """Face detector built from clustered facial-segment detections.

    ``fit(X, y)`` takes frames and their visible-face boxes (``None`` for
    frames without a face), builds the co-occurrence probability tables from
    the labelled training proposals and fits the linear scorer.
    ``predict(X)`` returns, per frame, ``(BBox, score)`` or ``None``.

    Parameters mirror the pipeline configuration; ``backend`` is any object
    with ``detect(frame, processed, scale)`` returning segment detections
    (defaults to a noiseless :class:`~segface.detector.FixtureBackend`).
    """

    def __init__(
        self,
        backend=None,
        active_kinds="C0",
        zeta=20,
        c=2,
        r_factor=1.0 / 6.0,
        delta=0.5,
        theta=0.0,
        downsample=4,
        clahe_tiles=(8, 8),
        clahe_clip=2.0,
        smoothing=0.0,
        svm_lambda=1e-4,
        svm_epochs=200,
        svm_batch_size=32,
        random_state=0,
        canonical=None,
    ):
        self.backend = backend
        self.active_kinds = active_kinds
        self.zeta = zeta
        self.c = c
        self.r_factor = r_factor
        self.delta = delta
        self.theta = theta
        self.downsample = downsample
        self.clahe_tiles = clahe_tiles
        self.clahe_clip = clahe_clip
        self.smoothing = smoothing
        self.svm_lambda = svm_lambda
        self.svm_epochs = svm_epochs
        self.svm_batch_size = svm_batch_size
        self.random_state = random_state
        self.canonical = canonical

    def _config(self):
        return DetectionConfig(
            active_kinds=self.active_kinds,
            theta=self.theta,
            delta=self.delta,
            zeta=self.zeta,
            cluster=ClusterParams(self.c, self.r_factor),
            seed=self.random_state,
            canonical=self.canonical,
        )

    def _backend(self):
        return self.backend if self.backend is not None else FixtureBackend()

    def _preprocessor(self):
        tx, ty = self.clahe_tiles
        return Preprocessor(self.downsample, tx, ty, self.clahe_clip)

    def _proposals(self, X):
        config, backend, pre = self._config(), self._backend(), self._preprocessor()
        return [analyze_frame(frame, backend, config, pre).proposals for frame in check_frames(X)]

    def fit(self, X, y):
        X = list(X)
        y = list(y)
        if len(X) != len(y):
            raise ValueError(f"{len(X)} frames but {len(y)} annotations")
        config = self._config()
        positives, negatives = [], []
        for props, gt in zip(self._proposals(X), y):
            pos, neg = label_proposals(props, gt, config.delta)
            positives.extend(pos)
            negatives.extend(neg)
        if not positives:
            raise ValueError("no training proposal overlaps a face; cannot train a face scorer")
        self.tables_ = build_tables(positives, negatives, self.smoothing)
        kinds = feature_kinds(config.active_kinds)
        if negatives:
            feats = featurize_many(positives + negatives, self.tables_, kinds)
            labels = np.r_[np.ones(len(positives)), np.zeros(len(negatives))]
            self.model_ = train_linear(feats, labels, self.svm_lambda, self.svm_epochs, self.random_state,
                                       kinds, self.svm_batch_size)
        else:
            # One-class data: the hinge-loss optimum is w = 0, b = 1.
            logger.warning("no non-face proposals in the training data; using the constant accept-all scorer")
            self.model_ = LinearModel(tuple(0.0 for _ in range(2 * len(kinds) + 2)), 1.0, kinds)
        self.n_positive_ = len(positives)
        self.n_negative_ = len(negatives)
        return self

    def decision_function(self, X):
        """Best ``(box, score)`` per frame ignoring ``theta`` (``None`` when no proposal exists)."""
        check_is_fitted(self, "model_")
        config, backend, pre = self._config(), self._backend(), self._preprocessor()
        return [best_proposal(f, backend, self.tables_, self.model_, config, pre) for f in check_frames(X)]

    def predict(self, X):
        return [d if d is not None and d[1] >= self.theta else None for d in self.decision_function(X)]

    def score(self, X, y):
        """Frame-level F1 at the configured overlap threshold."""
        outcomes = [make_outcome(i, gt, det, self.delta) for i, (gt, det) in enumerate(zip(y, self.predict(X)))]
        return f1(confusion(outcomes))


def as_bbox(value):
    if value is None or isinstance(value, BBox):
        return value
    return BBox.from_seq(value)
