"""Detection of fully or partially visible faces from clustered facial-segment detections."""

from .classifier import LinearModel, LinearSVM, ProbabilityTables, build_tables, featurize, label_proposals
from .clustering import Cluster, ClusterParams, cluster_segments
from .detector import (
    CascadeBackend,
    CascadeModel,
    FixtureBackend,
    FixtureDetectorConfig,
    Frame,
    SegmentDetection,
    cascade_detect,
    fixture_detect,
)
from .geometry import C0, CBEST, BBox, FaceEstimate, SegmentKind, enclosing_box, estimate_full_face, iou
from .pipeline import DetectionConfig, SegmentFaceDetector, detect_face
from .proposal import Proposal, generate_proposals

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "C0",
    "CBEST",
    "CascadeBackend",
    "CascadeModel",
    "Cluster",
    "ClusterParams",
    "DetectionConfig",
    "FaceEstimate",
    "FixtureBackend",
    "FixtureDetectorConfig",
    "Frame",
    "LinearModel",
    "LinearSVM",
    "ProbabilityTables",
    "Proposal",
    "SegmentDetection",
    "SegmentFaceDetector",
    "SegmentKind",
    "build_tables",
    "cascade_detect",
    "cluster_segments",
    "detect_face",
    "enclosing_box",
    "estimate_full_face",
    "featurize",
    "fixture_detect",
    "generate_proposals",
    "iou",
    "label_proposals",
]
