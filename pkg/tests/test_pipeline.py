import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from segface.classifier import LinearModel, build_tables, feature_kinds
from segface.dataset import SynthSpec, synth_dataset
from segface.detector import FixtureBackend, FixtureDetectorConfig, Frame, SegmentDetection
from segface.geometry import C0, BBox, SegmentKind, canonical_subrect
from segface.pipeline import DetectionConfig, SegmentFaceDetector, analyze_frame, best_proposal, detect_face

K = SegmentKind
KINDS = (K.NS, K.EP, K.U12)


class ListBackend:
    """Returns the same detections for every frame."""

    def __init__(self, dets):
        self.dets = dets

    def detect(self, frame, processed=None, scale=1.0):
        return list(self.dets)


def segments(face, kinds):
    return [SegmentDetection(k, canonical_subrect(k, face)) for k in kinds]


def set_weight_model(kinds, bias=0.0):
    """Scores each proposal by the face frequency of its kind-set."""
    fk = feature_kinds(kinds)
    return LinearModel((1.0,) + (0.0,) * (2 * len(fk) + 1), bias, fk)


FACE_A = BBox(20, 20, 80, 92)
FACE_B = BBox(200, 40, 260, 112)
FRAME = Frame(None, 0, None, (320, 180))
CONFIG = DetectionConfig(active_kinds=KINDS)


def test_no_clusters_no_face():
    backend = ListBackend([SegmentDetection(K.NS, BBox(0, 0, 10, 10))])
    tables = build_tables([{K.NS, K.EP}], [{K.NS, K.U12}])
    assert detect_face(FRAME, backend, tables, set_weight_model(KINDS), CONFIG) is None


def test_highest_score_wins_and_threshold_gates():
    backend = ListBackend(segments(FACE_A, (K.NS, K.EP)) + segments(FACE_B, (K.NS, K.U12)))
    tables = build_tables([{K.NS, K.EP}] * 9 + [{K.NS, K.U12}] * 2, [{K.NS, K.U12}])
    model = set_weight_model(KINDS)
    box, score = detect_face(FRAME, backend, tables, model, CONFIG)
    assert box.as_tuple() == pytest.approx(FACE_A.as_tuple()) and score == pytest.approx(9 / 11)
    high = DetectionConfig(active_kinds=KINDS, theta=0.9)
    assert detect_face(FRAME, backend, tables, model, high) is None
    assert best_proposal(FRAME, backend, tables, model, high) == (box, score)


def test_ties_prefer_larger_box():
    big = BBox(150, 20, 250, 140)
    backend = ListBackend(segments(FACE_A, (K.NS, K.EP)) + segments(big, (K.NS, K.EP)))
    tables = build_tables([{K.NS, K.EP}], [{K.NS, K.U12}])
    box, _ = detect_face(FRAME, backend, tables, set_weight_model(KINDS), CONFIG)
    assert box.as_tuple() == pytest.approx(big.as_tuple())


def test_ties_with_equal_area_prefer_lexicographically_smallest():
    other = BBox(200, 20, 260, 92)
    backend = ListBackend(segments(other, (K.NS, K.EP)) + segments(FACE_A, (K.NS, K.EP)))
    tables = build_tables([{K.NS, K.EP}], [{K.NS, K.U12}])
    box, _ = detect_face(FRAME, backend, tables, set_weight_model(KINDS), CONFIG)
    assert box.as_tuple() == pytest.approx(FACE_A.as_tuple())


def test_inactive_kinds_ignored():
    backend = ListBackend(segments(FACE_A, (K.NS, K.B12)))
    assert analyze_frame(FRAME, backend, CONFIG).detections == segments(FACE_A, (K.NS,))


def test_config_validation():
    with pytest.raises(ValueError):
        DetectionConfig(delta=0.0)
    with pytest.raises(ValueError):
        DetectionConfig(zeta=0)
    with pytest.raises(ValueError):
        DetectionConfig(active_kinds=[])


@pytest.fixture(scope="module")
def small_data():
    images, anns = synth_dataset(SynthSpec(frame_count=60, seed=5))
    frames = [Frame(im, a.frame_id, a.full_face) for im, a in zip(images, anns)]
    return frames, [a.gt_face for a in anns]


def noisy_backend():
    return FixtureBackend(FixtureDetectorConfig(0.1, 1.0, 0.03, 0, 0.6, 0.15))


def test_estimator_fit_predict(small_data):
    frames, faces = small_data
    est = SegmentFaceDetector(backend=noisy_backend(), svm_epochs=50).fit(frames, faces)
    assert est.n_positive_ > 0 and est.n_negative_ > 0
    assert len(est.model_.weights) == 30
    preds = est.predict(frames)
    assert len(preds) == len(frames)
    assert all(p is None or (isinstance(p[0], BBox) and p[1] >= est.theta) for p in preds)
    assert est.score(frames, faces) > 0.8


def test_estimator_is_deterministic_and_clonable(small_data):
    frames, faces = small_data
    est = SegmentFaceDetector(backend=noisy_backend(), active_kinds="Cbest", svm_epochs=20)
    a = est.fit(frames, faces).decision_function(frames)
    b = clone(est).fit(frames, faces).decision_function(frames)
    assert a == b
    assert clone(est).get_params()["active_kinds"] == "Cbest"


def test_estimator_one_class_fallback(small_data):
    frames, faces = small_data
    est = SegmentFaceDetector().fit(frames, faces)
    assert est.n_negative_ == 0 and est.model_.bias == 1.0 and not any(est.model_.weights)
    assert est.score(frames, faces) == 1.0


def test_estimator_needs_faces(small_data):
    frames, faces = small_data
    no_face = [f for f, y in zip(frames, faces) if y is None]
    with pytest.raises(ValueError):
        SegmentFaceDetector().fit(no_face, [None] * len(no_face))
    with pytest.raises(ValueError):
        SegmentFaceDetector().fit(frames, faces[:-1])


def test_estimator_accepts_raw_images():
    est = SegmentFaceDetector()
    est.fit([Frame(None, 0, FACE_A, (320, 180))], [FACE_A])
    img = np.zeros((180, 320), dtype=np.uint8)
    assert est.predict([img]) == [None]  # the fixture backend needs a face hint
    with pytest.raises(ValueError):
        est.predict([np.zeros((4, 4), dtype=np.float64) + 0.5])


def test_unfitted_estimator_raises():
    with pytest.raises(NotFittedError):
        SegmentFaceDetector().predict([FRAME])


def test_c0_default_configuration():
    est = SegmentFaceDetector()
    assert est._config().active_kinds == C0
    assert (est.zeta, est.c, est.r_factor, est.delta, est.theta, est.downsample) == (20, 2, 1 / 6, 0.5, 0.0, 4)
