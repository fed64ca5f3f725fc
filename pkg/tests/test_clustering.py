import math

import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import brute_force_clusters, random_scene, seeded

from segface.clustering import Cluster, ClusterParams, cluster_segments
from segface.detector import SegmentDetection
from segface.geometry import BBox, FaceEstimate, SegmentKind, canonical_subrect, estimate_full_face

K = SegmentKind


def estimate(kind, cx, cy, size=60.0):
    face = BBox(cx - size / 2, cy - size / 2, cx + size / 2, cy + size / 2)
    return SegmentDetection(kind, face), FaceEstimate(face, (cx, cy), kind, 0.5 * math.hypot(size, size))


def as_tuples(clusters):
    return [(cl.center_idx, cl.member_idxs, cl.radius) for cl in clusters]


def test_params_validation():
    with pytest.raises(ValueError):
        ClusterParams(c=0)
    with pytest.raises(ValueError):
        ClusterParams(r_factor=0.0)


def test_empty_input():
    assert cluster_segments([]) == []


def test_nose_with_four_agreeing_segments():
    face = BBox(100, 50, 196, 170)
    kinds = [K.NS, K.U12, K.B12, K.L34, K.UR12]
    scene = []
    for kind in kinds:
        seg = canonical_subrect(kind, face)
        scene.append((SegmentDetection(kind, seg), estimate_full_face(kind, seg, 640, 480)))
    clusters = cluster_segments(scene, ClusterParams(2, 1 / 6))
    assert [cl.center_idx for cl in clusters] == [0, 1, 2, 3, 4]
    assert clusters[0] == Cluster(0, (0, 1, 2, 3, 4), scene[0][1].half_diagonal / 6)
    assert all(len(cl.member_idxs) == 5 for cl in clusters)


def test_coincident_centres_form_two_clusters():
    scene = [estimate(K.NS, 50, 50), estimate(K.EP, 50, 50)]
    assert as_tuples(cluster_segments(scene)) == [(0, (0, 1), scene[0][1].half_diagonal / 6),
                                                  (1, (0, 1), scene[1][1].half_diagonal / 6)]


def test_far_apart_segments_do_not_cluster():
    scene = [estimate(K.NS, 0, 0), estimate(K.EP, 100, 0), estimate(K.U12, 0, 100)]
    assert cluster_segments(scene) == []
    assert len(cluster_segments(scene, ClusterParams(c=1))) == 3


def test_one_member_per_kind_nearest_wins():
    scene = [estimate(K.NS, 50, 50), estimate(K.EP, 55, 50), estimate(K.EP, 52, 50), estimate(K.NS, 51, 50)]
    anchor = cluster_segments(scene)[0]
    assert anchor.center_idx == 0 and anchor.member_idxs == (0, 2)


def test_equidistant_same_kind_goes_to_lower_index():
    scene = [estimate(K.NS, 50, 50), estimate(K.EP, 53, 50), estimate(K.EP, 47, 50)]
    assert cluster_segments(scene)[0].member_idxs == (0, 1)


@given(seed=st.integers(0, 10**6), n=st.integers(0, 30), c=st.integers(1, 4),
       r=st.sampled_from([1 / 6, 0.1, 0.3, 0.5]))
def test_matches_brute_force(seed, n, c, r):
    scene = random_scene(seeded(seed), n)
    assert as_tuples(cluster_segments(scene, ClusterParams(c, r))) == brute_force_clusters(scene, c, r)


@given(seed=st.integers(0, 10**6), n=st.integers(1, 30))
def test_cluster_invariants(seed, n):
    scene = random_scene(seeded(seed), n)
    for cl in cluster_segments(scene, ClusterParams(2, 0.3)):
        assert cl.center_idx in cl.member_idxs and len(cl.member_idxs) >= 2
        kinds = [scene[i][0].kind for i in cl.member_idxs]
        assert len(set(kinds)) == len(kinds)
        centre = scene[cl.center_idx][1].center
        assert all(math.dist(centre, scene[i][1].center) <= cl.radius for i in cl.member_idxs)


@given(seed=st.integers(0, 10**6), n=st.integers(1, 30))
def test_monotone_in_c_and_radius(seed, n):
    scene = random_scene(seeded(seed), n)
    anchors = [set(cl.center_idx for cl in cluster_segments(scene, ClusterParams(c, 0.3))) for c in (1, 2, 3, 4)]
    assert all(a >= b for a, b in zip(anchors, anchors[1:]))
    small = {cl.center_idx: cl for cl in cluster_segments(scene, ClusterParams(1, 0.1))}
    large = {cl.center_idx: cl for cl in cluster_segments(scene, ClusterParams(1, 0.4))}
    for k, cl in small.items():
        # a wider radius may swap a member for a nearer same-kind one, never lose the kind
        kinds_small = {scene[i][0].kind for i in cl.member_idxs}
        kinds_large = {scene[i][0].kind for i in large[k].member_idxs}
        assert kinds_small <= kinds_large
