"""Grouping of segment detections whose extrapolated face centres agree."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ClusterParams", "Cluster", "cluster_segments"]


@dataclass(frozen=True)
class ClusterParams:
    """``c``: minimum members (anchor included); ``r_factor``: radius as a fraction
    of the anchor's estimated-face half-diagonal."""

    c: int = 2
    r_factor: float = 1.0 / 6.0

    def __post_init__(self):
        if self.c < 1:
            raise ValueError(f"c must be >= 1, got {self.c}")
        if not self.r_factor > 0:
            raise ValueError(f"r_factor must be positive, got {self.r_factor}")


@dataclass(frozen=True)
class Cluster:
    center_idx: int
    member_idxs: tuple
    radius: float


def cluster_segments(estimates, params=ClusterParams()):
    """Form one candidate cluster per detection.

    ``estimates`` is a sequence of ``(SegmentDetection, FaceEstimate)`` pairs.
    For anchor ``k`` every detection whose face centre lies within
    ``r_factor * half_diagonal(k)`` (Euclidean) of ``k``'s centre is a
    candidate; candidates are reduced to one per kind, keeping the one nearest
    the anchor (the anchor always represents its own kind). Clusters with at
    least ``c`` members are returned, ordered by anchor index.
    """
    n = len(estimates)
    if n == 0:
        return []
    centers = np.array([est.center for _, est in estimates], dtype=np.float64)
    kinds = [det.kind for det, _ in estimates]
    dx = centers[:, 0][:, None] - centers[:, 0][None, :]
    dy = centers[:, 1][:, None] - centers[:, 1][None, :]
    dist = np.hypot(dx, dy)

    clusters = []
    for k in range(n):
        radius = params.r_factor * estimates[k][1].half_diagonal
        best = {kinds[k]: (0.0, -1, k)}
        for j in np.flatnonzero(dist[k] <= radius):
            j = int(j)
            if j == k:
                continue
            cand = (float(dist[k, j]), j, j)
            # anchor wins its own kind; ties otherwise go to the lower index
            if kinds[j] not in best or cand < best[kinds[j]]:
                best[kinds[j]] = cand
        if len(best) >= params.c:
            members = tuple(sorted(entry[2] for entry in best.values()))
            clusters.append(Cluster(k, members, radius))
    return clusters

