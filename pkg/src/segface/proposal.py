"""Anchored subset proposals drawn from a cluster."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .geometry import BBox, enclosing_box

__all__ = ["Proposal", "generate_proposals", "subset_count"]


@dataclass(frozen=True)
class Proposal:
    anchor_idx: int
    member_idxs: tuple
    kind_set: frozenset
    box: BBox
    score: float | None = None

    def with_score(self, score):
        return Proposal(self.anchor_idx, self.member_idxs, self.kind_set, self.box, float(score))


def subset_count(m):
    """Number of anchored proposals available from ``m`` non-anchor members."""
    return (1 << m) - 1


def generate_proposals(cluster, estimates, zeta=20, rng_seed=0):
    """Up to ``zeta`` proposals for ``cluster``, each the anchor plus a nonempty subset of the rest.

    When all ``2**m - 1`` subsets fit under ``zeta`` they are all returned;
    otherwise ``zeta`` distinct subset codes are sampled without replacement
    from a generator seeded with ``rng_seed``. Proposals are ordered by subset
    code, bit ``j`` selecting the ``j``-th non-anchor member in index order.
    """
    if zeta < 1:
        raise ValueError(f"zeta must be >= 1, got {zeta}")
    others = [i for i in cluster.member_idxs if i != cluster.center_idx]
    m = len(others)
    if m == 0:
        raise ValueError("a cluster needs at least two members to form proposals")
    total = subset_count(m)
    if total <= zeta:
        codes = range(1, total + 1)
    else:
        codes = sorted(random.Random(rng_seed).sample(range(1, total + 1), zeta))

    anchor = cluster.center_idx
    proposals = []
    for code in codes:
        members = [anchor] + [others[j] for j in range(m) if code >> j & 1]
        members.sort()
        box = enclosing_box(estimates[i][1].face for i in members)
        kinds = frozenset(estimates[i][0].kind for i in members)
        proposals.append(Proposal(anchor, tuple(members), kinds, box))
    return proposals
