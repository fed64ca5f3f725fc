"""Proposal labelling, co-occurrence probability tables, features and the linear SVM."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .geometry import SegmentKind, iou

logger = logging.getLogger(__name__)

__all__ = [
    "label_proposals",
    "ProbabilityTables",
    "build_tables",
    "feature_kinds",
    "featurize",
    "featurize_many",
    "LinearSVM",
    "LinearModel",
    "train_linear",
]


def label_proposals(proposals, gt_face, delta=0.5):
    """Split proposals into those overlapping ``gt_face`` by at least ``delta`` and the rest."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    positives, negatives = [], []
    for p in proposals:
        if gt_face is not None and iou(p.box, gt_face) >= delta:
            positives.append(p)
        else:
            negatives.append(p)
    return positives, negatives


def _kind_set(item):
    return frozenset(item.kind_set if hasattr(item, "kind_set") else item)


@dataclass(frozen=True)
class ProbabilityTables:
    """Face / non-face frequencies of kind-sets and of individual kinds.

    For a kind-set ``S``: ``pT(S)`` is the fraction of face proposals whose
    kinds are exactly ``S`` and ``pF(S)`` the same over non-face proposals.
    For a kind ``i``: the fraction of face (non-face) proposals containing
    ``i``. ``smoothing`` adds a Laplace pseudo-count (0 leaves the raw
    frequencies, so unseen sets score 0).
    """

    set_counts: dict
    kind_counts: dict
    n_pos: int
    n_neg: int
    smoothing: float = 0.0

    def _ratio(self, count, n):
        if n == 0 and self.smoothing == 0:
            return 0.0
        return (count + self.smoothing) / (n + 2 * self.smoothing)

    def set_prob(self, kinds):
        kinds = frozenset(kinds)
        pos, neg = self.set_counts.get(kinds, (0, 0))
        return self._ratio(pos, self.n_pos), self._ratio(neg, self.n_neg)

    def kind_prob(self, kind):
        pos, neg = self.kind_counts.get(kind, (0, 0))
        return self._ratio(pos, self.n_pos), self._ratio(neg, self.n_neg)

    @property
    def set_probs(self):
        return {s: self.set_prob(s) for s in self.set_counts}

    @property
    def kind_probs(self):
        return {k: self.kind_prob(k) for k in SegmentKind}


def build_tables(positives, negatives, smoothing=0.0):
    """Count kind-set and per-kind occurrences among face and non-face proposals.

    Items may be proposals or plain iterables of :class:`SegmentKind`.
    """
    pos_sets = [_kind_set(p) for p in positives]
    neg_sets = [_kind_set(p) for p in negatives]
    if not pos_sets and not neg_sets:
        raise ValueError("cannot build probability tables from zero proposals")
    if not pos_sets or not neg_sets:
        logger.warning("probability tables built without %s proposals; their probabilities are 0",
                       "face" if not pos_sets else "non-face")
    pos_c, neg_c = Counter(pos_sets), Counter(neg_sets)
    set_counts = {s: (pos_c[s], neg_c[s]) for s in sorted(set(pos_c) | set(neg_c), key=_set_key)}
    kpos = Counter(k for s in pos_sets for k in s)
    kneg = Counter(k for s in neg_sets for k in s)
    kind_counts = {k: (kpos[k], kneg[k]) for k in SegmentKind if kpos[k] or kneg[k]}
    return ProbabilityTables(set_counts, kind_counts, len(pos_sets), len(neg_sets), float(smoothing))


def _set_key(kinds):
    return tuple(sorted(k.order for k in kinds))


def feature_kinds(active_kinds):
    """Kinds in feature-layout order (the fixed enumeration order of :class:`SegmentKind`)."""
    return tuple(sorted(set(active_kinds), key=lambda k: k.order))


def featurize(proposal, tables, active_kinds):
    """``2n + 2`` feature vector: set probabilities, then per-kind probabilities for present kinds."""
    kinds = feature_kinds(active_kinds)
    present = _kind_set(proposal)
    unknown = present - set(kinds)
    if unknown:
        raise ValueError(f"proposal kinds {sorted(k.value for k in unknown)} are not in the configuration")
    x = np.zeros(2 * len(kinds) + 2)
    x[0], x[1] = tables.set_prob(present)
    for i, kind in enumerate(kinds):
        if kind in present:
            x[2 + 2 * i], x[3 + 2 * i] = tables.kind_prob(kind)
    return x


def featurize_many(proposals, tables, active_kinds):
    n = 2 * len(set(active_kinds)) + 2
    if not proposals:
        return np.zeros((0, n))
    rows = {}
    out = np.empty((len(proposals), n))
    for r, p in enumerate(proposals):
        key = _kind_set(p)
        if key not in rows:
            rows[key] = featurize(key, tables, active_kinds)
        out[r] = rows[key]
    return out


class LinearSVM(ClassifierMixin, BaseEstimator):
    """Linear SVM trained by seeded mini-batch Pegasos.

    Minimises ``lam / 2 * ||(w, b)||^2 + mean(hinge)`` with step ``1 / (lam * t)``.
    The bias is folded in as a constant feature. Each epoch visits the samples
    in a seeded permutation, so training is reproducible for a given
    ``random_state``.
    """

    def __init__(self, lam=1e-4, epochs=200, batch_size=32, random_state=0):
        self.lam = lam
        self.epochs = epochs
        self.batch_size = batch_size
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_ = np.unique(y)
        if self.classes_.size != 2:
            raise ValueError(f"LinearSVM needs exactly two classes, got {self.classes_.tolist()}")
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        signs = np.where(y == self.classes_[1], 1.0, -1.0)
        Xa = np.hstack([X, np.ones((X.shape[0], 1))])
        w = np.zeros(Xa.shape[1])
        rng = np.random.default_rng(self.random_state)
        n, bs, t = Xa.shape[0], max(1, int(self.batch_size)), 0
        for _ in range(int(self.epochs)):
            order = rng.permutation(n)
            for start in range(0, n, bs):
                idx = order[start : start + bs]
                t += 1
                eta = 1.0 / (self.lam * t)
                xb, yb = Xa[idx], signs[idx]
                viol = yb * (xb @ w) < 1.0
                w *= 1.0 - eta * self.lam
                if viol.any():
                    w += (eta / idx.size) * (yb[viol] @ xb[viol])
        self.coef_ = w[:-1].copy()
        self.intercept_ = float(w[-1])
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.coef_.shape[0]:
            raise ValueError(f"expected {self.coef_.shape[0]} features, got {X.shape[1]}")
        return X @ self.coef_ + self.intercept_

    def predict(self, X):
        return np.where(self.decision_function(X) >= 0, self.classes_[1], self.classes_[0])


@dataclass(frozen=True)
class LinearModel:
    """Scoring model ``w . x + b`` tied to the kinds it was trained for."""

    weights: tuple
    bias: float
    kinds: tuple

    def __post_init__(self):
        if len(self.weights) != 2 * len(self.kinds) + 2:
            raise ValueError(
                f"{len(self.weights)} weights do not match 2n+2 = {2 * len(self.kinds) + 2} for n={len(self.kinds)}"
            )

    def score(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return X @ np.asarray(self.weights) + self.bias


def train_linear(features, labels, lam=1e-4, epochs=200, seed=0, kinds=None, batch_size=32):
    """Fit :class:`LinearSVM` on ``features`` with labels in {0, 1} or {-1, +1}."""
    labels = np.asarray(labels)
    if np.unique(labels).size < 2:
        raise ValueError("training needs both face and non-face proposals")
    svm = LinearSVM(lam=lam, epochs=epochs, batch_size=batch_size, random_state=seed).fit(features, labels)
    kinds = tuple(SegmentKind) if kinds is None else kinds
    return LinearModel(tuple(float(v) for v in svm.coef_), svm.intercept_, feature_kinds(kinds))
