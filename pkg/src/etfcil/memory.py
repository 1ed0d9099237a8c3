"""Rehearsal state: raw-input exemplar stores and per-class feature means.

The exemplar store keeps up to ``budget`` raw inputs per class, chosen by the
greedy herding rule on normalized features.  The feature-mean memory keeps one
unnormalized mean of intermediate features per class; entries are written once
at the close of the session that introduced the class and never change.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyClass, FrozenViolation, InvariantViolation
from .losses import normalize_rows


def herding_select(inputs, features, budget):
    """Greedy herding: repeatedly pick the sample whose inclusion keeps the
    running mean of normalized features closest to the class mean.

    Returns the selected inputs in pick order, at most ``budget`` of them.
    Ties go to the lowest sample index.  ``features`` are the current model
    features for ``inputs``, row for row.
    """
    inputs = np.asarray(inputs)
    feats = np.asarray(features, dtype=float)
    if inputs.shape[0] == 0:
        raise EmptyClass("cannot select exemplars from an empty class")
    if inputs.shape[0] != feats.shape[0]:
        raise InvariantViolation("inputs and features disagree on sample count")
    if int(budget) < 1:
        raise ValueError("budget must be >= 1")

    unit, _ = normalize_rows(feats)
    target = unit.mean(axis=0)
    n = unit.shape[0]
    chosen = []
    acc = np.zeros_like(target)
    remaining = np.arange(n)
    for j in range(1, min(int(budget), n) + 1):
        cand = (acc[None, :] + unit[remaining]) / j
        dist = np.linalg.norm(target[None, :] - cand, axis=1)
        pos = int(np.argmin(dist))  # argmin takes the first, so lowest index
        idx = int(remaining[pos])
        chosen.append(idx)
        acc += unit[idx]
        remaining = np.delete(remaining, pos)
    return inputs[np.asarray(chosen)]


class ExemplarStore:
    """Per-class exemplar sets with provenance, immutable once written."""

    def __init__(self, budget):
        self.budget = int(budget)
        self._data = {}
        self._session = {}

    def add_class(self, class_id, exemplars, session_id):
        cid = int(class_id)
        if cid in self._data:
            raise InvariantViolation(
                f"class {cid} already has exemplars; stores are write-once"
            )
        arr = np.asarray(exemplars)
        if arr.shape[0] > self.budget:
            raise InvariantViolation(
                f"{arr.shape[0]} exemplars exceed the per-class budget {self.budget}"
            )
        self._data[cid] = arr.copy()
        self._session[cid] = int(session_id)

    @property
    def class_ids(self):
        return sorted(self._data)

    def count(self, class_id):
        return self._data[int(class_id)].shape[0]

    def session_of(self, class_id):
        return self._session[int(class_id)]

    def exemplars(self, class_id):
        return self._data[int(class_id)]

    def __len__(self):
        return sum(arr.shape[0] for arr in self._data.values())

    @property
    def is_empty(self):
        return not self._data

    def combined(self):
        """All stored samples as (inputs, labels), classes in ascending order."""
        if self.is_empty:
            return None, None
        xs, ys = [], []
        for cid in self.class_ids:
            arr = self._data[cid]
            xs.append(arr)
            ys.append(np.full(arr.shape[0], cid, dtype=int))
        return np.concatenate(xs, axis=0), np.concatenate(ys)


class FeatureMeanMemory:
    """class id -> unnormalized mean of intermediate features, write once."""

    def __init__(self):
        self._means = {}

    def record(self, class_id, mean):
        cid = int(class_id)
        if cid in self._means:
            raise InvariantViolation(
                f"class {cid} already has a stored feature mean"
            )
        self._means[cid] = np.asarray(mean, dtype=float).copy()

    @property
    def class_ids(self):
        return sorted(self._means)

    def mean(self, class_id):
        return self._means[int(class_id)]

    def __len__(self):
        return len(self._means)

    def rows(self):
        """All stored means as (features, labels) in ascending class order."""
        if not self._means:
            return None, None
        ids = self.class_ids
        return np.stack([self._means[c] for c in ids]), np.asarray(ids, dtype=int)


def record_feature_means(backbone, x, y, memory, classes=None):
    """Store the mean intermediate feature of each class in ``classes``.

    The backbone must be frozen: the stored rows stand in for data the model
    will never see again, so they have to come from parameters that no longer
    move.  ``classes`` defaults to every class present in ``y``.
    """
    if not backbone.frozen:
        raise FrozenViolation("feature means must be computed by a frozen backbone")
    y = np.asarray(y)
    if classes is None:
        classes = np.unique(y).tolist()
    for cid in classes:
        mask = y == cid
        if not np.any(mask):
            raise EmptyClass(f"no samples for class {cid}")
        feats, _ = backbone.forward(np.asarray(x)[mask])
        memory.record(cid, feats.mean(axis=0))
    return memory
