"""Accuracy and collapse diagnostics.

The three diagnostics quantify how tightly features sit on the prototype
frame: the mean cosine between each centered class mean and the other
classes' prototypes (cross), the mean cosine between each centered class mean
and its own prototype (self), and the ratio of within-class to between-class
scatter traces.  All of them work on whatever feature array the caller hands
over; the training loops pass l2-normalized features to match the cosine
geometry, but nothing here renormalizes, so translation and rotation
identities hold as stated.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DegenerateBetweenClass,
    EmptyClass,
    EmptyList,
    TooFewClasses,
)

_TRACE_EPS = 1e-12


def average_incremental_accuracy(per_session_acc):
    """Plain mean of the per-session accuracies A_t."""
    accs = list(per_session_acc)
    if not accs:
        raise EmptyList("no session accuracies to average")
    return float(np.mean(accs))


def top1_accuracy(predicted, labels):
    predicted = np.asarray(predicted)
    labels = np.asarray(labels)
    if predicted.shape != labels.shape:
        raise ValueError("prediction and label shapes differ")
    return float(np.mean(predicted == labels))


def _scoped(features, labels, scope):
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    if scope is None:
        scope = np.unique(labels).tolist()
    scope = sorted(int(c) for c in scope)
    mask = np.isin(labels, scope)
    feats = features[mask]
    labs = labels[mask]
    means = []
    for cid in scope:
        sel = feats[labs == cid]
        if sel.shape[0] == 0:
            raise EmptyClass(f"no features for class {cid} in scope")
        means.append(sel.mean(axis=0))
    return feats, labs, scope, np.stack(means)


def _unit(rows):
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def nc_cross_cos(features, labels, prototypes, scope=None):
    """Mean cosine between centered class means and the prototypes of the
    other classes, over ordered pairs k != k'.

    ``prototypes`` is indexed by class id on its first axis (rows).  The
    global mean is taken over all individual features in the scope.
    """
    feats, _, scope, means = _scoped(features, labels, scope)
    if len(scope) < 2:
        raise TooFewClasses("cross cosine needs at least two classes")
    centered = _unit(means - feats.mean(axis=0))
    rows = _unit(np.asarray(prototypes, dtype=float)[scope])
    cos = centered @ rows.T
    off = ~np.eye(len(scope), dtype=bool)
    return float(cos[off].mean())


def nc_self_cos(features, labels, prototypes, scope=None):
    """Mean cosine between each centered class mean and its own prototype."""
    feats, _, scope, means = _scoped(features, labels, scope)
    if len(scope) < 2:
        raise TooFewClasses("self cosine needs at least two classes")
    centered = _unit(means - feats.mean(axis=0))
    rows = _unit(np.asarray(prototypes, dtype=float)[scope])
    return float(np.sum(centered * rows, axis=1).mean())


def trace_ratio(features, labels, scope=None):
    """tr(within-class scatter) / tr(between-class scatter).

    Within: average over classes of the average squared deviation from the
    class mean.  Between: average squared deviation of class means from the
    global mean of all scoped features.
    """
    feats, labs, scope, means = _scoped(features, labels, scope)
    global_mean = feats.mean(axis=0)
    within = 0.0
    for i, cid in enumerate(scope):
        sel = feats[labs == cid]
        within += float(np.mean(np.sum((sel - means[i]) ** 2, axis=1)))
    within /= len(scope)
    between = float(np.mean(np.sum((means - global_mean) ** 2, axis=1)))
    if between <= _TRACE_EPS:
        raise DegenerateBetweenClass(
            "between-class scatter is degenerate; class means coincide"
        )
    return within / between


def write_feature_dump(path, features, labels):
    """Text dump: header ``n d`` then one ``label v1 .. vd`` line per row,
    values at 17 significant digits so they round-trip exactly."""
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n, d = features.shape
    lines = [f"{n} {d}"]
    for lab, row in zip(labels, features):
        lines.append(str(int(lab)) + " " + " ".join(f"{v:.17g}" for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_feature_dump(path):
    with open(path) as fh:
        header = fh.readline().split()
        n, d = int(header[0]), int(header[1])
        labels = np.empty(n, dtype=int)
        features = np.empty((n, d), dtype=float)
        for i in range(n):
            parts = fh.readline().split()
            labels[i] = int(parts[0])
            features[i] = [float(v) for v in parts[1:]]
    return features, labels
