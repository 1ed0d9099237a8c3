"""Per-class prototype schedules for one training session.

Classes that were already present sit on their terminus column for the whole
session.  Classes new in the session start from the unit mean direction of
their own features and glide to the terminus column as the epoch counter
advances: the weight on the terminus grows linearly from 0 at epoch 0 to 1 at
the final epoch, and the interpolated vector is renormalized before use.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DegenerateInterpolation,
    DegenerateMean,
    EmptyClass,
    UnknownClass,
)
from .losses import normalize_rows

_MEAN_EPS = 1e-9


def compute_ncm(features):
    """Unit-normalized mean of the row-normalized features (the class-mean
    direction used to seed a new class's prototype)."""
    arr = np.asarray(features, dtype=float)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise EmptyClass("need at least one feature row")
    unit, _ = normalize_rows(arr)
    mean = unit.mean(axis=0)
    norm = float(np.linalg.norm(mean))
    if norm <= _MEAN_EPS:
        raise DegenerateMean("normalized features cancel to a near-zero mean")
    return mean / norm


class PrototypeState:
    """Effective prototypes for the classes active in one session.

    epochs is the number of interpolation steps E; the epoch argument of
    ``effective`` may run from 0 (pure class-mean direction) to E (pure
    terminus column) inclusive.
    """

    def __init__(self, epochs):
        if int(epochs) < 1:
            raise ValueError("epochs must be >= 1")
        self.epochs = int(epochs)
        self._terminus_dir = {}
        self._mean_dir = {}
        self._novel = set()

    def add_fixed(self, class_id, w_terminus):
        self._terminus_dir[int(class_id)] = np.asarray(w_terminus, dtype=float)

    def add_novel(self, class_id, w_terminus, w_mean):
        cid = int(class_id)
        self._terminus_dir[cid] = np.asarray(w_terminus, dtype=float)
        self._mean_dir[cid] = np.asarray(w_mean, dtype=float)
        self._novel.add(cid)

    @property
    def class_ids(self):
        return sorted(self._terminus_dir)

    def is_novel(self, class_id):
        return int(class_id) in self._novel

    def effective(self, class_id, epoch):
        """Unit prototype for one class at the given epoch."""
        cid = int(class_id)
        if cid not in self._terminus_dir:
            raise UnknownClass(f"class {cid} is not part of this session")
        if not 0 <= epoch <= self.epochs:
            raise ValueError(f"epoch {epoch} outside [0, {self.epochs}]")
        target = self._terminus_dir[cid]
        if cid not in self._novel:
            return target
        eta = epoch / self.epochs
        blend = eta * target + (1.0 - eta) * self._mean_dir[cid]
        norm = float(np.linalg.norm(blend))
        if norm <= _MEAN_EPS:
            raise DegenerateInterpolation(
                f"interpolated prototype for class {cid} collapsed at eta={eta}"
            )
        return blend / norm

    def rows(self, class_ids, epoch):
        """Effective prototypes for the given ids stacked as rows."""
        return np.stack([self.effective(cid, epoch) for cid in class_ids])


def make_prototype_state(terminus, old_classes, novel_means, epochs):
    """Assemble the session state: old classes pinned to their terminus
    column, novel classes flying from their mean direction.  novel_means maps
    class id to the unit mean direction; pass an empty dict to pin everything."""
    state = PrototypeState(epochs)
    for cid in old_classes:
        state.add_fixed(cid, terminus.prototype(cid))
    for cid, mean_dir in novel_means.items():
        state.add_novel(cid, terminus.prototype(cid), mean_dir)
    return state
