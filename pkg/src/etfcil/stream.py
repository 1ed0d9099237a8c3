"""Synthetic class streams: session planning and data materialization.

A plan lists which classes appear in which session, under which count
profile (normal, long-tail, or few-shot); materialization turns a plan into
arrays by sampling Gaussian blobs around fixed per-class mean directions.
Samples are indexed deterministically per class, train rows before test rows,
so the two splits never overlap and any (plan, task, split) triple rebuilds
the same bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, NotEnoughClasses

MODE_NORMAL = "normal"
MODE_LONGTAIL = "longtail"
MODE_FEWSHOT = "fewshot"
MODES = (MODE_NORMAL, MODE_LONGTAIL, MODE_FEWSHOT)

TRAIN = "train"
TEST = "test"

# rng stream tags so every consumer gets an independent substream
_MEANS_TAG = 101
_SAMPLES_TAG = 202
_SHUFFLE_TAG = 303
_GCIL_TAG = 404


@dataclass(frozen=True)
class SyntheticTaskSpec:
    """Gaussian blob task: class means are seeded unit directions scaled to
    ``radius``; samples are mean + sigma * standard normal noise."""

    input_dim: int = 16
    k_classes: int = 20
    radius: float = 4.0
    sigma: float = 1.0
    train_per_class: int = 100
    test_per_class: int = 50
    seed: int = 0

    @cached_property
    def class_means(self):
        rng = np.random.default_rng([self.seed, _MEANS_TAG])
        dirs = rng.standard_normal((self.k_classes, self.input_dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        means = self.radius * dirs
        means.setflags(write=False)
        return means


@dataclass(frozen=True)
class SessionDef:
    t: int
    classes: tuple
    mode: str
    counts: tuple  # train count per class, aligned with ``classes``


@dataclass(frozen=True)
class SessionPlan:
    sessions: tuple
    seed: int = 0

    @property
    def n_sessions(self):
        return len(self.sessions)

    def all_classes(self):
        out = []
        for s in self.sessions:
            out.extend(s.classes)
        return out

    def classes_through(self, t):
        out = []
        for s in self.sessions[: t + 1]:
            out.extend(s.classes)
        return sorted(out)


@dataclass(frozen=True)
class SessionBatch:
    t: int
    mode: str
    classes: tuple
    counts: tuple
    x: np.ndarray
    y: np.ndarray


def longtail_counts(k, rho, n_max):
    """Exponentially decaying counts n_r = round(n_max * rho^(r/(k-1))) for
    ranks r = 0..k-1, clamped to at least one sample."""
    if not 0 < rho <= 1:
        raise ConfigError(f"rho must lie in (0, 1], got {rho}")
    if k < 1:
        raise ConfigError("need at least one class")
    if k == 1:
        return [max(1, int(round(n_max)))]
    counts = []
    for rank in range(k):
        n = round(n_max * rho ** (rank / (k - 1)))
        counts.append(max(1, int(n)))
    return counts


def _check_budget(k0, steps, per_step, available):
    need = k0 + steps * per_step
    if available is not None and need > available:
        raise NotEnoughClasses(
            f"plan needs {need} classes but only {available} are available"
        )
    return need


def plan_cil(k0, steps, per_step, n_per_class=100, available=None):
    """Base session of k0 classes, then ``steps`` sessions of ``per_step``
    new classes each, all with full counts."""
    if k0 < 1 or steps < 0 or per_step < 1:
        raise ConfigError("bad plan shape")
    _check_budget(k0, steps, per_step, available)
    sessions = [SessionDef(0, tuple(range(k0)), MODE_NORMAL, (n_per_class,) * k0)]
    nxt = k0
    for t in range(1, steps + 1):
        cls = tuple(range(nxt, nxt + per_step))
        sessions.append(SessionDef(t, cls, MODE_NORMAL, (n_per_class,) * per_step))
        nxt += per_step
    return SessionPlan(tuple(sessions), seed=0)


def plan_ltcil(k0, steps, per_step, rho, n_max, lt_mode="ordered", seed=0,
               available=None):
    """Same class schedule as plan_cil but with long-tailed counts over the
    whole label space.  ``ordered`` ranks classes by id; ``shuffled`` applies
    a seeded permutation to the ranks before assigning counts."""
    if lt_mode not in ("ordered", "shuffled"):
        raise ConfigError(f"unknown long-tail mode {lt_mode!r}")
    k = _check_budget(k0, steps, per_step, available)
    decayed = longtail_counts(k, rho, n_max)
    if lt_mode == "shuffled":
        rng = np.random.default_rng([seed, _SHUFFLE_TAG])
        ranks = rng.permutation(k)
    else:
        ranks = np.arange(k)
    count_of = {cid: decayed[ranks[cid]] for cid in range(k)}
    base = plan_cil(k0, steps, per_step, n_per_class=0)
    sessions = []
    for s in base.sessions:
        counts = tuple(count_of[c] for c in s.classes)
        sessions.append(SessionDef(s.t, s.classes, MODE_LONGTAIL, counts))
    return SessionPlan(tuple(sessions), seed=int(seed))


def plan_fscil(k0, steps, per_step, shots, n_per_class=100, available=None):
    """Base session with full counts, then ``steps`` sessions of
    ``per_step``-way ``shots``-shot data."""
    if shots < 1:
        raise ConfigError("shots must be >= 1")
    if shots > n_per_class:
        raise ConfigError(
            f"{shots} shots exceed the {n_per_class} training samples per class"
        )
    _check_budget(k0, steps, per_step, available)
    sessions = [SessionDef(0, tuple(range(k0)), MODE_NORMAL, (n_per_class,) * k0)]
    nxt = k0
    for t in range(1, steps + 1):
        cls = tuple(range(nxt, nxt + per_step))
        sessions.append(SessionDef(t, cls, MODE_FEWSHOT, (shots,) * per_step))
        nxt += per_step
    return SessionPlan(tuple(sessions), seed=0)


def plan_gcil(k0, steps, per_step, shots, rho, seed, n_per_class=100,
              available=None):
    """Mixed stream: a normal base session, then each incremental session
    draws its count profile uniformly from the three modes and its classes
    from the still-unseen pool, both with the given seed."""
    if shots > n_per_class:
        raise ConfigError(
            f"{shots} shots exceed the {n_per_class} training samples per class"
        )
    pool_size = available if available is not None else k0 + steps * per_step
    _check_budget(k0, steps, per_step, pool_size)
    rng = np.random.default_rng([seed, _GCIL_TAG])
    sessions = [SessionDef(0, tuple(range(k0)), MODE_NORMAL, (n_per_class,) * k0)]
    unseen = list(range(k0, pool_size))
    for t in range(1, steps + 1):
        mode = MODES[int(rng.integers(0, 3))]
        picked = rng.choice(len(unseen), size=per_step, replace=False)
        cls = tuple(sorted(unseen[i] for i in picked))
        for c in cls:
            unseen.remove(c)
        if mode == MODE_NORMAL:
            counts = (n_per_class,) * per_step
        elif mode == MODE_FEWSHOT:
            counts = (shots,) * per_step
        else:
            # decay over this session's classes; global rank is meaningless
            # for a randomly drawn subset
            counts = tuple(longtail_counts(per_step, rho, n_per_class))
        sessions.append(SessionDef(t, cls, mode, counts))
    return SessionPlan(tuple(sessions), seed=int(seed))


def _class_block(task, class_id):
    """All samples ever drawn for one class: train rows first, then test."""
    rng = np.random.default_rng([task.seed, _SAMPLES_TAG, int(class_id)])
    total = task.train_per_class + task.test_per_class
    noise = rng.standard_normal((total, task.input_dim))
    return task.class_means[int(class_id)] + task.sigma * noise


def materialize(plan, task, split):
    """Turn a plan into per-session arrays for one split.

    Train sessions honor the planned counts; test sessions are always full
    size and balanced no matter what the mode was.
    """
    if split not in (TRAIN, TEST):
        raise ConfigError(f"unknown split {split!r}")
    for s in plan.sessions:
        for cid, cnt in zip(s.classes, s.counts):
            if not 0 <= cid < task.k_classes:
                raise NotEnoughClasses(
                    f"plan class {cid} outside the task's {task.k_classes} classes"
                )
            if cnt > task.train_per_class:
                raise ConfigError(
                    f"count {cnt} for class {cid} exceeds the per-class "
                    f"training ceiling {task.train_per_class}"
                )
    batches = []
    for s in plan.sessions:
        xs, ys, counts = [], [], []
        for cid, n_train in zip(s.classes, s.counts):
            block = _class_block(task, cid)
            if split == TRAIN:
                rows = block[:n_train]
            else:
                rows = block[task.train_per_class:]
            xs.append(rows)
            ys.append(np.full(rows.shape[0], cid, dtype=int))
            counts.append(rows.shape[0])
        batches.append(
            SessionBatch(
                t=s.t,
                mode=s.mode,
                classes=tuple(s.classes),
                counts=tuple(counts),
                x=np.concatenate(xs, axis=0),
                y=np.concatenate(ys),
            )
        )
    return batches


def plan_to_dict(plan):
    return {
        "sessions": [
            {
                "t": s.t,
                "classes": list(s.classes),
                "mode": s.mode,
                "counts": list(s.counts),
            }
            for s in plan.sessions
        ],
        "seed": plan.seed,
    }


def plan_from_dict(payload):
    try:
        sessions = tuple(
            SessionDef(
                t=int(s["t"]),
                classes=tuple(int(c) for c in s["classes"]),
                mode=str(s["mode"]),
                counts=tuple(int(c) for c in s["counts"]),
            )
            for s in payload["sessions"]
        )
        return SessionPlan(sessions, seed=int(payload.get("seed", 0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed plan payload: {exc}") from exc


def plan_to_json(plan):
    return json.dumps(plan_to_dict(plan), indent=2, sort_keys=True)
