"""Session training loops for the four stream regimes.

The class-incremental regimes (cil, ltcil) train a single backbone whose
output is the classification feature.  The few-shot and mixed regimes (fscil,
gcil) split the model into a backbone f and a projection g; f is frozen after
the base session in fscil, while gcil picks per session which half to
finetune based on how much data arrived.  All regimes classify by cosine
against fixed frame columns, except the ``learnable`` arm which trains a free
prototype matrix with cross entropy and exists purely as a comparison
baseline.

A session configured with E epochs performs E + 1 passes, one per value of
the interpolation weight {0, 1/E, ..., 1}, so a flying prototype starts
exactly at the class-mean direction and ends exactly on its terminus column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import (
    SEED_BACKBONE,
    SEED_BATCHES,
    SEED_PROJECTION,
    SEED_PROTOTYPES,
    SEED_TERMINUS,
    build_plan,
    build_task,
    derive_seed,
)
from .errors import (
    FrozenViolation,
    InvariantViolation,
    MissingTeacher,
)
from .losses import (
    cosine_embedding_batch,
    cross_entropy_fixed_batch,
    distillation_batch,
    learnable_ce_batch,
    misalignment_batch,
    normalize_rows,
)
from .memory import (
    ExemplarStore,
    FeatureMeanMemory,
    herding_select,
    record_feature_means,
)
from .metrics import nc_cross_cos, nc_self_cos, top1_accuracy, trace_ratio
from .nets import MlpNet, SgdMomentum, backward_and_step, cosine_lr
from .prototypes import compute_ncm, make_prototype_state
from .report import RunReport, SessionMetrics
from .stream import TEST, TRAIN, materialize
from .terminus import build_terminus


@dataclass
class TrainerConfig:
    regime: str = "cil"
    classifier: str = "flight"  # flight | fixed | ncm | learnable
    loss: str = "align"  # align | ce (fixed-prototype CE ablation)
    epochs: int = 25
    base_lr: float = 0.008
    inc_lr: float = 0.5
    lambda_base: float = 5.0
    adaptive_lambda: bool = True
    exemplar_budget: int = 20
    ce_scale: float = 16.0
    frame_kind: str = "etf"
    fewshot_threshold: int = 5
    batch_size: int = 128
    momentum: float = 0.9
    weight_decay: float = 5e-4
    min_lr_ratio: float = 0.01
    hidden_dims: tuple = (64, 64)
    projection_hidden: int = 64
    feature_dim: int = 32
    input_dim: int = 16
    seed: int = 0
    deterministic: bool = True

    @classmethod
    def from_experiment(cls, exp):
        names = [f for f in cls.__dataclass_fields__]
        return cls(**{n: getattr(exp, n) for n in names})


def lambda_effective(cfg, t, n_old_classes, n_new_classes):
    """Distillation weight: scaled by sqrt(old/new class counts) when the
    adaptive switch is on, zero in the base session."""
    if t == 0 or cfg.lambda_base == 0:
        return 0.0
    if cfg.adaptive_lambda:
        return cfg.lambda_base * math.sqrt(n_old_classes / n_new_classes)
    return cfg.lambda_base


def _stratified_batches(rng, n_a, n_b, batch_size):
    """Index batches over two pools (fresh data, rehearsal data).

    Both pools are shuffled and split across the same number of batches, so
    every batch mixes the two whenever both are nonempty; tiny pools are
    cycled rather than left out.
    """
    total = n_a + n_b
    if total == 0:
        return
    n_batches = max(1, math.ceil(total / batch_size))
    order_a = rng.permutation(n_a)
    order_b = rng.permutation(n_b)
    chunks_a = np.array_split(order_a, n_batches)
    chunks_b = np.array_split(order_b, n_batches)
    for i in range(n_batches):
        ca, cb = chunks_a[i], chunks_b[i]
        if n_a and ca.size == 0:
            ca = order_a[[i % n_a]]
        if n_b and cb.size == 0:
            cb = order_b[[i % n_b]]
        yield ca, cb


class _ProtoOpt:
    """Momentum buffer for the learnable prototype matrix."""

    def __init__(self, prototypes, momentum):
        self.vel = np.zeros_like(prototypes)
        self.momentum = momentum

    def step(self, prototypes, ids, grad_rows, lr):
        self.vel[ids] = self.momentum * self.vel[ids] + grad_rows
        prototypes[ids] -= lr * self.vel[ids]


class ModelState:
    """Everything that persists across sessions for one run."""

    def __init__(self, cfg, terminus):
        self.cfg = cfg
        self.terminus = terminus
        self.split_model = cfg.regime in ("fscil", "gcil")
        if self.split_model:
            self.backbone = MlpNet(
                [cfg.input_dim, *cfg.hidden_dims],
                seed=derive_seed(cfg.seed, SEED_BACKBONE),
            )
            self.projection = MlpNet(
                [cfg.hidden_dims[-1], cfg.projection_hidden, cfg.feature_dim],
                seed=derive_seed(cfg.seed, SEED_PROJECTION),
            )
        else:
            self.backbone = MlpNet(
                [cfg.input_dim, *cfg.hidden_dims, cfg.feature_dim],
                seed=derive_seed(cfg.seed, SEED_BACKBONE),
            )
            self.projection = None
        rng = np.random.default_rng(derive_seed(cfg.seed, SEED_PROTOTYPES))
        bound = 1.0 / math.sqrt(cfg.feature_dim)
        self.prototypes = rng.uniform(
            -bound, bound, size=(terminus.k_total, cfg.feature_dim)
        )
        self.exemplars = ExemplarStore(cfg.exemplar_budget)
        self.feature_means = FeatureMeanMemory()
        self.teacher = None
        self.seen = []
        self.inference_dirs = {}

    # --- feature paths ---------------------------------------------------
    def features_cached(self, x):
        h, cache_f = self.backbone.forward(x)
        if self.projection is None:
            return h, (cache_f, None)
        mu, cache_g = self.projection.forward(h)
        return mu, (cache_f, cache_g)

    def features(self, x):
        return self.features_cached(x)[0]

    def intermediate(self, x):
        return self.backbone.forward(x)[0]

    def backward_step(self, caches, grad_mu, opt_f, opt_g):
        cache_f, cache_g = caches
        if self.projection is None:
            backward_and_step(self.backbone, cache_f, grad_mu, opt_f)
            return
        grads_g, grad_h = self.projection.backward(cache_g, grad_mu)
        opt_g.step(self.projection, grads_g)
        grads_f, _ = self.backbone.backward(cache_f, grad_h)
        opt_f.step(self.backbone, grads_f)

    def teacher_features(self, x):
        if self.teacher is None:
            raise MissingTeacher("no teacher snapshot available")
        h = self.teacher["backbone"].forward(x)[0]
        proj = self.teacher.get("projection")
        return h if proj is None else proj.forward(h)[0]

    def refresh_teacher(self):
        snap = {"backbone": self.backbone.clone(frozen=True)}
        if self.projection is not None:
            snap["projection"] = self.projection.clone(frozen=True)
        self.teacher = snap

    # --- classification --------------------------------------------------
    def prototype_matrix(self):
        """Per-class inference directions, indexed by class id on axis 0."""
        if self.cfg.classifier == "learnable":
            return self.prototypes
        rows = self.terminus.w.T.copy()
        for cid, direction in self.inference_dirs.items():
            rows[cid] = direction
        return rows

    def predict(self, x):
        ids = np.asarray(sorted(self.seen), dtype=int)
        rows = self.prototype_matrix()[ids]
        rows = rows / np.linalg.norm(rows, axis=1, keepdims=True)
        unit, _ = normalize_rows(self.features(x))
        cos = unit @ rows.T
        return ids[np.argmax(cos, axis=1)]


# --------------------------------------------------------------------------
# shared loops


def _classification_grads(state, mu, pos, active_ids, proto_rows):
    """Loss values, feature gradients, and (learnable arm only) gradients for
    the active prototype rows."""
    cfg = state.cfg
    if cfg.classifier == "learnable":
        values, gmu, grows = learnable_ce_batch(
            mu, state.prototypes[active_ids], pos
        )
        return values, gmu, grows
    if cfg.loss == "ce":
        values, gmu = cross_entropy_fixed_batch(mu, proto_rows, pos, cfg.ce_scale)
    else:
        values, gmu = misalignment_batch(mu, proto_rows[pos])
    return values, gmu, None


def _train_cil_like(state, batch, t, lr0):
    """Backbone finetuning with flying prototypes, distillation after the
    base session, and exemplar rehearsal.  Serves cil/ltcil (no projection)
    and the data-rich gcil branch (projection present but frozen)."""
    cfg = state.cfg
    if t > 0 and state.teacher is None:
        raise MissingTeacher(f"session {t} needs the session {t - 1} snapshot")
    E = cfg.epochs
    new_ids = sorted(batch.classes)
    old_ids = sorted(state.seen)
    active = sorted(old_ids + new_ids)
    pos_of = {cid: i for i, cid in enumerate(active)}

    novel_means = {}
    if cfg.classifier in ("flight", "ncm") and t > 0:
        for cid in new_ids:
            feats = state.features(batch.x[batch.y == cid])
            novel_means[cid] = compute_ncm(feats)
    fixed_ids = [c for c in active if c not in novel_means]
    proto = make_prototype_state(state.terminus, fixed_ids, novel_means, E)

    ex_x, ex_y = state.exemplars.combined()
    n_new = batch.x.shape[0]
    n_ex = 0 if ex_x is None else ex_x.shape[0]
    lam = lambda_effective(cfg, t, len(old_ids), len(new_ids))

    opt_f = SgdMomentum(lr0, cfg.momentum, cfg.weight_decay)
    opt_g = SgdMomentum(lr0, cfg.momentum, cfg.weight_decay)
    proto_opt = _ProtoOpt(state.prototypes, cfg.momentum)
    rng = np.random.default_rng([cfg.seed, SEED_BATCHES, t])

    curve = []
    for e in range(E + 1):
        lr = cosine_lr(e, E, lr0, cfg.min_lr_ratio)
        opt_f.lr = opt_g.lr = lr
        if t == 0 or cfg.classifier in ("fixed", "learnable"):
            e_query = E
        elif cfg.classifier == "ncm":
            e_query = 0
        else:
            e_query = e
        proto_rows = None
        if cfg.classifier != "learnable":
            proto_rows = proto.rows(active, e_query)
        loss_sum, n_seen = 0.0, 0
        for idx_new, idx_ex in _stratified_batches(rng, n_new, n_ex, cfg.batch_size):
            if idx_ex.size:
                xb = np.concatenate([batch.x[idx_new], ex_x[idx_ex]])
                yb = np.concatenate([batch.y[idx_new], ex_y[idx_ex]])
            else:
                xb, yb = batch.x[idx_new], batch.y[idx_new]
            mu, caches = state.features_cached(xb)
            pos = np.fromiter((pos_of[int(c)] for c in yb), dtype=int, count=len(yb))
            values, gmu, grows = _classification_grads(
                state, mu, pos, active, proto_rows
            )
            if lam > 0:
                mu_prev = state.teacher_features(xb)
                if cfg.classifier == "learnable":
                    _, dgrads = cosine_embedding_batch(mu, mu_prev)
                else:
                    _, dgrads = distillation_batch(mu, mu_prev)
                gmu = gmu + lam * dgrads
            gmu = gmu / xb.shape[0]
            state.backward_step(caches, gmu, opt_f, opt_g)
            if grows is not None:
                proto_opt.step(state.prototypes, active, grows / xb.shape[0], lr)
            loss_sum += float(values.sum())
            n_seen += xb.shape[0]
        curve.append(loss_sum / n_seen)
    return proto, curve


def _train_joint_base(state, batch):
    """Base session for the split model: f and g train together against the
    terminus columns (no flight, no rehearsal)."""
    cfg = state.cfg
    E = cfg.epochs
    active = sorted(batch.classes)
    pos_of = {cid: i for i, cid in enumerate(active)}
    proto_rows = state.terminus.prototype_rows(active)
    opt_f = SgdMomentum(cfg.base_lr, cfg.momentum, cfg.weight_decay)
    opt_g = SgdMomentum(cfg.base_lr, cfg.momentum, cfg.weight_decay)
    proto_opt = _ProtoOpt(state.prototypes, cfg.momentum)
    rng = np.random.default_rng([cfg.seed, SEED_BATCHES, 0])
    curve = []
    for e in range(E + 1):
        lr = cosine_lr(e, E, cfg.base_lr, cfg.min_lr_ratio)
        opt_f.lr = opt_g.lr = lr
        loss_sum, n_seen = 0.0, 0
        for idx, _ in _stratified_batches(rng, batch.x.shape[0], 0, cfg.batch_size):
            xb, yb = batch.x[idx], batch.y[idx]
            mu, caches = state.features_cached(xb)
            pos = np.fromiter((pos_of[int(c)] for c in yb), dtype=int, count=len(yb))
            values, gmu, grows = _classification_grads(
                state, mu, pos, active, proto_rows
            )
            gmu = gmu / xb.shape[0]
            state.backward_step(caches, gmu, opt_f, opt_g)
            if grows is not None:
                proto_opt.step(state.prototypes, active, grows / xb.shape[0], lr)
            loss_sum += float(values.sum())
            n_seen += xb.shape[0]
        curve.append(loss_sum / n_seen)
    return curve


def _train_projection_only(state, batch, t):
    """Incremental session on a frozen backbone: finetune g on the fresh
    session data plus the stored per-class feature means, every sample
    weighted equally."""
    cfg = state.cfg
    if not state.backbone.frozen:
        raise FrozenViolation("projection finetuning expects a frozen backbone")
    fingerprint = state.backbone.params_bytes()
    E = cfg.epochs
    new_ids = sorted(batch.classes)
    active = sorted(state.seen + new_ids)
    pos_of = {cid: i for i, cid in enumerate(active)}
    proto_rows = state.terminus.prototype_rows(active)

    h_fresh = state.backbone.forward(batch.x)[0]
    h_mem, y_mem = state.feature_means.rows()
    n_fresh = h_fresh.shape[0]
    n_mem = 0 if h_mem is None else h_mem.shape[0]

    opt_g = SgdMomentum(cfg.inc_lr, cfg.momentum, cfg.weight_decay)
    proto_opt = _ProtoOpt(state.prototypes, cfg.momentum)
    rng = np.random.default_rng([cfg.seed, SEED_BATCHES, t])
    curve = []
    for e in range(E + 1):
        opt_g.lr = cosine_lr(e, E, cfg.inc_lr, cfg.min_lr_ratio)
        loss_sum, n_seen = 0.0, 0
        for idx_f, idx_m in _stratified_batches(rng, n_fresh, n_mem, cfg.batch_size):
            if idx_m.size and idx_f.size:
                hb = np.concatenate([h_fresh[idx_f], h_mem[idx_m]])
                yb = np.concatenate([batch.y[idx_f], y_mem[idx_m]])
            elif idx_m.size:
                hb, yb = h_mem[idx_m], y_mem[idx_m]
            else:
                hb, yb = h_fresh[idx_f], batch.y[idx_f]
            mu, cache_g = state.projection.forward(hb)
            pos = np.fromiter((pos_of[int(c)] for c in yb), dtype=int, count=len(yb))
            values, gmu, grows = _classification_grads(
                state, mu, pos, active, proto_rows
            )
            gmu = gmu / hb.shape[0]
            backward_and_step(state.projection, cache_g, gmu, opt_g)
            if grows is not None:
                proto_opt.step(state.prototypes, active, grows / hb.shape[0],
                               opt_g.lr)
            loss_sum += float(values.sum())
            n_seen += hb.shape[0]
        curve.append(loss_sum / n_seen)
    if state.backbone.params_bytes() != fingerprint:
        raise FrozenViolation("backbone parameters moved during a frozen session")
    return curve


# --------------------------------------------------------------------------
# session closing helpers


def _select_exemplars(state, batch, t):
    if state.cfg.exemplar_budget < 1:
        return
    for cid in sorted(batch.classes):
        mask = batch.y == cid
        feats = state.features(batch.x[mask])
        chosen = herding_select(batch.x[mask], feats, state.cfg.exemplar_budget)
        state.exemplars.add_class(cid, chosen, t)


def _record_session_means(state, batch):
    classes = [c for c in sorted(batch.classes) if np.any(batch.y == c)]
    if classes:
        record_feature_means(
            state.backbone, batch.x, batch.y, state.feature_means, classes
        )


def _store_inference_dirs(state, proto, epoch_query):
    for cid in proto.class_ids:
        state.inference_dirs[cid] = proto.effective(cid, epoch_query)


def train_session(state, batch, t):
    """Run one session end to end and update every piece of carried state.
    Returns the per-epoch mean classification loss curve."""
    cfg = state.cfg
    new_ids = sorted(batch.classes)

    if cfg.regime in ("cil", "ltcil"):
        lr0 = cfg.base_lr if t == 0 else cfg.inc_lr
        proto, curve = _train_cil_like(state, batch, t, lr0)
        state.seen = sorted(state.seen + new_ids)
        _select_exemplars(state, batch, t)
        close_query = 0 if (cfg.classifier == "ncm" and t > 0) else cfg.epochs
        _store_inference_dirs(state, proto, close_query)
        state.refresh_teacher()
        return curve

    if cfg.regime == "fscil":
        if t == 0:
            curve = _train_joint_base(state, batch)
            state.backbone.frozen = True
            state.seen = sorted(new_ids)
            _record_session_means(state, batch)
        else:
            curve = _train_projection_only(state, batch, t)
            state.seen = sorted(state.seen + new_ids)
            _record_session_means(state, batch)
        return curve

    # gcil
    if t == 0:
        curve = _train_joint_base(state, batch)
        state.seen = sorted(new_ids)
    else:
        data_rich = min(batch.counts) > cfg.fewshot_threshold
        if data_rich:
            state.backbone.frozen = False
            state.projection.frozen = True
            proto, curve = _train_cil_like(state, batch, t, cfg.inc_lr)
            close_query = 0 if cfg.classifier == "ncm" else cfg.epochs
            _store_inference_dirs(state, proto, close_query)
        else:
            state.backbone.frozen = True
            state.projection.frozen = False
            curve = _train_projection_only(state, batch, t)
        state.seen = sorted(state.seen + new_ids)
    state.backbone.frozen = True
    state.projection.frozen = True
    _record_session_means(state, batch)
    _select_exemplars(state, batch, t)
    state.refresh_teacher()
    return curve


# --------------------------------------------------------------------------
# evaluation and orchestration


def _scope_stats(features, labels, prototypes, scope):
    return {
        "cross": nc_cross_cos(features, labels, prototypes, scope),
        "self": nc_self_cos(features, labels, prototypes, scope),
        "trace": trace_ratio(features, labels, scope),
    }


def _split_diagnostics(state, batches, current, union, base):
    x = np.concatenate([b.x for b in batches])
    y = np.concatenate([b.y for b in batches])
    unit, _ = normalize_rows(state.features(x))
    rows = state.prototype_matrix()
    return {
        "each": _scope_stats(unit, y, rows, current),
        "acc": _scope_stats(unit, y, rows, union),
        "base": _scope_stats(unit, y, rows, base),
    }


def _check_session_invariants(sm):
    values = [sm.acc_train, sm.acc_test]
    for split in ("train", "test"):
        for scope in ("each", "acc", "base"):
            stats = sm.diag[split][scope]
            if not -1.0 - 1e-9 <= stats["cross"] <= 1.0 + 1e-9:
                raise InvariantViolation(f"cross cosine {stats['cross']} out of range")
            if not -1.0 - 1e-9 <= stats["self"] <= 1.0 + 1e-9:
                raise InvariantViolation(f"self cosine {stats['self']} out of range")
            if stats["trace"] < 0:
                raise InvariantViolation("negative trace ratio")
    for v in values:
        if not 0.0 <= v <= 1.0:
            raise InvariantViolation(f"accuracy {v} out of [0, 1]")


def evaluate_session(state, train_batches, test_batches, t, align_curve):
    """Accuracy over the unified label space plus collapse diagnostics on the
    three scopes, for both splits."""
    batch = train_batches[t]
    union = sorted(state.seen)
    base = sorted(train_batches[0].classes)
    current = sorted(batch.classes)

    xs = np.concatenate([b.x for b in train_batches[: t + 1]])
    ys = np.concatenate([b.y for b in train_batches[: t + 1]])
    preds = state.predict(xs)
    if not set(np.unique(preds)).issubset(set(union)):
        raise InvariantViolation("prediction escaped the seen label space")
    acc_train = top1_accuracy(preds, ys)

    xs_t = np.concatenate([b.x for b in test_batches[: t + 1]])
    ys_t = np.concatenate([b.y for b in test_batches[: t + 1]])
    acc_test = top1_accuracy(state.predict(xs_t), ys_t)

    sm = SessionMetrics(
        t=t,
        mode=batch.mode,
        classes=tuple(current),
        acc_train=acc_train,
        acc_test=acc_test,
        diag={
            "train": _split_diagnostics(
                state, train_batches[: t + 1], current, union, base
            ),
            "test": _split_diagnostics(
                state, test_batches[: t + 1], current, union, base
            ),
        },
        final_align_loss=align_curve[-1],
        align_curve=list(align_curve),
    )
    _check_session_invariants(sm)
    return sm


def run_experiment(exp_cfg):
    """Train through the whole configured stream and report per-session
    accuracy and diagnostics."""
    exp_cfg.validate()
    cfg = TrainerConfig.from_experiment(exp_cfg)
    plan = build_plan(exp_cfg)
    task = build_task(exp_cfg)
    terminus = build_terminus(
        exp_cfg.feature_dim,
        exp_cfg.k_total,
        exp_cfg.frame_kind,
        seed=derive_seed(exp_cfg.seed, SEED_TERMINUS),
    )
    train_batches = materialize(plan, task, TRAIN)
    test_batches = materialize(plan, task, TEST)
    state = ModelState(cfg, terminus)

    sessions = []
    for t, batch in enumerate(train_batches):
        curve = train_session(state, batch, t)
        sessions.append(
            evaluate_session(state, train_batches, test_batches, t, curve)
        )

    xs_t = np.concatenate([b.x for b in test_batches])
    ys_t = np.concatenate([b.y for b in test_batches])
    unit, _ = normalize_rows(state.features(xs_t))
    return RunReport(
        sessions=sessions,
        final_test_features=unit,
        final_test_labels=ys_t,
    )
