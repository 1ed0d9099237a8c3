"""Constrained-feature optimization witness.

Drops the networks entirely: one free feature vector per sample is optimized
against the fixed frame under a unit-ball constraint, by projected gradient
descent.  At the global optimum every feature sits exactly on its class
prototype (unit norm, cosine 1 with its own column, -1/(K-1) with every
other), so the converged residuals measure how closely a run approached that
point.  Sessions partition the samples but the objective is separable, so
they are solved one after another and grouping cannot change the result.

Both losses act on the raw ball-constrained vector m (no normalization):
alignment is (w_y . m - 1)^2 / 2 and cross entropy uses the plain inner
products w_j . m as logits over the whole label space.  The update uses
per-sample gradients, not the mean over the block, so the dynamics of one
sample do not depend on how many neighbors share its session.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

LOSS_ALIGN = "align"
LOSS_CE = "ce"

_MAX_HALVINGS = 60


@dataclass(frozen=True)
class OracleProblem:
    terminus: object
    counts: tuple  # samples per class; class ids 0..len(counts)-1
    session_sizes: tuple = None  # classes per session; defaults to one session
    loss: str = LOSS_ALIGN
    seed: int = 0

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        object.__setattr__(self, "counts", counts)
        if min(counts) < 1:
            raise ConfigError("every class needs at least one sample")
        k = len(counts)
        if k > self.terminus.k_total:
            raise ConfigError(
                f"{k} classes exceed the terminus width {self.terminus.k_total}"
            )
        sizes = self.session_sizes
        sizes = (k,) if sizes is None else tuple(int(s) for s in sizes)
        if sum(sizes) != k or min(sizes) < 1:
            raise ConfigError(f"session sizes {sizes} do not partition {k} classes")
        object.__setattr__(self, "session_sizes", sizes)
        if self.loss not in (LOSS_ALIGN, LOSS_CE):
            raise ConfigError(f"unknown oracle loss {self.loss!r}")

    @property
    def k_classes(self):
        return len(self.counts)

    @property
    def n_samples(self):
        return sum(self.counts)

    def labels(self):
        return np.repeat(np.arange(self.k_classes), self.counts)

    def session_of_class(self):
        """Session index for each class, following session_sizes in order."""
        out = np.empty(self.k_classes, dtype=int)
        start = 0
        for t, size in enumerate(self.session_sizes):
            out[start:start + size] = t
            start += size
        return out


@dataclass
class OracleResult:
    features: np.ndarray
    labels: np.ndarray
    iterations: int
    converged: bool
    final_objective: float
    final_step: float
    per_session: list = field(default_factory=list)


def initial_features(problem):
    """Seeded start: uniform in the ball of radius 0.1."""
    rng = np.random.default_rng(problem.seed)
    n = problem.n_samples
    d = problem.terminus.d
    dirs = rng.standard_normal((n, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = 0.1 * rng.random(n) ** (1.0 / d)
    return dirs * radii[:, None]


def _project_ball(m):
    norms = np.linalg.norm(m, axis=1)
    over = norms > 1.0
    if np.any(over):
        m[over] /= norms[over, None]
    return m


def _align_objective_grads(m, w_rows):
    cos = np.sum(m * w_rows, axis=1)
    values = 0.5 * (cos - 1.0) ** 2
    grads = (cos - 1.0)[:, None] * w_rows
    return values, grads


def _ce_objective_grads(m, w_all, labels):
    logits = m @ w_all  # (n, K) raw inner products over the whole label space
    shifted = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    idx = np.arange(m.shape[0])
    values = (logz[:, 0] - shifted[idx, labels])
    p = np.exp(shifted - logz)
    p[idx, labels] -= 1.0
    grads = p @ w_all.T
    return values, grads


def solve(problem, step=0.5, max_iter=20000, tol=1e-6):
    """Projected gradient descent to the ball-constrained optimum.

    Sessions are solved in order and independently.  The step is halved
    whenever a candidate update would raise the block objective, keeping the
    loss curve non-increasing; iteration stops when the largest per-feature
    update falls under ``tol`` or the cap is reached.
    """
    if step <= 0:
        raise ConfigError("step size must be positive")
    labels = problem.labels()
    m_all = initial_features(problem)
    w_all = problem.terminus.w[:, : problem.k_classes]
    session_of = problem.session_of_class()[labels]

    def block_eval(m, labs):
        if problem.loss == LOSS_ALIGN:
            return _align_objective_grads(m, w_all.T[labs])
        return _ce_objective_grads(m, w_all, labs)

    per_session = []
    all_converged = True
    total_iters = 0
    for t in range(len(problem.session_sizes)):
        rows = np.flatnonzero(session_of == t)
        m = m_all[rows].copy()
        labs = labels[rows]
        cur_step = float(step)
        values, grads = block_eval(m, labs)
        objective = float(values.mean())
        converged = False
        it = 0
        while it < max_iter:
            it += 1
            halvings = 0
            while True:
                cand = _project_ball(m - cur_step * grads)
                cand_values, cand_grads = block_eval(cand, labs)
                cand_objective = float(cand_values.mean())
                if cand_objective <= objective + 1e-15:
                    break
                cur_step *= 0.5
                halvings += 1
                if halvings >= _MAX_HALVINGS:
                    break
            update = float(np.max(np.linalg.norm(cand - m, axis=1)))
            m = cand
            values, grads = cand_values, cand_grads
            objective = cand_objective
            if update < tol:
                converged = True
                break
        m_all[rows] = m
        all_converged = all_converged and converged
        total_iters += it
        per_session.append(
            {
                "session": t,
                "iterations": it,
                "converged": bool(converged),
                "objective": objective,
                "step": cur_step,
            }
        )

    final_values, _ = block_eval(m_all, labels)
    return OracleResult(
        features=m_all,
        labels=labels,
        iterations=total_iters,
        converged=bool(all_converged),
        final_objective=float(final_values.mean()),
        final_step=float(min(s["step"] for s in per_session)),
        per_session=per_session,
    )


def check_nc_terminus(features, labels, terminus, tol=1e-2):
    """Residuals of the collapse prediction on a converged feature matrix.

    residual_norm: worst |  ||m|| - 1 |.
    residual_align: worst | m . w_y - 1 |.
    residual_cross: worst | m . w_k' - target | over k' != y, where the
    target is the frame's off-diagonal cosine (-1/(K-1) for the simplex).
    """
    m = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=int)
    inner = m @ terminus.w
    idx = np.arange(m.shape[0])
    residual_align = float(np.max(np.abs(inner[idx, labels] - 1.0)))
    mask = np.ones_like(inner, dtype=bool)
    mask[idx, labels] = False
    residual_cross = float(np.max(np.abs(inner[mask] - terminus.target_cosine)))
    residual_norm = float(np.max(np.abs(np.linalg.norm(m, axis=1) - 1.0)))
    ok = max(residual_norm, residual_align, residual_cross) <= tol
    return {
        "residual_norm": residual_norm,
        "residual_align": residual_align,
        "residual_cross": residual_cross,
        "pass": bool(ok),
    }
