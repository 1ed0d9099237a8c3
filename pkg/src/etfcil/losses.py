"""Alignment, distillation, and cross-entropy losses with exact gradients.

Every loss here consumes a raw (unnormalized) feature vector mu and folds the
Jacobian of l2 normalization into its gradient, so backbone code can backprop
without caring which loss produced the signal.  With mu_hat = mu / ||mu|| and
c = w . mu_hat for a unit prototype w, the alignment value is (c - 1)^2 / 2
and

    d value / d mu = (c - 1) (w - c mu_hat) / ||mu||.

The batched helpers vectorize the same formulas row-wise; they are what the
training loops call, and a test pins them to the per-sample versions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LabelInactive, ZeroFeature

FEATURE_EPS = 1e-12


@dataclass
class LossValueAndGrad:
    value: float
    grad_wrt_feature: np.ndarray


def normalize_rows(x):
    """Row-normalize, returning (unit rows, norms).  Raises ZeroFeature when
    any row norm is at or below the degeneracy threshold."""
    x = np.asarray(x, dtype=float)
    norms = np.linalg.norm(x, axis=1)
    bad = np.flatnonzero(norms <= FEATURE_EPS)
    if bad.size:
        raise ZeroFeature(f"feature row {int(bad[0])} has near-zero norm")
    return x / norms[:, None], norms


def _unit(vec):
    vec = np.asarray(vec, dtype=float)
    n = float(np.linalg.norm(vec))
    if n <= FEATURE_EPS:
        raise ZeroFeature("feature has near-zero norm")
    return vec / n, n


def misalignment_batch(features, prototypes):
    """Vectorized alignment loss.

    features: (n, d) raw features; prototypes: (n, d) unit target rows (one
    per sample).  Returns (values (n,), grads (n, d)) with grads taken with
    respect to the raw features.
    """
    unit, norms = normalize_rows(features)
    prototypes = np.asarray(prototypes, dtype=float)
    cos = np.sum(unit * prototypes, axis=1)
    values = 0.5 * (cos - 1.0) ** 2
    grads = (cos - 1.0)[:, None] * (prototypes - cos[:, None] * unit)
    grads /= norms[:, None]
    return values, grads


def misalignment_loss(feature, prototype):
    """(w . mu_hat - 1)^2 / 2 for a single sample."""
    prototype = np.asarray(prototype, dtype=float)
    values, grads = misalignment_batch(
        np.asarray(feature, dtype=float)[None, :], prototype[None, :]
    )
    return LossValueAndGrad(float(values[0]), grads[0])


def distillation_batch(features_now, features_prev):
    """Alignment of current features against the normalized features a frozen
    teacher produced for the same inputs.  The teacher side is constant, so
    this is the alignment loss with the teacher direction as the target."""
    unit_prev, _ = normalize_rows(features_prev)
    return misalignment_batch(features_now, unit_prev)


def distillation_loss(feature_now, feature_prev):
    values, grads = distillation_batch(
        np.asarray(feature_now, dtype=float)[None, :],
        np.asarray(feature_prev, dtype=float)[None, :],
    )
    return LossValueAndGrad(float(values[0]), grads[0])


def cosine_embedding_batch(features_now, features_prev):
    """1 - cos(feature, teacher feature): the distillation form the learnable
    comparison baseline inherits.  Linear in the misalignment angle near the
    teacher, so it restrains drift far more weakly than the squared form."""
    unit_prev, _ = normalize_rows(features_prev)
    unit, norms = normalize_rows(features_now)
    cos = np.sum(unit * unit_prev, axis=1)
    values = 1.0 - cos
    grads = -(unit_prev - cos[:, None] * unit) / norms[:, None]
    return values, grads


def combined_loss(align, distill, lambda_eff):
    """align + lambda_eff * distill, both LossValueAndGrad on the same feature."""
    lam = float(lambda_eff)
    if lam < 0:
        raise ValueError("lambda_eff must be nonnegative")
    return LossValueAndGrad(
        align.value + lam * distill.value,
        align.grad_wrt_feature + lam * distill.grad_wrt_feature,
    )


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def cross_entropy_fixed_batch(features, prototype_rows, label_pos, scale=1.0):
    """Cross entropy on cosine logits against a fixed prototype block.

    prototype_rows: (k, d) unit rows for the active classes; label_pos: (n,)
    positions into those rows; logits are scale * mu_hat . w_j.  Gradients are
    with respect to the raw features, normalization Jacobian included.
    """
    unit, norms = normalize_rows(features)
    rows = np.asarray(prototype_rows, dtype=float)
    scale = float(scale)
    logits = scale * (unit @ rows.T)
    logp = _log_softmax(logits)
    n = unit.shape[0]
    idx = np.arange(n)
    values = -logp[idx, label_pos]
    p = np.exp(logp)
    p[idx, label_pos] -= 1.0
    d_unit = scale * (p @ rows)
    radial = np.sum(unit * d_unit, axis=1)
    grads = (d_unit - radial[:, None] * unit) / norms[:, None]
    return values, grads


def cross_entropy_fixed(feature, terminus, active_classes, label, scale=1.0):
    """Single-sample fixed-prototype cross entropy over the active classes."""
    active = list(active_classes)
    if label not in active:
        raise LabelInactive(f"label {label} is not among the active classes")
    rows = terminus.prototype_rows(active)
    pos = active.index(label)
    values, grads = cross_entropy_fixed_batch(
        np.asarray(feature, dtype=float)[None, :],
        rows,
        np.array([pos]),
        scale=scale,
    )
    return LossValueAndGrad(float(values[0]), grads[0])


def learnable_ce_batch(features, prototype_rows, label_pos):
    """Cross entropy on raw dot products against a trainable prototype block.

    Unlike the fixed variant the prototype rows are free parameters, so this
    also returns their gradient.  Logits are mu_hat . w_j with no scale; the
    rows keep whatever modulus training gives them.
    """
    unit, norms = normalize_rows(features)
    rows = np.asarray(prototype_rows, dtype=float)
    logits = unit @ rows.T
    logp = _log_softmax(logits)
    n = unit.shape[0]
    idx = np.arange(n)
    values = -logp[idx, label_pos]
    p = np.exp(logp)
    p[idx, label_pos] -= 1.0
    d_unit = p @ rows
    radial = np.sum(unit * d_unit, axis=1)
    grad_features = (d_unit - radial[:, None] * unit) / norms[:, None]
    grad_rows = p.T @ unit
    return values, grad_features, grad_rows
