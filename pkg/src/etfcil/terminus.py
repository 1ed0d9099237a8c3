"""Fixed unit-norm prototype frames.

``build_terminus`` draws a seeded random basis, orthonormalizes it, and turns
it into one of two frames: a simplex frame whose K unit columns meet pairwise
at cosine -1/(K-1) (the most negative angle K equiangular unit vectors can
share), or a plain orthonormal frame (pairwise cosine 0).  The matrix is
immutable once built; training code reads columns as class prototypes and
never updates them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DegenerateBasis,
    DimensionTooSmall,
    IndexOutOfRange,
)

SIMPLEX = "etf"
ORTHOGONAL = "orthogonal"
KINDS = (SIMPLEX, ORTHOGONAL)

_RANK_EPS = 1e-10
_BUILD_ATTEMPTS = 3


@dataclass(frozen=True)
class EtfTerminus:
    """A d x k matrix of unit prototype columns plus the recipe that built it."""

    d: int
    k_total: int
    kind: str
    seed: int
    w: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.w.setflags(write=False)

    def prototype(self, class_id):
        """Unit column for one class (read-only view)."""
        if not 0 <= int(class_id) < self.k_total:
            raise IndexOutOfRange(
                f"class id {class_id} outside [0, {self.k_total})"
            )
        return self.w[:, int(class_id)]

    def prototype_rows(self, class_ids):
        """Prototypes for the given ids stacked as rows, shape (n, d)."""
        ids = np.asarray(class_ids, dtype=int)
        if ids.size and (ids.min() < 0 or ids.max() >= self.k_total):
            raise IndexOutOfRange(
                f"class ids must lie in [0, {self.k_total})"
            )
        return self.w.T[ids]

    def gram(self):
        return self.w.T @ self.w

    @property
    def target_cosine(self):
        """Pairwise cosine the frame is supposed to realize off-diagonal."""
        if self.kind == SIMPLEX:
            return -1.0 / (self.k_total - 1)
        return 0.0


def build_terminus(d, k_total, kind=SIMPLEX, seed=0):
    """Build a frame of ``k_total`` unit prototypes in ``d`` dimensions.

    The same (d, k_total, kind, seed) always reproduces the same matrix bit
    for bit.  Requires d >= k_total so a full orthonormal basis exists.
    """
    d = int(d)
    k = int(k_total)
    if kind not in KINDS:
        raise ConfigError(f"unknown frame kind {kind!r}, expected one of {KINDS}")
    if k < 2:
        raise ConfigError(f"need at least 2 classes, got {k}")
    if d < k:
        raise DimensionTooSmall(
            f"feature dimension {d} is smaller than the class count {k}"
        )

    rng = np.random.default_rng(seed)
    for _ in range(_BUILD_ATTEMPTS):
        basis = rng.standard_normal((d, k))
        q, r = np.linalg.qr(basis)
        diag = np.diagonal(r)
        if np.min(np.abs(diag)) > _RANK_EPS:
            # fix QR signs so the factorization (hence the frame) is unique
            q = q * np.sign(diag)
            break
    else:
        raise DegenerateBasis(
            f"random basis stayed rank deficient after {_BUILD_ATTEMPTS} draws"
        )

    if kind == SIMPLEX:
        center = np.eye(k) - np.full((k, k), 1.0 / k)
        w = np.sqrt(k / (k - 1.0)) * (q @ center)
    else:
        w = q.copy()
    # columns are unit up to rounding; renormalize to pin the invariant
    w /= np.linalg.norm(w, axis=0, keepdims=True)
    return EtfTerminus(d=d, k_total=k, kind=kind, seed=int(seed), w=w)


def verify_geometry(terminus, tol=1e-8):
    """Measure how far a frame drifted from its ideal geometry.

    Returns a dict with the worst column-norm deviation, the worst
    off-diagonal Gram deviation from the kind's target cosine, and the norm
    of the column sum (which is zero for the simplex kind only).  ``pass``
    is true when every applicable deviation is within ``tol``.
    """
    w = terminus.w
    norms = np.linalg.norm(w, axis=0)
    max_norm_dev = float(np.max(np.abs(norms - 1.0)))
    gram = w.T @ w
    off_mask = ~np.eye(terminus.k_total, dtype=bool)
    max_offdiag_dev = float(
        np.max(np.abs(gram[off_mask] - terminus.target_cosine))
    )
    colsum_norm = float(np.linalg.norm(w.sum(axis=1)))
    ok = max_norm_dev <= tol and max_offdiag_dev <= tol
    if terminus.kind == SIMPLEX:
        ok = ok and colsum_norm <= tol
    return {
        "max_norm_dev": max_norm_dev,
        "max_offdiag_dev": max_offdiag_dev,
        "colsum_norm": colsum_norm,
        "pass": bool(ok),
    }


def write_terminus(terminus, path):
    """Write the frame as text: a header line ``d K kind seed`` and then one
    line per feature dimension with K values at 17 significant digits."""
    lines = [f"{terminus.d} {terminus.k_total} {terminus.kind} {terminus.seed}"]
    for row in terminus.w:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    text = "\n".join(lines) + "\n"
    with open(path, "w") as fh:
        fh.write(text)


def read_terminus(path):
    """Inverse of :func:`write_terminus`; values round-trip exactly."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4:
            raise ConfigError(f"bad frame header in {path}")
        d, k = int(header[0]), int(header[1])
        kind, seed = header[2], int(header[3])
        if kind not in KINDS:
            raise ConfigError(f"unknown frame kind {kind!r} in {path}")
        rows = []
        for line in fh:
            if line.strip():
                rows.append([float(v) for v in line.split()])
    w = np.asarray(rows, dtype=float)
    if w.shape != (d, k):
        raise ConfigError(
            f"frame body shape {w.shape} does not match header ({d}, {k})"
        )
    return EtfTerminus(d=d, k_total=k, kind=kind, seed=seed, w=w)
