"""Collapse diagnostics against brute-force references."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from etfcil.errors import (
    DegenerateBetweenClass,
    EmptyClass,
    EmptyList,
    TooFewClasses,
)
from etfcil.metrics import (
    average_incremental_accuracy,
    nc_cross_cos,
    nc_self_cos,
    read_feature_dump,
    top1_accuracy,
    trace_ratio,
    write_feature_dump,
)
from etfcil.terminus import build_terminus


def brute_force_diag(features, labels, prototypes, scope):
    """Reference implementation written with explicit python loops."""
    scope = sorted(scope)
    rows = [features[i] for i in range(len(labels)) if labels[i] in scope]
    labs = [labels[i] for i in range(len(labels)) if labels[i] in scope]
    global_mean = np.mean(rows, axis=0)
    means = {c: np.mean([r for r, l in zip(rows, labs) if l == c], axis=0)
             for c in scope}
    cross, selfs, pairs = 0.0, 0.0, 0
    for c in scope:
        mc = means[c] - global_mean
        mc = mc / np.linalg.norm(mc)
        for c2 in scope:
            p = prototypes[c2] / np.linalg.norm(prototypes[c2])
            if c2 == c:
                selfs += float(mc @ p)
            else:
                cross += float(mc @ p)
                pairs += 1
    within = 0.0
    for c in scope:
        sel = np.stack([r for r, l in zip(rows, labs) if l == c])
        within += float(np.mean(np.sum((sel - means[c]) ** 2, axis=1)))
    within /= len(scope)
    between = float(np.mean([np.sum((means[c] - global_mean) ** 2) for c in scope]))
    return cross / pairs, selfs / len(scope), within / between


def random_fixture(rng):
    k = int(rng.integers(3, 7))
    d = int(rng.integers(k, k + 6))
    n = int(rng.integers(4, 9))
    features = rng.standard_normal((k * n, d)) + rng.standard_normal(d)
    labels = np.repeat(np.arange(k), n)
    prototypes = rng.standard_normal((k, d))
    return features, labels, prototypes, list(range(k))


def test_matches_brute_force_on_random_fixtures():
    rng = np.random.default_rng(0)
    for _ in range(20):
        f, l, p, scope = random_fixture(rng)
        ref_cross, ref_self, ref_trace = brute_force_diag(f, l, p, scope)
        assert abs(nc_cross_cos(f, l, p, scope) - ref_cross) <= 1e-12
        assert abs(nc_self_cos(f, l, p, scope) - ref_self) <= 1e-12
        assert abs(trace_ratio(f, l, scope) - ref_trace) <= 1e-12


def test_perfect_collapse_fixture():
    """Features sitting exactly on the simplex vertices: self cosine 1, cross
    cosine at the frame's pairwise value, no within-class scatter."""
    k = 5
    t = build_terminus(8, k, seed=0)
    reps = 4
    features = np.repeat(t.w.T, reps, axis=0)
    labels = np.repeat(np.arange(k), reps)
    prototypes = t.w.T
    assert nc_self_cos(features, labels, prototypes) == pytest.approx(1.0, abs=1e-9)
    assert nc_cross_cos(features, labels, prototypes) == pytest.approx(
        -1.0 / (k - 1), abs=1e-9
    )
    assert trace_ratio(features, labels) == pytest.approx(0.0, abs=1e-9)


def test_trace_ratio_translation_invariant():
    rng = np.random.default_rng(1)
    f, l, _, scope = random_fixture(rng)
    shifted = f + 100.0
    assert trace_ratio(f, l, scope) == pytest.approx(
        trace_ratio(shifted, l, scope), rel=1e-9
    )


def test_scope_restricts_the_computation():
    rng = np.random.default_rng(2)
    f, l, p, scope = random_fixture(rng)
    sub = scope[:3]
    mask = np.isin(l, sub)
    direct = nc_cross_cos(f[mask], l[mask], p, sub)
    assert nc_cross_cos(f, l, p, sub) == pytest.approx(direct, rel=1e-12)


def test_diagnostics_error_paths():
    f = np.zeros((4, 3)) + np.arange(3)
    with pytest.raises(EmptyClass):
        nc_self_cos(f, np.array([0, 0, 1, 1]), np.eye(3), scope=[0, 2])
    with pytest.raises(TooFewClasses):
        nc_cross_cos(f, np.zeros(4, dtype=int), np.eye(3), scope=[0])
    same = np.tile(np.arange(3.0), (4, 1))  # both class means coincide
    with pytest.raises(DegenerateBetweenClass):
        trace_ratio(same, np.array([0, 0, 1, 1]))


def test_accuracy_helpers():
    assert top1_accuracy(np.array([1, 2, 3]), np.array([1, 0, 3])) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        top1_accuracy(np.zeros(3), np.zeros(4))
    assert average_incremental_accuracy([0.5, 0.7, 0.9]) == pytest.approx(0.7)
    with pytest.raises(EmptyList):
        average_incremental_accuracy([])


def test_feature_dump_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    features = rng.standard_normal((7, 4))
    labels = rng.integers(0, 3, size=7)
    path = str(tmp_path / "dump.txt")
    write_feature_dump(path, features, labels)
    back_f, back_l = read_feature_dump(path)
    assert_array_equal(back_f, features)
    assert_array_equal(back_l, labels)
