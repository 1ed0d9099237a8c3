"""Geometry and serialization of the fixed prototype frames."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from etfcil.errors import ConfigError, DimensionTooSmall, IndexOutOfRange
from etfcil.terminus import (
    ORTHOGONAL,
    SIMPLEX,
    build_terminus,
    read_terminus,
    verify_geometry,
    write_terminus,
)


class TestSimplexGeometry:
    def test_unit_columns(self):
        t = build_terminus(12, 7, SIMPLEX, seed=3)
        assert_allclose(np.linalg.norm(t.w, axis=0), 1.0, atol=1e-12)

    def test_pairwise_cosine(self):
        k = 9
        t = build_terminus(16, k, SIMPLEX, seed=0)
        gram = t.gram()
        off = gram[~np.eye(k, dtype=bool)]
        assert_allclose(off, -1.0 / (k - 1), atol=1e-10)

    def test_columns_sum_to_zero(self):
        t = build_terminus(10, 6, SIMPLEX, seed=11)
        assert_allclose(t.w.sum(axis=1), 0.0, atol=1e-12)

    def test_target_cosine(self):
        assert build_terminus(8, 5).target_cosine == pytest.approx(-0.25)
        assert build_terminus(8, 5, ORTHOGONAL).target_cosine == 0.0

    def test_square_case(self):
        # d == K leaves no slack dimensions; the construction must still work
        rep = verify_geometry(build_terminus(6, 6, SIMPLEX, seed=2))
        assert rep["pass"]


class TestOrthogonalFrame:
    def test_gram_is_identity(self):
        t = build_terminus(14, 9, ORTHOGONAL, seed=4)
        assert_allclose(t.gram(), np.eye(9), atol=1e-10)

    def test_verify_ignores_column_sum(self):
        rep = verify_geometry(build_terminus(14, 9, ORTHOGONAL, seed=4))
        assert rep["pass"]
        assert rep["colsum_norm"] > 1.0  # far from zero, and that is fine


def test_deterministic_rebuild():
    a = build_terminus(20, 12, SIMPLEX, seed=77)
    b = build_terminus(20, 12, SIMPLEX, seed=77)
    assert_array_equal(a.w, b.w)
    c = build_terminus(20, 12, SIMPLEX, seed=78)
    assert not np.array_equal(a.w, c.w)


def test_matrix_is_immutable():
    t = build_terminus(8, 4)
    with pytest.raises(ValueError):
        t.w[0, 0] = 5.0


def test_prototype_lookup():
    t = build_terminus(8, 4, seed=1)
    assert_array_equal(t.prototype(2), t.w[:, 2])
    rows = t.prototype_rows([3, 0])
    assert_array_equal(rows[0], t.w[:, 3])
    assert_array_equal(rows[1], t.w[:, 0])
    with pytest.raises(IndexOutOfRange):
        t.prototype(4)
    with pytest.raises(IndexOutOfRange):
        t.prototype_rows([0, -1])


def test_bad_shapes_rejected():
    with pytest.raises(DimensionTooSmall):
        build_terminus(3, 5)
    with pytest.raises(ConfigError):
        build_terminus(5, 1)
    with pytest.raises(ConfigError):
        build_terminus(5, 3, kind="hexagon")


def test_verify_flags_corruption():
    t = build_terminus(8, 5, seed=0)
    w = t.w.copy()
    w[:, 0] *= 1.5
    broken = type(t)(d=8, k_total=5, kind=SIMPLEX, seed=0, w=w)
    rep = verify_geometry(broken)
    assert not rep["pass"]
    assert rep["max_norm_dev"] > 0.4


def test_write_read_round_trip(tmp_path):
    t = build_terminus(12, 8, SIMPLEX, seed=5)
    path = tmp_path / "frame.txt"
    write_terminus(t, str(path))
    back = read_terminus(str(path))
    assert back.d == 12 and back.k_total == 8
    assert back.kind == SIMPLEX and back.seed == 5
    assert_array_equal(back.w, t.w)


def test_read_rejects_garbage(tmp_path):
    path = tmp_path / "frame.txt"
    path.write_text("not a frame\n")
    with pytest.raises(ConfigError):
        read_terminus(str(path))
