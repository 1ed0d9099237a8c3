import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from etfcil.errors import DegenerateMean, EmptyClass, UnknownClass
from etfcil.prototypes import PrototypeState, compute_ncm, make_prototype_state
from etfcil.terminus import build_terminus


def test_ncm_is_unit_mean_of_unit_rows():
    rng = np.random.default_rng(0)
    feats = rng.standard_normal((20, 6)) + 2.0
    ncm = compute_ncm(feats)
    unit = feats / np.linalg.norm(feats, axis=1, keepdims=True)
    expected = unit.mean(axis=0)
    expected /= np.linalg.norm(expected)
    assert_allclose(ncm, expected)
    assert np.linalg.norm(ncm) == pytest.approx(1.0)


def test_ncm_ignores_feature_magnitudes():
    rng = np.random.default_rng(1)
    feats = rng.standard_normal((10, 4)) + 1.5
    scales = rng.uniform(0.1, 10.0, size=(10, 1))
    assert_allclose(compute_ncm(feats), compute_ncm(feats * scales))


def test_ncm_degenerate_inputs():
    with pytest.raises(EmptyClass):
        compute_ncm(np.empty((0, 3)))
    opposing = np.array([[1.0, 0.0], [-1.0, 0.0]])
    with pytest.raises(DegenerateMean):
        compute_ncm(opposing)


class TestFlightSchedule:
    def setup_method(self):
        self.t = build_terminus(8, 4, seed=0)
        self.mean = np.zeros(8)
        self.mean[0] = 1.0
        self.state = make_prototype_state(
            self.t, old_classes=[0, 1], novel_means={2: self.mean}, epochs=4
        )

    def test_old_classes_never_move(self):
        for e in range(5):
            assert_array_equal(self.state.effective(0, e), self.t.prototype(0))

    def test_novel_endpoints(self):
        assert_array_equal(self.state.effective(2, 0), self.mean)
        assert_allclose(self.state.effective(2, 4), self.t.prototype(2), atol=1e-15)

    def test_intermediate_is_normalized_blend(self):
        e = 1
        eta = e / 4
        blend = eta * self.t.prototype(2) + (1 - eta) * self.mean
        blend /= np.linalg.norm(blend)
        assert_allclose(self.state.effective(2, e), blend)
        assert np.linalg.norm(self.state.effective(2, e)) == pytest.approx(1.0)

    def test_monotone_approach_to_terminus(self):
        cosines = [
            float(self.t.prototype(2) @ self.state.effective(2, e))
            for e in range(5)
        ]
        assert all(b >= a - 1e-12 for a, b in zip(cosines, cosines[1:]))
        assert cosines[-1] == pytest.approx(1.0)

    def test_novel_flag_and_rows(self):
        assert self.state.is_novel(2) and not self.state.is_novel(0)
        rows = self.state.rows([0, 2], epoch=2)
        assert rows.shape == (2, 8)
        assert_array_equal(rows[0], self.state.effective(0, 2))

    def test_unknown_class(self):
        with pytest.raises(UnknownClass):
            self.state.effective(3, 0)

    def test_epoch_bounds(self):
        with pytest.raises(ValueError):
            self.state.effective(2, 5)
        with pytest.raises(ValueError):
            self.state.effective(2, -1)


def test_epochs_must_be_positive():
    with pytest.raises(ValueError):
        PrototypeState(0)
