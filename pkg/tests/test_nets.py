import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from etfcil.errors import ShapeMismatch, StaleCache
from etfcil.nets import MlpNet, SgdMomentum, backward_and_step, cosine_lr


def loss_and_param_grads(net, x, target):
    """Half squared error against a fixed target batch, as a probe loss."""
    out, cache = net.forward(x)
    diff = out - target
    grads, grad_in = net.backward(cache, diff)
    return 0.5 * float(np.sum(diff**2)), grads, grad_in


def test_forward_shapes_and_relu():
    net = MlpNet([4, 7, 3], seed=0)
    x = np.random.default_rng(0).standard_normal((5, 4))
    out, cache = net.forward(x)
    assert out.shape == (5, 3)
    assert len(cache.acts) == 3
    # hidden activations are rectified, the output is not
    assert np.min(cache.acts[1]) >= 0.0
    hidden_pre = cache.pre[0]
    assert np.min(hidden_pre) < 0.0  # something actually got clipped


def test_rejects_bad_input():
    net = MlpNet([4, 7, 3])
    with pytest.raises(ShapeMismatch):
        net.forward(np.zeros((5, 6)))
    with pytest.raises(ShapeMismatch):
        MlpNet([4])


def test_parameter_gradients_fd():
    rng = np.random.default_rng(1)
    net = MlpNet([5, 8, 4], seed=2)
    x = rng.standard_normal((6, 5))
    target = rng.standard_normal((6, 4))
    _, grads, _ = loss_and_param_grads(net, x, target)
    h = 1e-6
    for layer in range(net.n_layers):
        for arr, g in ((net.weights[layer], grads[layer][0]),
                       (net.biases[layer], grads[layer][1])):
            flat = arr.ravel()
            for idx in rng.choice(flat.size, size=4, replace=False):
                orig = flat[idx]
                flat[idx] = orig + h
                up, _, _ = loss_and_param_grads(net, x, target)
                flat[idx] = orig - h
                dn, _, _ = loss_and_param_grads(net, x, target)
                flat[idx] = orig
                fd = (up - dn) / (2 * h)
                assert g.ravel()[idx] == pytest.approx(fd, rel=1e-5, abs=1e-8)


def test_input_gradient_fd():
    rng = np.random.default_rng(2)
    net = MlpNet([4, 6, 2], seed=3)
    x = rng.standard_normal((3, 4))
    target = rng.standard_normal((3, 2))
    _, _, grad_in = loss_and_param_grads(net, x, target)
    h = 1e-6
    for i in range(x.size):
        orig = x.flat[i]
        x.flat[i] = orig + h
        up, _, _ = loss_and_param_grads(net, x, target)
        x.flat[i] = orig - h
        dn, _, _ = loss_and_param_grads(net, x, target)
        x.flat[i] = orig
        assert grad_in.flat[i] == pytest.approx((up - dn) / (2 * h), rel=1e-5, abs=1e-8)


def test_cache_goes_stale_after_step():
    rng = np.random.default_rng(3)
    net = MlpNet([3, 5, 2], seed=0)
    x = rng.standard_normal((4, 3))
    out, cache = net.forward(x)
    opt = SgdMomentum(0.1)
    grads, _ = net.backward(cache, np.ones_like(out))
    opt.step(net, grads)
    with pytest.raises(StaleCache):
        net.backward(cache, np.ones_like(out))


def test_frozen_net_does_not_move():
    rng = np.random.default_rng(4)
    net = MlpNet([3, 5, 2], seed=0, frozen=True)
    before = net.params_bytes()
    x = rng.standard_normal((4, 3))
    out, cache = net.forward(x)
    backward_and_step(net, cache, np.ones_like(out), SgdMomentum(0.5))
    assert net.params_bytes() == before
    # gradients still flow through a frozen net
    _, grad_in = net.backward(net.forward(x)[1], np.ones_like(out))
    assert np.any(grad_in != 0.0)


def test_snapshot_restore_round_trip():
    rng = np.random.default_rng(5)
    net = MlpNet([3, 4, 2], seed=1)
    snap = net.snapshot()
    x = rng.standard_normal((6, 3))
    out, cache = net.forward(x)
    backward_and_step(net, cache, out, SgdMomentum(0.2))
    assert net.params_bytes() != b"".join(
        arr.tobytes() for pair in snap for arr in pair
    )
    net.restore(snap)
    for (w, b), ws, bs in zip(snap, net.weights, net.biases):
        assert_array_equal(w, ws)
        assert_array_equal(b, bs)


def test_clone_is_independent():
    net = MlpNet([3, 4, 2], seed=1)
    twin = net.clone(frozen=True)
    assert twin.params_bytes() == net.params_bytes()
    assert twin.frozen
    net.weights[0][0, 0] += 1.0
    assert twin.params_bytes() != net.params_bytes()


def test_sgd_momentum_two_steps_by_hand():
    """One weight, no decay: velocity accumulates exactly as v <- m v + g."""
    net = MlpNet([1, 1], seed=0)
    net.weights[0][:] = 0.0
    net.biases[0][:] = 0.0
    opt = SgdMomentum(lr=0.1, momentum=0.5, weight_decay=0.0)
    g1 = [(np.array([[2.0]]), np.array([0.0]))]
    g2 = [(np.array([[1.0]]), np.array([0.0]))]
    opt.step(net, g1)  # v=2, w=-0.2
    assert net.weights[0][0, 0] == pytest.approx(-0.2)
    opt.step(net, g2)  # v=0.5*2+1=2, w=-0.4
    assert net.weights[0][0, 0] == pytest.approx(-0.4)


def test_weight_decay_skips_biases():
    net = MlpNet([2, 2], seed=0)
    w0 = net.weights[0].copy()
    b0 = net.biases[0].copy()
    zero = [(np.zeros((2, 2)), np.zeros(2))]
    opt = SgdMomentum(lr=1.0, momentum=0.0, weight_decay=0.1)
    opt.step(net, zero)
    assert_allclose(net.weights[0], w0 * 0.9)
    assert_array_equal(net.biases[0], b0)


def test_cosine_lr_endpoints():
    assert cosine_lr(0, 10, 0.5, min_ratio=0.01) == pytest.approx(0.5)
    assert cosine_lr(10, 10, 0.5, min_ratio=0.01) == pytest.approx(0.005)
    mid = cosine_lr(5, 10, 0.5, min_ratio=0.01)
    assert 0.005 < mid < 0.5
    assert cosine_lr(5, 10, 0.5, 0.01) == pytest.approx(0.5 * (1 + 0.01) / 2)
