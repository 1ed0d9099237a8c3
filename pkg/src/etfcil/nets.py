"""Small dense networks with explicit forward and backward passes.

Hidden layers use a rectifier, the output layer is linear.  ``forward``
returns the output batch together with a cache of activations; the cache must
be handed back to ``backward`` unchanged and goes stale as soon as a parameter
step or restore bumps the network version.  Training uses plain SGD with
momentum and decoupled-from-biases weight decay.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ShapeMismatch, StaleCache


class MlpCache:
    __slots__ = ("version", "acts", "pre")

    def __init__(self, version, acts, pre):
        self.version = version
        self.acts = acts
        self.pre = pre


class MlpNet:
    """Fully connected net: dims like [16, 64, 64, 32]."""

    def __init__(self, dims, seed=0, frozen=False):
        dims = [int(v) for v in dims]
        if len(dims) < 2 or min(dims) < 1:
            raise ShapeMismatch(f"bad layer dims {dims}")
        self.dims = dims
        self.frozen = bool(frozen)
        self._version = 0
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    @property
    def input_dim(self):
        return self.dims[0]

    @property
    def output_dim(self):
        return self.dims[-1]

    @property
    def n_layers(self):
        return len(self.weights)

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ShapeMismatch(
                f"input shape {x.shape} does not feed a net with input dim "
                f"{self.input_dim}"
            )
        acts = [x]
        pre = []
        a = x
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            pre.append(z)
            a = np.maximum(z, 0.0) if i < last else z
            acts.append(a)
        return a, MlpCache(self._version, acts, pre)

    def backward(self, cache, grad_out):
        """Backprop a gradient on the output batch.

        Returns (param_grads, grad_wrt_input) where param_grads is a list of
        (dW, db) per layer summed over the batch.  Gradients flow through
        frozen nets too; freezing only disables the parameter step.
        """
        if cache.version != self._version:
            raise StaleCache("activation cache predates the current parameters")
        g = np.asarray(grad_out, dtype=float)
        if g.shape != cache.acts[-1].shape:
            raise ShapeMismatch(
                f"output gradient shape {g.shape} != {cache.acts[-1].shape}"
            )
        grads = [None] * self.n_layers
        last = self.n_layers - 1
        for i in range(last, -1, -1):
            dz = g if i == last else g * (cache.pre[i] > 0)
            grads[i] = (cache.acts[i].T @ dz, dz.sum(axis=0))
            g = dz @ self.weights[i].T
        return grads, g

    def snapshot(self):
        """Read-only deep copy of the parameters."""
        params = []
        for w, b in zip(self.weights, self.biases):
            wc, bc = w.copy(), b.copy()
            wc.setflags(write=False)
            bc.setflags(write=False)
            params.append((wc, bc))
        return tuple(params)

    def restore(self, snap):
        if len(snap) != self.n_layers:
            raise ShapeMismatch("snapshot layer count mismatch")
        for i, (w, b) in enumerate(snap):
            if w.shape != self.weights[i].shape or b.shape != self.biases[i].shape:
                raise ShapeMismatch("snapshot parameter shape mismatch")
            self.weights[i] = w.copy()
            self.biases[i] = b.copy()
        self._version += 1

    def clone(self, frozen=None):
        other = MlpNet(self.dims, seed=0, frozen=self.frozen if frozen is None else frozen)
        other.restore(self.snapshot())
        return other

    def params_bytes(self):
        """Concatenated raw parameter bytes, handy for bitwise comparisons."""
        return b"".join(
            arr.tobytes() for pair in zip(self.weights, self.biases) for arr in pair
        )


class SgdMomentum:
    """SGD with momentum and weight decay applied to weights only.

    lr may be reassigned between steps (the schedules do).  Velocity buffers
    appear on the first step and persist for the optimizer's lifetime.
    """

    def __init__(self, lr, momentum=0.9, weight_decay=5e-4):
        self.lr = float(lr)
        self.momentum = float(momentum)
        self.weight_decay = float(weight_decay)
        self._vel = None

    def step(self, net, grads):
        if net.frozen:
            return
        if self._vel is None:
            self._vel = [
                (np.zeros_like(w), np.zeros_like(b))
                for w, b in zip(net.weights, net.biases)
            ]
        for i, (dw, db) in enumerate(grads):
            vw, vb = self._vel[i]
            vw *= self.momentum
            vw += dw + self.weight_decay * net.weights[i]
            vb *= self.momentum
            vb += db
            net.weights[i] -= self.lr * vw
            net.biases[i] -= self.lr * vb
        net._version += 1


def backward_and_step(net, cache, grad_out, opt):
    """Convenience wrapper: backprop then apply one optimizer step."""
    grads, grad_in = net.backward(cache, grad_out)
    opt.step(net, grads)
    return grad_in


def cosine_lr(epoch, total_epochs, lr0, min_ratio=0.01):
    """Cosine-annealed learning rate from lr0 down to min_ratio * lr0."""
    lr_min = min_ratio * lr0
    if total_epochs <= 0:
        return lr0
    frac = min(max(epoch / total_epochs, 0.0), 1.0)
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + math.cos(math.pi * frac))
