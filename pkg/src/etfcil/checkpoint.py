"""Binary checkpoints for networks and rehearsal state.

Layout, all little endian: the magic ``ETFC`` plus a format version byte,
then a count of named sections.  Each section is a tagged payload; arrays are
stored as raw float64 bytes with explicit shapes, so a save/load round trip
reproduces every parameter bit for bit.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ConfigError
from .memory import ExemplarStore, FeatureMeanMemory
from .nets import MlpNet

_MAGIC = b"ETFC\x01"
_SEC_NET = 1
_SEC_EXEMPLARS = 2
_SEC_FEATURE_MEANS = 3


def _w_u32(fh, v):
    fh.write(struct.pack("<I", int(v)))


def _r_u32(fh):
    return struct.unpack("<I", fh.read(4))[0]


def _w_str(fh, s):
    raw = s.encode("utf-8")
    _w_u32(fh, len(raw))
    fh.write(raw)


def _r_str(fh):
    n = _r_u32(fh)
    return fh.read(n).decode("utf-8")


def _w_array(fh, arr):
    arr = np.ascontiguousarray(arr, dtype="<f8")
    _w_u32(fh, arr.ndim)
    for s in arr.shape:
        _w_u32(fh, s)
    fh.write(arr.tobytes())


def _r_array(fh):
    ndim = _r_u32(fh)
    shape = tuple(_r_u32(fh) for _ in range(ndim))
    count = int(np.prod(shape)) if shape else 1
    raw = fh.read(count * 8)
    return np.frombuffer(raw, dtype="<f8").reshape(shape).copy()


def save_checkpoint(path, nets=None, exemplars=None, feature_means=None):
    """Write named nets plus optional rehearsal state to ``path``.

    nets: dict name -> MlpNet.  The same file can carry any subset.
    """
    nets = nets or {}
    sections = len(nets) + (exemplars is not None) + (feature_means is not None)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        _w_u32(fh, sections)
        for name in sorted(nets):
            net = nets[name]
            fh.write(bytes([_SEC_NET]))
            _w_str(fh, name)
            _w_u32(fh, len(net.dims))
            for dim in net.dims:
                _w_u32(fh, dim)
            fh.write(bytes([1 if net.frozen else 0]))
            for w, b in zip(net.weights, net.biases):
                _w_array(fh, w)
                _w_array(fh, b)
        if exemplars is not None:
            fh.write(bytes([_SEC_EXEMPLARS]))
            _w_u32(fh, exemplars.budget)
            _w_u32(fh, len(exemplars.class_ids))
            for cid in exemplars.class_ids:
                _w_u32(fh, cid)
                _w_u32(fh, exemplars.session_of(cid))
                _w_array(fh, exemplars.exemplars(cid))
        if feature_means is not None:
            fh.write(bytes([_SEC_FEATURE_MEANS]))
            _w_u32(fh, len(feature_means.class_ids))
            for cid in feature_means.class_ids:
                _w_u32(fh, cid)
                _w_array(fh, feature_means.mean(cid))


def load_checkpoint(path):
    """Read a checkpoint back into live objects.

    Returns a dict with keys ``nets`` (name -> MlpNet), ``exemplars``
    (ExemplarStore or None), and ``feature_means`` (FeatureMeanMemory or
    None).
    """
    out = {"nets": {}, "exemplars": None, "feature_means": None}
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ConfigError(f"{path} is not a recognized checkpoint file")
        sections = _r_u32(fh)
        for _ in range(sections):
            tag = fh.read(1)[0]
            if tag == _SEC_NET:
                name = _r_str(fh)
                n_dims = _r_u32(fh)
                dims = [_r_u32(fh) for _ in range(n_dims)]
                frozen = bool(fh.read(1)[0])
                net = MlpNet(dims, seed=0, frozen=frozen)
                for i in range(net.n_layers):
                    net.weights[i] = _r_array(fh)
                    net.biases[i] = _r_array(fh)
                out["nets"][name] = net
            elif tag == _SEC_EXEMPLARS:
                budget = _r_u32(fh)
                store = ExemplarStore(budget)
                for _ in range(_r_u32(fh)):
                    cid = _r_u32(fh)
                    session = _r_u32(fh)
                    store.add_class(cid, _r_array(fh), session)
                out["exemplars"] = store
            elif tag == _SEC_FEATURE_MEANS:
                memory = FeatureMeanMemory()
                for _ in range(_r_u32(fh)):
                    cid = _r_u32(fh)
                    memory.record(cid, _r_array(fh))
                out["feature_means"] = memory
            else:
                raise ConfigError(f"unknown checkpoint section tag {tag}")
    return out
