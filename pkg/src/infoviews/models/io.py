"""Versioned binary model files.

Layout (little-endian)::

    magic   b"IVMD"
    u16     format version (1)
    u16     type tag: 1 encoder, 2 stack, 3 rbm, 4 drbm, 5 ssbe
    u32     length of UTF-8 JSON metadata, then the metadata
    u32     number of arrays, then for each array:
              u8 ndim, u32 * ndim dims, float32 payload (row-major)

A stack stores its layers as consecutive (weights, biases) array pairs.
Parameters are written as float32, so float64 models lose precision.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..exceptions import FormatError
from .drbm import DRBM
from .encoder import FactorizedEncoder, StackedEncoder
from .rbm import RBM
from .ssbe import SSBE

MAGIC = b"IVMD"
VERSION = 1
TAGS = {"encoder": 1, "stack": 2, "rbm": 3, "drbm": 4, "ssbe": 5}
_NAMES = {v: k for k, v in TAGS.items()}


def _pack(tag: str, meta: dict, arrays) -> bytes:
    meta_raw = json.dumps(meta, sort_keys=True).encode()
    out = [MAGIC, struct.pack("<HH", VERSION, TAGS[tag]),
           struct.pack("<I", len(meta_raw)), meta_raw, struct.pack("<I", len(arrays))]
    for a in arrays:
        a = np.ascontiguousarray(a, dtype="<f4")
        out.append(struct.pack("<B", a.ndim))
        out.append(struct.pack(f"<{a.ndim}I", *a.shape))
        out.append(a.tobytes())
    return b"".join(out)


def _unpack(raw: bytes):
    if raw[:4] != MAGIC:
        raise FormatError("not a model file")
    version, tag = struct.unpack_from("<HH", raw, 4)
    if version != VERSION:
        raise FormatError(f"unsupported model format version {version}")
    if tag not in _NAMES:
        raise FormatError(f"unknown model type tag {tag}")
    off = 8
    (mlen,) = struct.unpack_from("<I", raw, off)
    off += 4
    meta = json.loads(raw[off:off + mlen].decode())
    off += mlen
    (count,) = struct.unpack_from("<I", raw, off)
    off += 4
    arrays = []
    for _ in range(count):
        (ndim,) = struct.unpack_from("<B", raw, off)
        off += 1
        dims = struct.unpack_from(f"<{ndim}I", raw, off)
        off += 4 * ndim
        size = int(np.prod(dims)) if dims else 1
        if off + 4 * size > len(raw):
            raise FormatError("truncated model payload")
        arrays.append(np.frombuffer(raw, dtype="<f4", count=size, offset=off)
                      .reshape(dims).astype(np.float32))
        off += 4 * size
    if off != len(raw):
        raise FormatError("trailing bytes after model payload")
    return _NAMES[tag], meta, arrays


def dumps_model(model) -> bytes:
    if isinstance(model, FactorizedEncoder):
        return _pack("encoder", {"role": model.role}, [model.weights, model.biases])
    if isinstance(model, StackedEncoder):
        arrays = []
        for layer in model.layers:
            arrays += [layer.weights, layer.biases]
        return _pack("stack", {"roles": [l.role for l in model.layers],
                               "sample_seed": model.sample_seed}, arrays)
    if isinstance(model, RBM):
        return _pack("rbm", {"params": model.get_params(),
                             "trace": model.reconstruction_error_.tolist()},
                     [model.components_, model.intercept_visible_, model.intercept_hidden_])
    if isinstance(model, DRBM):
        return _pack("drbm", {"params": model.get_params(),
                              "classes": model.classes_.tolist(),
                              "trace": model.log_likelihood_.tolist()},
                     [model.W_, model.U_, model.c_, model.d_])
    if isinstance(model, SSBE):
        return _pack("ssbe", {"params": model.get_params(),
                              "classes": model.classes_.tolist(),
                              "trace": model.objective_.tolist()}, [model.W_, model.c_])
    raise TypeError(f"cannot serialize {type(model).__name__}")


def _params(meta):
    p = dict(meta["params"])
    if not isinstance(p.get("random_state"), (int, type(None))):
        p["random_state"] = None
    return p


def loads_model(raw: bytes):
    tag, meta, arrays = _unpack(raw)
    if tag == "encoder":
        return FactorizedEncoder(arrays[0], arrays[1], role=meta["role"])
    if tag == "stack":
        layers = [FactorizedEncoder(arrays[2 * k], arrays[2 * k + 1], role=r)
                  for k, r in enumerate(meta["roles"])]
        return StackedEncoder(layers, sample_seed=meta["sample_seed"])
    if tag == "rbm":
        m = RBM(**_params(meta))
        m.components_, m.intercept_visible_, m.intercept_hidden_ = arrays
        m.reconstruction_error_ = np.array(meta.get("trace", []))
        m.n_features_in_ = arrays[0].shape[1]
        return m
    if tag == "drbm":
        m = DRBM(**_params(meta))
        m.W_, m.U_, m.c_, m.d_ = (a.astype(np.float64) for a in arrays)
        m.classes_ = np.array(meta["classes"])
        m.log_likelihood_ = np.array(meta.get("trace", []))
        m.n_features_in_ = arrays[0].shape[1]
        return m
    m = SSBE(**_params(meta))
    m.W_, m.c_ = (a.astype(np.float64) for a in arrays)
    m.classes_ = np.array(meta["classes"])
    m.objective_ = np.array(meta.get("trace", []))
    m.n_features_in_ = arrays[0].shape[1]
    return m


def save_model(model, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps_model(model))


def load_model(path):
    with open(path, "rb") as fh:
        return loads_model(fh.read())
