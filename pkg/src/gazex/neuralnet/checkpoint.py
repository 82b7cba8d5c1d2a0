"""Binary checkpoint format.

Layout, all integers little-endian::

    8 bytes   magic  b"GZXCKPT1"
    4 bytes   uint32 header length n
    n bytes   UTF-8 JSON header (sorted keys)
    ...       raw parameter arrays in header order, little-endian

The header carries the model configuration, normalizer statistics, training
metadata, and for every parameter its name, shape and dtype. Normalizer
floats are stored as hex strings so that loading is bit-exact.
"""
import json
import struct

import numpy as np

from ..dataset import Normalizer
from ..errors import GazexError
from .model import ModelConfig, ModelParams

MAGIC = b"GZXCKPT1"
FORMAT_VERSION = 1


class CheckpointError(GazexError):
    pass


def _hex(a):
    return [float(x).hex() for x in np.asarray(a, dtype=float).ravel()]


def _unhex(v):
    return np.array([float.fromhex(x) for x in v], dtype=float)


def save_checkpoint(path, model, meta=None):
    """Write ``model`` (a :class:`~gazex.neuralnet.train.GazeXModel`) to ``path``."""
    params = model.params
    names = list(params.weights)
    header = {
        "format_version": FORMAT_VERSION,
        "config": params.config.to_dict(),
        "normalizer": {k: _hex(v) for k, v in model.normalizer.__dict__.items()},
        "meta": meta or {},
        "params": [
            {"name": k, "shape": list(params.weights[k].shape), "dtype": params.weights[k].dtype.str.lstrip("<>=|")}
            for k in names
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for k in names:
            w = params.weights[k]
            fh.write(np.ascontiguousarray(w, dtype=w.dtype.newbyteorder("<")).tobytes())


def load_checkpoint(path):
    """Return ``(model, meta)`` read from ``path``."""
    from .train import GazeXModel

    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    (n,) = struct.unpack("<I", data[8:12])
    try:
        header = json.loads(data[12:12 + n].decode("utf-8"))
    except ValueError as e:
        raise CheckpointError(f"{path}: corrupt header ({e})") from e
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {header.get('format_version')}")
    off = 12 + n
    weights = {}
    for p in header["params"]:
        dt = np.dtype("<" + p["dtype"])
        count = int(np.prod(p["shape"], dtype=np.int64))
        end = off + count * dt.itemsize
        if end > len(data):
            raise CheckpointError(f"{path}: truncated at parameter {p['name']}")
        weights[p["name"]] = np.frombuffer(data[off:end], dtype=dt).reshape(p["shape"]).astype(dt.newbyteorder("="))
        off = end
    if off != len(data):
        raise CheckpointError(f"{path}: trailing bytes after parameters")
    config = ModelConfig(**header["config"])
    normalizer = Normalizer(**{k: _unhex(v) for k, v in header["normalizer"].items()})
    return GazeXModel(ModelParams(config, weights), normalizer), header["meta"]
