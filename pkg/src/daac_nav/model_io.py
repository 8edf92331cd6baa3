"""Binary model files.

Layout (all little-endian)::

    b"DAACNN1\\0"                       magic
    u16 format version
    u8  kind (0 goal, 1 avoidance)
    f64 dist_scale, angle_scale, range_scale; u32 beam_count
    3 x (u32 n_layers, n_layers x (u8 tag, 5 x u32 dims))   trunk, value, advantage
    u64 payload length in bytes
    payload: f64 parameters, layer order, W then b
    u32 CRC32 of the payload
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path
from typing import Optional

import numpy as np

from . import nn_core as nn
from .dueling_dqn import AVOIDANCE, GOAL, DuelingNet, Normalization

MAGIC = b"DAACNN1\x00"
VERSION = 1
_KINDS = {GOAL: 0, AVOIDANCE: 1}
_TAGS = {nn.Dense: 1, nn.Conv1D: 2, nn.ReLU: 3, nn.Flatten: 4}


class ModelFormatError(ValueError):
    pass


class ChecksumError(ModelFormatError):
    pass


class ModelKindError(ModelFormatError):
    pass


def _layer_record(layer) -> bytes:
    tag = _TAGS[type(layer)]
    if isinstance(layer, nn.Dense):
        dims = (layer.in_features, layer.out_features, 0, 0, 0)
    elif isinstance(layer, nn.Conv1D):
        dims = (layer.in_channels, layer.out_channels, layer.kernel, layer.stride, layer.padding)
    else:
        dims = (0, 0, 0, 0, 0)
    return struct.pack("<B5I", tag, *dims)


def _layer_from(tag: int, dims) -> nn.Layer:
    if tag == 1:
        return nn.Dense(dims[0], dims[1])
    if tag == 2:
        return nn.Conv1D(*dims)
    if tag == 3:
        return nn.ReLU()
    if tag == 4:
        return nn.Flatten()
    raise ModelFormatError(f"unknown layer tag {tag}")


def dumps(net: DuelingNet) -> bytes:
    norm = net.norm
    out = [MAGIC, struct.pack("<HB", VERSION, _KINDS[norm.kind]),
           struct.pack("<3dI", norm.dist_scale, norm.angle_scale, norm.range_scale, norm.beam_count)]
    for part in net.parts:
        out.append(struct.pack("<I", len(part.layers)))
        out.extend(_layer_record(l) for l in part.layers)
    payload = b"".join(
        np.ascontiguousarray(p[k], dtype="<f8").tobytes()
        for part in net.parts for p in part.params for k in ("W", "b") if k in p
    )
    out.append(struct.pack("<Q", len(payload)))
    out.append(payload)
    out.append(struct.pack("<I", zlib.crc32(payload)))
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ModelFormatError("truncated model file")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def loads(data: bytes, expected_kind: Optional[str] = None) -> DuelingNet:
    rd = _Reader(data)
    if rd.take(len(MAGIC)) != MAGIC:
        raise ModelFormatError("bad magic bytes; not a DAAC model file")
    version, kind_id = rd.unpack("<HB")
    if version != VERSION:
        raise ModelFormatError(f"unsupported format version {version}")
    kinds = {v: k for k, v in _KINDS.items()}
    if kind_id not in kinds:
        raise ModelFormatError(f"unknown network kind id {kind_id}")
    kind = kinds[kind_id]
    if expected_kind is not None and kind != expected_kind:
        raise ModelKindError(f"expected a {expected_kind} model, file holds a {kind} model")
    d, a, r, beams = rd.unpack("<3dI")
    norm = Normalization(kind, d, a, r, beams)
    chains = []
    for _ in range(3):
        (n,) = rd.unpack("<I")
        chains.append([_layer_from(rec[0], rec[1:]) for rec in (rd.unpack("<B5I") for _ in range(n))])
    (n_bytes,) = rd.unpack("<Q")
    payload = rd.take(n_bytes)
    (crc,) = rd.unpack("<I")
    if zlib.crc32(payload) != crc:
        raise ChecksumError("payload checksum mismatch; model file is corrupted")
    if rd.pos != len(data):
        raise ModelFormatError("trailing bytes after checksum")
    flat = np.frombuffer(payload, dtype="<f8")
    parts, off = [], 0
    for layers in chains:
        params = []
        for layer in layers:
            shapes = nn.param_shapes(layer)
            if shapes is None:
                params.append({})
                continue
            p = {}
            for key, shape in zip(("W", "b"), shapes):
                size = int(np.prod(shape))
                if off + size > flat.size:
                    raise ModelFormatError("payload shorter than the layer table requires")
                p[key] = flat[off:off + size].astype(np.float64).reshape(shape)
                off += size
            params.append(p)
        parts.append(nn.Sequential(layers, params))
    if off != flat.size:
        raise ModelFormatError("payload longer than the layer table requires")
    return DuelingNet(norm, *parts)


def save_model(net: DuelingNet, path) -> None:
    Path(path).write_bytes(dumps(net))


def load_model(path, expected_kind: Optional[str] = None) -> DuelingNet:
    return loads(Path(path).read_bytes(), expected_kind)
