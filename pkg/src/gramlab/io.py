"""Binary formats: GRMW network checkpoints and GRMH/GRMY activation dumps.

All integers and reals are little-endian; matrices are row-major float64.
"""
from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .errors import BadMagic, DatasetMissing, ShapeMismatch, TruncatedFile
from .nn import Layer, Network

CHECKPOINT_MAGIC = b"GRMW"
CHECKPOINT_VERSION = 1
ACT_CODES = {"relu": 0, "gelu": 1, "identity": 2, "sigmoid": 3}
ACT_NAMES = {v: k for k, v in ACT_CODES.items()}


class _Reader:
    def __init__(self, raw: bytes, path):
        self.raw, self.pos, self.path = raw, 0, path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise TruncatedFile(f"{self.path}: needed {n} bytes at offset {self.pos}, file has {len(self.raw)}")
        out = self.raw[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt)))

    def matrix(self, rows: int, cols: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * rows * cols), dtype="<f8").reshape(rows, cols).copy()

    def magic(self, expected: bytes) -> None:
        got = self.take(4)
        if got != expected:
            raise BadMagic(f"{self.path}: magic {got!r}, expected {expected!r}")


def _read(path) -> bytes:
    path = Path(path)
    if not path.exists():
        raise DatasetMissing(f"{path} not found")
    return path.read_bytes()


def _atomic_write(path, payload: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def checkpoint_bytes(net: Network) -> bytes:
    parts = [CHECKPOINT_MAGIC, struct.pack("<HH", CHECKPOINT_VERSION, net.depth)]
    for layer in net.layers:
        rows, cols = layer.W.shape
        parts.append(struct.pack("<IIBB", rows, cols, ACT_CODES[layer.activation], layer.b is not None))
        parts.append(np.ascontiguousarray(layer.W, dtype="<f8").tobytes())
        if layer.b is not None:
            parts.append(np.ascontiguousarray(layer.b, dtype="<f8").tobytes())
    return b"".join(parts)


def parse_checkpoint(raw: bytes, path="<bytes>") -> Network:
    r = _Reader(raw, path)
    r.magic(CHECKPOINT_MAGIC)
    version, count = r.unpack("HH")
    if version != CHECKPOINT_VERSION:
        raise BadMagic(f"{path}: unsupported checkpoint version {version}")
    layers = []
    for _ in range(count):
        rows, cols, act, has_bias = r.unpack("IIBB")
        if act not in ACT_NAMES:
            raise BadMagic(f"{path}: unknown activation code {act}")
        W = r.matrix(rows, cols)
        b = r.matrix(1, rows).ravel() if has_bias else None
        layers.append(Layer(W, ACT_NAMES[act], b))
    return Network(layers)


def save_checkpoint(net: Network, path) -> None:
    _atomic_write(path, checkpoint_bytes(net))


def load_checkpoint(path) -> Network:
    return parse_checkpoint(_read(path), path)


def write_activation_dump(layers, path) -> None:
    """``layers`` is a list of d_l x N matrices."""
    parts = [b"GRMH", struct.pack("<I", len(layers))]
    for H in layers:
        H = np.asarray(H, dtype=np.float64)
        if H.ndim != 2:
            raise ShapeMismatch("each activation block must be 2-D")
        parts.append(struct.pack("<II", *H.shape))
        parts.append(np.ascontiguousarray(H, dtype="<f8").tobytes())
    _atomic_write(path, b"".join(parts))


def read_activation_dump(path) -> list[np.ndarray]:
    r = _Reader(_read(path), path)
    r.magic(b"GRMH")
    (count,) = r.unpack("I")
    out = [r.matrix(*r.unpack("II")) for _ in range(count)]
    if out and len({H.shape[1] for H in out}) != 1:
        raise ShapeMismatch(f"{path}: layers disagree on N")
    return out


def write_targets(Y, path) -> None:
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    _atomic_write(path, b"GRMY" + struct.pack("<II", *Y.shape) + np.ascontiguousarray(Y, dtype="<f8").tobytes())


def read_targets(path) -> np.ndarray:
    r = _Reader(_read(path), path)
    r.magic(b"GRMY")
    return r.matrix(*r.unpack("II"))
