"""Binary checkpoint format.

Layout, all integers little-endian::

    b"NINC"  u16 version
    u32 n + n bytes   architecture as UTF-8 JSON (sorted keys)
    u32 m + m f64     per-channel dataset mean
    u32 count, then per entry:
        u32 n + n bytes UTF-8 name, 4 x u32 shape, prod(shape) f64 values

Kernels are stored as ``<layer>.weight`` with shape (out, in, kh, kw) and
biases as ``<layer>.bias`` with shape (out, 1, 1, 1).
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from .graph import Parameter, ParameterStore
from .inception import ArchitectureSpec

MAGIC = b"NINC"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _u32(fh, value: int):
    fh.write(struct.pack("<I", value))


def _read(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint at byte {fh.tell()}")
    return data


def _read_u32(fh) -> int:
    return struct.unpack("<I", _read(fh, 4))[0]


def write_parameters(fh, params: ParameterStore):
    entries = []
    for name, p in params.items():
        entries.append((f"{name}.weight", p.weight))
        entries.append((f"{name}.bias", p.bias.reshape(-1, 1, 1, 1)))
    _u32(fh, len(entries))
    for name, arr in entries:
        raw = name.encode("utf-8")
        _u32(fh, len(raw))
        fh.write(raw)
        if arr.ndim != 4:
            raise CheckpointError(f"{name}: expected a 4-D array")
        fh.write(struct.pack("<4I", *arr.shape))
        fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_parameters(fh) -> ParameterStore:
    arrays = {}
    for _ in range(_read_u32(fh)):
        name = _read(fh, _read_u32(fh)).decode("utf-8")
        shape = struct.unpack("<4I", _read(fh, 16))
        count = int(np.prod(shape))
        arrays[name] = np.frombuffer(_read(fh, 8 * count), dtype="<f8").astype(np.float64).reshape(shape)
    store = ParameterStore()
    for key, arr in arrays.items():
        layer, _, slot = key.rpartition(".")
        if slot != "weight":
            continue
        bias = arrays.get(f"{layer}.bias")
        if bias is None:
            raise CheckpointError(f"missing bias for {layer}")
        store[layer] = Parameter(arr.copy(), bias.reshape(-1).copy())
    return store


@dataclass
class Checkpoint:
    arch: ArchitectureSpec
    mean: np.ndarray
    params: ParameterStore


def dumps(ckpt: Checkpoint) -> bytes:
    fh = io.BytesIO()
    fh.write(MAGIC)
    fh.write(struct.pack("<H", VERSION))
    arch = json.dumps(asdict(ckpt.arch), sort_keys=True).encode("utf-8")
    _u32(fh, len(arch))
    fh.write(arch)
    mean = np.asarray(ckpt.mean, dtype="<f8").reshape(-1)
    _u32(fh, mean.size)
    fh.write(mean.tobytes())
    write_parameters(fh, ckpt.params)
    return fh.getvalue()


def loads(data: bytes) -> Checkpoint:
    fh = io.BytesIO(data)
    if _read(fh, 4) != MAGIC:
        raise CheckpointError("not a checkpoint: bad magic")
    (version,) = struct.unpack("<H", _read(fh, 2))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    arch = ArchitectureSpec(**json.loads(_read(fh, _read_u32(fh)).decode("utf-8")))
    mean = np.frombuffer(_read(fh, 8 * _read_u32(fh)), dtype="<f8").astype(np.float64)
    params = read_parameters(fh)
    if fh.read(1):
        raise CheckpointError("trailing bytes after checkpoint payload")
    return Checkpoint(arch, mean, params)


def save_checkpoint(path, ckpt: Checkpoint):
    with open(path, "wb") as fh:
        fh.write(dumps(ckpt))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return loads(fh.read())
