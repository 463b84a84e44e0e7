"""Binary checkpoint container.

Layout (little-endian)::

    b"GMCK" | u32 version=1 | u32 count
    count x ( u16 name_len | name (utf-8) | u8 dtype (1=f32, 2=f64) | u8 ndim | u32 dims[ndim] | raw data )
    u64 CRC-64/XZ of every preceding byte

A JSON sidecar (``<path>.json``) with the model config lets
:func:`checkpoint_load` rebuild the network without outside knowledge.
"""
from __future__ import annotations

import json
import os
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Optional

import numpy as np
from fastcrc import crc64

MAGIC = b"GMCK"
VERSION = 1
_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODES = {np.dtype(np.float32): 1, np.dtype(np.float64): 2}


class CheckpointError(Exception):
    """Base class for container errors."""


class CheckpointFormatError(CheckpointError):
    """Bad magic bytes or unsupported version."""


class CheckpointTruncatedError(CheckpointError):
    pass


class CheckpointChecksumError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError, ValueError):
    pass


def crc64_xz(data: bytes) -> int:
    return crc64.xz(bytes(data))


def encode_state(state: "OrderedDict[str, np.ndarray]") -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(state))]
    for name, arr in state.items():
        arr = np.asarray(arr)
        if arr.dtype not in _CODES:
            raise TypeError(f"{name}: unsupported dtype {arr.dtype}")
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<BB", _CODES[arr.dtype], arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype=_DTYPES[_CODES[arr.dtype]]).tobytes())
    body = b"".join(parts)
    return body + struct.pack("<Q", crc64_xz(body))


def decode_state(blob: bytes) -> "OrderedDict[str, np.ndarray]":
    if len(blob) < 12:
        raise CheckpointTruncatedError(f"file too short for a header ({len(blob)} bytes)")
    if blob[:4] != MAGIC:
        raise CheckpointFormatError(f"bad magic {blob[:4]!r}; not a checkpoint")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version} (expected {VERSION})")
    if len(blob) < 20:
        raise CheckpointTruncatedError("file ends before the checksum")
    body, (stored,) = blob[:-8], struct.unpack("<Q", blob[-8:])
    pos = 12
    state = OrderedDict()

    def take(n):
        nonlocal pos
        if pos + n > len(body):
            raise CheckpointTruncatedError(f"unexpected end of data at byte {pos} (need {n} more)")
        chunk = body[pos:pos + n]
        pos += n
        return chunk

    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = take(nlen).decode("utf-8")
        code, ndim = struct.unpack("<BB", take(2))
        if code not in _DTYPES:
            raise CheckpointFormatError(f"{name}: unknown dtype code {code}")
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        dt = _DTYPES[code]
        n = int(np.prod(shape, dtype=np.int64))
        state[name] = np.frombuffer(take(n * dt.itemsize), dtype=dt).reshape(shape).astype(dt.newbyteorder("="))
    if crc64_xz(body) != stored:
        raise CheckpointChecksumError(f"CRC-64 mismatch: stored {stored:#018x}, computed {crc64_xz(body):#018x}")
    if pos != len(body):
        raise CheckpointFormatError(f"{len(body) - pos} trailing bytes after the last tensor")
    return state


def save_state(state, path) -> None:
    """Write atomically: a partial file never replaces a good one."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(encode_state(state))
    os.replace(tmp, path)


def load_state(path) -> "OrderedDict[str, np.ndarray]":
    with open(path, "rb") as fh:
        return decode_state(fh.read())


def _sidecar(path) -> Path:
    return Path(str(path) + ".json")


def checkpoint_save(model, path, config=None) -> None:
    """Save every parameter and buffer; ``config`` (a ModelConfig) goes into the sidecar."""
    save_state(model.state_dict(), path)
    if config is not None:
        with open(_sidecar(path), "w") as fh:
            json.dump({"model": config.to_dict()}, fh, indent=2, sort_keys=True)


def load_into(model, state) -> None:
    """Copy ``state`` into ``model`` only after every name and shape has been checked."""
    own = model.state_dict()
    missing = [k for k in own if k not in state]
    extra = [k for k in state if k not in own]
    if missing or extra:
        raise CheckpointShapeError(f"tensor names differ: missing {missing[:3]}, unexpected {extra[:3]}")
    for k, v in state.items():
        if own[k].shape != v.shape:
            raise CheckpointShapeError(f"shape mismatch for {k}: model {own[k].shape}, checkpoint {v.shape}")
    model.load_state_dict(state)


def checkpoint_load(path, model=None):
    """Load a checkpoint; without ``model`` the network is rebuilt from the sidecar config."""
    state = load_state(path)
    if model is None:
        from .models import ModelConfig, build_model
        side = _sidecar(path)
        if not side.exists():
            raise FileNotFoundError(f"{side}: config sidecar needed to rebuild the model")
        with open(side) as fh:
            model = build_model(ModelConfig.from_dict(json.load(fh)["model"]))
    load_into(model, state)
    return model


def read_config(path) -> Optional[dict]:
    side = _sidecar(path)
    if not side.exists():
        return None
    with open(side) as fh:
        return json.load(fh)["model"]
