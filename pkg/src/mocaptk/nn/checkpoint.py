"""Flat binary checkpoint container.

Layout (all integers little-endian):

    magic    b"MCTK"
    version  uint16
    hash     uint16 length + utf-8 config hash string
    count    uint32 number of entries
    entry    uint16 name length + utf-8 name
             uint8 ndim + uint32 dims...
             float64 little-endian payload (C order)

Entry names are parameter paths ("frame_encoder/0/w", ...); optimizer
state and counters ride along under their own prefixes.
"""
from __future__ import annotations

import struct

import numpy as np

from ..errors import ChecksumMismatch, TruncatedData

_MAGIC = b"MCTK"
_VERSION = 1


def save_arrays(path, arrays: dict, config_hash: str = "") -> None:
    hash_bytes = config_hash.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<HH", _VERSION, len(hash_bytes)))
        fh.write(hash_bytes)
        fh.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(arr, dtype="<f8")
            name_bytes = name.encode("utf-8")
            fh.write(struct.pack("<H", len(name_bytes)))
            fh.write(name_bytes)
            fh.write(struct.pack("<B", arr.ndim))
            for d in arr.shape:
                fh.write(struct.pack("<I", d))
            fh.write(arr.tobytes())


def load_arrays(path, expected_hash: str | None = None):
    """Returns (arrays, config_hash); raises ChecksumMismatch when the
    stored hash differs from *expected_hash*."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise TruncatedData("not a checkpoint file")
    off = 4
    _version, hash_len = struct.unpack_from("<HH", blob, off)
    off += 4
    config_hash = blob[off:off + hash_len].decode("utf-8")
    off += hash_len
    if expected_hash is not None and config_hash != expected_hash:
        raise ChecksumMismatch(f"checkpoint hash {config_hash!r} != expected {expected_hash!r}")
    (count,) = struct.unpack_from("<I", blob, off)
    off += 4
    arrays = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, off)
        off += 2
        name = blob[off:off + name_len].decode("utf-8")
        off += name_len
        (ndim,) = struct.unpack_from("<B", blob, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}I", blob, off) if ndim else ()
        off += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        end = off + 8 * size
        if end > len(blob):
            raise TruncatedData(f"checkpoint entry {name!r} truncated")
        arrays[name] = np.frombuffer(blob[off:end], dtype="<f8").reshape(shape).copy()
        off = end
    return arrays, config_hash
