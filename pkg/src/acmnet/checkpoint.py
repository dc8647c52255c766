"""Flat binary checkpoint format.

Layout (all integers little-endian u32):
    magic  b"ACMN"
    version
    repeated until EOF:
        name_len, name (utf-8), rank, dims[rank], payload (f32 little-endian)
"""

import struct

import numpy as np

from .errors import CheckpointMismatch, FormatError

MAGIC = b"ACMN"
VERSION = 1


def save_checkpoint(path, store):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        for p in store:
            name = p.name.encode("utf-8")
            fh.write(struct.pack("<I", len(name)))
            fh.write(name)
            dims = p.shape
            fh.write(struct.pack("<I", len(dims)))
            fh.write(struct.pack(f"<{len(dims)}I", *dims))
            fh.write(np.ascontiguousarray(p.data, dtype="<f4").tobytes())


def load_checkpoint(path):
    """Read a checkpoint into an ordered name -> float32 array dict."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: not a checkpoint (bad magic {blob[:4]!r})")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    off = 8
    out = {}
    while off < len(blob):
        (name_len,) = struct.unpack_from("<I", blob, off)
        off += 4
        name = blob[off:off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<I", blob, off)
        off += 4
        dims = struct.unpack_from(f"<{rank}I", blob, off)
        off += 4 * rank
        count = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=off).reshape(dims)
        off += 4 * count
        out[name] = arr.copy()
    return out


def load_into_store(path, store):
    """Load checkpoint values into a model's parameters, checking shapes."""
    loaded = load_checkpoint(path)
    for p in store:
        if p.name not in loaded:
            raise CheckpointMismatch(f"checkpoint is missing parameter {p.name!r}")
        arr = loaded.pop(p.name)
        if arr.shape != p.shape:
            raise CheckpointMismatch(
                f"shape mismatch for {p.name!r}: checkpoint {arr.shape}, model {p.shape}")
        p.tensor.data = arr.astype(p.tensor.dtype)
    if loaded:
        extra = next(iter(loaded))
        raise CheckpointMismatch(f"checkpoint has unexpected parameter {extra!r}")


def checkpoint_param_count(path):
    return sum(a.size for a in load_checkpoint(path).values())
