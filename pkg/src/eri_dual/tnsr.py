"""TNSR named-tensor container.

Layout (all little-endian)::

    b"TNSR"  u16 version  u32 count
    per tensor: u16 name_len, UTF-8 name, u8 dtype (1=f32, 2=f64), u8 ndim,
                u64 dims[ndim], raw payload
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"TNSR"
VERSION = 1
DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
CODES = {np.dtype("<f4"): 1, np.dtype("<f8"): 2}


class TnsrFormatError(ValueError):
    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (at byte offset {offset})")


def encode(tensors: dict[str, np.ndarray], compact: bool = False) -> bytes:
    """Serialise tensors in insertion order; ``compact`` stores float32 payloads."""
    dtype = np.dtype("<f4") if compact else np.dtype("<f8")
    parts = [MAGIC, struct.pack("<HI", VERSION, len(tensors))]
    for name, value in tensors.items():
        raw_name = name.encode("utf-8")
        arr = np.require(np.asarray(value, dtype=dtype), requirements="C")  # keeps 0-d shape
        parts.append(struct.pack("<H", len(raw_name)))
        parts.append(raw_name)
        parts.append(struct.pack("<BB", CODES[dtype], arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise TnsrFormatError(f"truncated file: need {n} bytes for {what}, have {len(self.buf) - self.pos}", self.pos)
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode(buf: bytes) -> dict[str, np.ndarray]:
    r = _Reader(buf)
    if r.take(4, "magic") != MAGIC:
        raise TnsrFormatError("bad magic, not a TNSR container", 0)
    version, count = r.unpack("<HI", "header")
    if version != VERSION:
        raise TnsrFormatError(f"unsupported version {version}", 4)
    out: dict[str, np.ndarray] = {}
    for i in range(count):
        (name_len,) = r.unpack("<H", f"name length of tensor {i}")
        start = r.pos
        try:
            name = r.take(name_len, f"name of tensor {i}").decode("utf-8")
        except UnicodeDecodeError:
            raise TnsrFormatError(f"tensor {i} name is not UTF-8", start) from None
        code_pos = r.pos
        code, ndim = r.unpack("<BB", f"dtype of {name!r}")
        if code not in DTYPES:
            raise TnsrFormatError(f"unknown dtype code {code} for {name!r}", code_pos)
        dims = r.unpack(f"<{ndim}Q", f"dims of {name!r}")
        dtype = DTYPES[code]
        nbytes = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
        payload = r.take(nbytes, f"payload of {name!r}")
        if name in out:
            raise TnsrFormatError(f"duplicate tensor name {name!r}", start)
        out[name] = np.frombuffer(payload, dtype=dtype).reshape(dims).copy()
    if r.pos != len(buf):
        raise TnsrFormatError(f"{len(buf) - r.pos} trailing bytes", r.pos)
    return out


def save(path: str | Path, tensors: dict[str, np.ndarray], compact: bool = False) -> None:
    Path(path).write_bytes(encode(tensors, compact))


def load(path: str | Path) -> dict[str, np.ndarray]:
    return decode(Path(path).read_bytes())
