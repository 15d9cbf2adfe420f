"""Named parameter tensors, their gradients and optimizer moments, plus the
binary weight file.

Weight file layout (little-endian)::

    b"MEM0" | u16 version | u32 tensor count
    per tensor: u16 name length | utf-8 name | u8 rank | u32 dim * rank | f32 payload
    u32 CRC32 of everything above
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

MAGIC = b"MEM0"
VERSION = 1


class WeightFormatError(ValueError):
    """Malformed, corrupted or incompatible weight file."""


class ParamStore:
    """Ordered collection of named parameters with matching gradient buffers."""

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step = 0

    def add(self, name: str, value) -> np.ndarray:
        if name in self.params:
            raise ValueError(f"duplicate parameter name {name!r}")
        arr = np.array(value, dtype=self.dtype)
        if arr.ndim > 3:
            raise ValueError(f"{name}: rank {arr.ndim} exceeds 3")
        self.params[name] = arr
        self.grads[name] = np.zeros_like(arr)
        self.m[name] = np.zeros_like(arr)
        self.v[name] = np.zeros_like(arr)
        return arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self):
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0)

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {k: v.shape for k, v in self.params.items()}

    def astype(self, dtype) -> "ParamStore":
        """Copy of the parameters in another dtype (moments reset)."""
        out = ParamStore(dtype)
        for k, v in self.params.items():
            out.add(k, v)
        return out

    def assign(self, other: "ParamStore") -> None:
        """Copy values from ``other``, which must have the same names and shapes."""
        mine, theirs = self.shapes(), other.shapes()
        for name, shape in mine.items():
            if name not in theirs:
                raise WeightFormatError(f"parameter {name!r} missing from weight file")
            if theirs[name] != shape:
                raise WeightFormatError(
                    f"parameter {name!r}: file shape {theirs[name]} != model shape {shape}")
        extra = sorted(set(theirs) - set(mine))
        if extra:
            raise WeightFormatError(f"unexpected parameter {extra[0]!r} in weight file")
        for name in mine:
            self.params[name][...] = other.params[name]

    def global_grad_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in self.grads.values())))


def save_params(store: ParamStore, path: str | Path) -> None:
    parts = [MAGIC, struct.pack("<HI", VERSION, len(store))]
    for name, arr in store.params.items():
        raw = name.encode()
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    body = b"".join(parts)
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body)))


def load_params(path: str | Path, into: ParamStore | None = None) -> ParamStore:
    """Read a weight file; with ``into``, also copy it into a model's store."""
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise WeightFormatError(f"{path}: bad magic")
    if len(raw) < 14:
        raise WeightFormatError(f"{path}: truncated")
    body, (crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) != crc:
        raise WeightFormatError(f"{path}: checksum mismatch")
    version, count = struct.unpack_from("<HI", body, 4)
    if version != VERSION:
        raise WeightFormatError(f"{path}: version {version}, expected {VERSION}")
    store = ParamStore(np.float32)
    off = 10
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", body, off)
            name = body[off + 2:off + 2 + nlen].decode()
            off += 2 + nlen
            (rank,) = struct.unpack_from("<B", body, off)
            shape = struct.unpack_from(f"<{rank}I", body, off + 1)
            off += 1 + 4 * rank
            n = int(np.prod(shape, dtype=np.int64))
            arr = np.frombuffer(body, dtype="<f4", count=n, offset=off).reshape(shape)
            off += 4 * n
            store.add(name, arr)
    except (struct.error, ValueError) as exc:
        raise WeightFormatError(f"{path}: malformed tensor table ({exc})") from exc
    if off != len(body):
        raise WeightFormatError(f"{path}: {len(body) - off} trailing bytes")
    if into is not None:
        into.assign(store)
        return into
    return store
