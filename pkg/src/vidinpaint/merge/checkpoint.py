"""Named float32 tensor maps and the CKPT1 file format.

Layout: ``b"CKPT1"``, u64 little-endian header length, UTF-8 JSON header
(a list of ``{name, dtype, shape, offset, nbytes}`` sorted by name), then
the little-endian payload. Offsets are relative to the payload start.
"""
from __future__ import annotations

import json
import struct
from collections.abc import Mapping
from pathlib import Path
from typing import Iterator

import numpy as np

from .._io import atomic_write_bytes
from ..errors import FormatError, InvalidArgumentError

MAGIC = b"CKPT1"
DTYPE = "f32"
_LE_F32 = np.dtype("<f4")
_LEN = struct.Struct("<Q")


class Checkpoint(Mapping):
    """Immutable ordered map ``name -> float32 array``."""

    def __init__(self, tensors: Mapping[str, np.ndarray] | None = None):
        self._t: dict[str, np.ndarray] = {}
        for name, value in (tensors or {}).items():
            if not isinstance(name, str) or not name:
                raise InvalidArgumentError(f"tensor names must be non-empty strings, got {name!r}")
            arr = np.array(value, dtype=np.float32)
            arr.flags.writeable = False
            self._t[name] = arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self._t[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._t)

    def __len__(self) -> int:
        return len(self._t)

    def __repr__(self) -> str:
        return f"Checkpoint({len(self)} tensors)"

    def with_tensors(self, updates: Mapping[str, np.ndarray]) -> "Checkpoint":
        return Checkpoint({**self._t, **updates})

    def equal(self, other: "Checkpoint") -> bool:
        """Same names, shapes and bits."""
        return self.keys() == other.keys() and all(
            self[k].shape == other[k].shape and self[k].tobytes() == other[k].tobytes() for k in self)


def encode_checkpoint(ckpt: Mapping[str, np.ndarray]) -> bytes:
    header, chunks, offset = [], [], 0
    for name in sorted(ckpt):
        data = np.ascontiguousarray(ckpt[name], dtype=_LE_F32).tobytes()
        header.append({"name": name, "dtype": DTYPE, "shape": list(np.shape(ckpt[name])),
                       "offset": offset, "nbytes": len(data)})
        chunks.append(data)
        offset += len(data)
    head = json.dumps(header, separators=(",", ":")).encode("utf-8")
    return MAGIC + _LEN.pack(len(head)) + head + b"".join(chunks)


def _entry_field(entry, key, kind, where):
    if key not in entry:
        raise FormatError(f"{where}.{key}", "missing")
    value = entry[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int) or value < 0):
        raise FormatError(f"{where}.{key}", f"expected a nonnegative integer, got {value!r}")
    if kind is str and not isinstance(value, str):
        raise FormatError(f"{where}.{key}", f"expected a string, got {value!r}")
    return value


def decode_checkpoint(raw: bytes) -> Checkpoint:
    if raw[:len(MAGIC)] != MAGIC:
        raise FormatError("magic", f"expected {MAGIC!r}, got {raw[:len(MAGIC)]!r}")
    start = len(MAGIC) + _LEN.size
    if len(raw) < start:
        raise FormatError("header_length", "file ends inside the length field")
    (head_len,) = _LEN.unpack_from(raw, len(MAGIC))
    if start + head_len > len(raw):
        raise FormatError("header_length", f"header of {head_len} bytes exceeds file size {len(raw)}")
    try:
        header = json.loads(raw[start:start + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError("header", f"not valid UTF-8 JSON: {exc}") from exc
    if not isinstance(header, list):
        raise FormatError("header", "expected a list of entries")
    payload = memoryview(raw)[start + head_len:]
    tensors, names, spans = {}, [], []
    for i, entry in enumerate(header):
        if not isinstance(entry, dict):
            raise FormatError(f"entry[{i}]", "expected an object")
        name = _entry_field(entry, "name", str, f"entry[{i}]")
        where = f"entry[{name}]"
        if not name:
            raise FormatError(f"{where}.name", "empty name")
        if names and name <= names[-1]:
            raise FormatError(f"{where}.name", "entries not strictly sorted by name")
        dtype = _entry_field(entry, "dtype", str, where)
        if dtype != DTYPE:
            raise FormatError(f"{where}.dtype", f"unsupported dtype {dtype!r}")
        shape = entry.get("shape")
        if not isinstance(shape, list) or any(isinstance(d, bool) or not isinstance(d, int) or d < 1 for d in shape):
            raise FormatError(f"{where}.shape", f"expected a list of positive integers, got {shape!r}")
        offset = _entry_field(entry, "offset", int, where)
        nbytes = _entry_field(entry, "nbytes", int, where)
        if nbytes != 4 * int(np.prod(shape, dtype=np.int64)):
            raise FormatError(f"{where}.nbytes", f"{nbytes} does not match shape {shape}")
        if offset + nbytes > len(payload):
            raise FormatError(f"{where}.offset", "tensor runs past the end of the payload (truncated file?)")
        names.append(name)
        spans.append((offset, offset + nbytes, name))
        tensors[name] = np.frombuffer(payload[offset:offset + nbytes], dtype=_LE_F32).reshape(shape)
    spans.sort()
    cursor = 0
    for lo, hi, name in spans:
        if lo != cursor:
            raise FormatError(f"entry[{name}].offset", "tensors overlap or leave gaps in the payload")
        cursor = hi
    if cursor != len(payload):
        raise FormatError("payload", f"{len(payload) - cursor} trailing bytes after the last tensor")
    return Checkpoint({n: tensors[n] for n in names})


def save_checkpoint(ckpt: Mapping[str, np.ndarray], path) -> None:
    atomic_write_bytes(path, encode_checkpoint(ckpt))


def load_checkpoint(path) -> Checkpoint:
    return decode_checkpoint(Path(path).read_bytes())
