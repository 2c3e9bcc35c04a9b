"""Binary persistence of first-hit fields.

Layout (all little-endian)::

    offset  size  content
    0       4     magic b"LPRW"
    4       2     format version (uint16) = 1
    6       4     n (uint32)
    10      8     seed (uint64)
    18      8     walk length (uint64)
    26      1     covered flag (0 or 1)
    27      8*n*n first-hit times (uint64), row-major, 2**64-1 = unvisited
"""
from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .walk import FirstHitField

MAGIC = b"LPRW"
VERSION = 1
_HEADER = struct.Struct("<4sHIQQB")


class FieldFormatError(ValueError):
    pass


class UnsupportedVersion(FieldFormatError):
    pass


class DigestMismatch(FieldFormatError):
    pass


def to_bytes(f: FirstHitField) -> bytes:
    head = _HEADER.pack(MAGIC, VERSION, f.n, f.seed, f.walk_length, int(f.covered))
    return head + np.ascontiguousarray(f.hits, dtype="<u8").tobytes()


def from_bytes(buf: bytes, supported=(VERSION,)) -> FirstHitField:
    if len(buf) < _HEADER.size:
        raise FieldFormatError("truncated header")
    magic, version, n, seed, length, covered = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FieldFormatError(f"bad magic {magic!r}")
    if version not in supported:
        raise UnsupportedVersion(f"field format version {version} is not supported "
                                 f"(reader accepts {sorted(supported)})")
    if covered not in (0, 1):
        raise FieldFormatError(f"bad covered flag {covered}")
    body = len(buf) - _HEADER.size
    if body != 8 * n * n:
        raise FieldFormatError(f"expected {8 * n * n} payload bytes, found {body}")
    hits = np.frombuffer(buf, dtype="<u8", offset=_HEADER.size).astype(np.uint64)
    return FirstHitField(n, seed, hits, length, bool(covered))


def digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def persist(f: FirstHitField, path) -> str:
    """Write ``f`` to ``path``; return the sha256 hex digest of the file."""
    data = to_bytes(f)
    Path(path).write_bytes(data)
    return digest(data)


def load(path, expected_digest: str | None = None) -> FirstHitField:
    data = Path(path).read_bytes()
    if expected_digest is not None and digest(data) != expected_digest:
        raise DigestMismatch(f"{path}: content digest does not match the manifest")
    return from_bytes(data)
