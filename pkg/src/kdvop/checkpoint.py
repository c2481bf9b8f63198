"""Checkpoint files: magic "NOCK", config hash, named f64 arrays, CRC-32.

Layout (little-endian):

    magic   4s  = b"NOCK"
    version u16 major, u16 minor
    hash    u64 config hash (first 8 bytes of sha256 of the canonical config)
    meta    u32 length + UTF-8 JSON (epoch, rng state, scaler kinds, ...)
    count   u32 number of arrays
    arrays  count x [u16 name length, name, u8 ndim, ndim x u64 shape, f64 data]
    crc     u32 CRC-32 of everything before it
"""

import hashlib
import json
import struct
import zlib

import numpy as np

from .errors import ChecksumError, ConfigMismatchError, DataFormatError, VersionError

MAGIC = b"NOCK"
MAJOR, MINOR = 1, 0

_HEAD = struct.Struct("<4sHHQ")


def config_hash(config: dict) -> int:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return int.from_bytes(hashlib.sha256(canon).digest()[:8], "big")


def save_checkpoint(path, meta: dict, arrays: dict, cfg_hash: int) -> None:
    chunks = [_HEAD.pack(MAGIC, MAJOR, MINOR, cfg_hash)]
    meta_json = json.dumps(meta, sort_keys=True).encode()
    chunks.append(struct.pack("<I", len(meta_json)))
    chunks.append(meta_json)
    chunks.append(struct.pack("<I", len(arrays)))
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype="<f8")
        nb = name.encode()
        chunks.append(struct.pack("<H", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b"")
        chunks.append(arr.tobytes())
    body = b"".join(chunks)
    with open(path, "wb") as f:
        f.write(body)
        f.write(struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))


def load_checkpoint(path, expect_hash: int | None = None):
    """Returns (meta, arrays, stored config hash)."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEAD.size + 12:
        raise DataFormatError("file too short to be a checkpoint")
    magic, major, minor, stored_hash = _HEAD.unpack_from(raw, 0)
    if magic != MAGIC:
        raise DataFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if major != MAJOR:
        raise VersionError(f"unsupported checkpoint major version {major}")
    (stored_crc,) = struct.unpack_from("<I", raw, len(raw) - 4)
    if zlib.crc32(raw[:-4]) & 0xFFFFFFFF != stored_crc:
        raise ChecksumError("CRC-32 mismatch: checkpoint is corrupted")
    if expect_hash is not None and stored_hash != expect_hash:
        raise ConfigMismatchError(
            f"checkpoint config hash {stored_hash:#x} does not match expected {expect_hash:#x}"
        )
    off = _HEAD.size
    (meta_len,) = struct.unpack_from("<I", raw, off)
    off += 4
    meta = json.loads(raw[off : off + meta_len].decode())
    off += meta_len
    (count,) = struct.unpack_from("<I", raw, off)
    off += 4
    arrays = {}
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", raw, off)
            off += 2
            name = raw[off : off + nlen].decode()
            off += nlen
            (ndim,) = struct.unpack_from("<B", raw, off)
            off += 1
            shape = struct.unpack_from(f"<{ndim}Q", raw, off) if ndim else ()
            off += 8 * ndim
            size = int(np.prod(shape)) if ndim else 1
            arrays[name] = (
                np.frombuffer(raw, dtype="<f8", count=size, offset=off)
                .reshape(shape)
                .copy()
            )
            off += 8 * size
    except (struct.error, ValueError) as e:
        raise DataFormatError(f"malformed array table: {e}") from None
    if off != len(raw) - 4:
        raise DataFormatError("trailing bytes after array table")
    return meta, arrays, stored_hash
