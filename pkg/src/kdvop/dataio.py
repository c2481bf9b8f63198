"""Binary dataset files: magic "KDVD", versioned header, CRC-32 trailer.

Layout (little-endian):

    magic     4s   = b"KDVD"
    version   u16 major, u16 minor
    n         u64  number of samples
    nt_record u32
    nx        u32
    period    f64
    dt_record f64
    eta       f64
    gamma     f64
    seed      u64  master seed
    samples   n x [k1 k2 d1 d2 (f64), split tag (u8), (nt_record+1)*nx f64]
    crc       u32  CRC-32 of the samples section

Writes are bit-deterministic for equal dataset contents.
"""

import struct
import warnings
import zlib

import numpy as np

from .errors import ChecksumError, DataFormatError, VersionError
from .kdv import Dataset, GridSpec, PdeParams, SolitonParams, Trajectory

MAGIC = b"KDVD"
MAJOR, MINOR = 1, 0

_HEADER = struct.Struct("<4sHHQIIddddQ")
_SAMPLE_HEAD = struct.Struct("<ddddB")


def save_dataset(dataset: Dataset, path) -> None:
    grid = dataset.grid
    crc = 0
    with open(path, "wb") as f:
        f.write(
            _HEADER.pack(
                MAGIC,
                MAJOR,
                MINOR,
                len(dataset),
                grid.nt_record,
                grid.nx,
                grid.period,
                grid.dt_record,
                dataset.pde.eta,
                dataset.pde.gamma,
                dataset.master_seed,
            )
        )
        for traj, tag in zip(dataset.trajectories, dataset.splits):
            p = traj.params
            head = _SAMPLE_HEAD.pack(p.k1, p.k2, p.d1, p.d2, int(tag))
            body = np.ascontiguousarray(traj.u, dtype="<f8").tobytes()
            crc = zlib.crc32(body, zlib.crc32(head, crc))
            f.write(head)
            f.write(body)
        f.write(struct.pack("<I", crc & 0xFFFFFFFF))


def load_dataset(path) -> Dataset:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size + 4:
        raise DataFormatError("file too short to be a dataset")
    magic, major, minor, n, nt, nx, period, dt, eta, gamma, seed = _HEADER.unpack_from(
        raw, 0
    )
    if magic != MAGIC:
        raise DataFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if major != MAJOR:
        raise VersionError(f"unsupported major version {major} (reader supports {MAJOR})")
    if minor != MINOR:
        warnings.warn(
            f"dataset minor version {minor} differs from writer version {MINOR}; "
            "loading anyway",
            stacklevel=2,
        )
    sample_bytes = _SAMPLE_HEAD.size + (nt + 1) * nx * 8
    expect = _HEADER.size + n * sample_bytes + 4
    if len(raw) != expect:
        raise DataFormatError(f"truncated or oversized file: {len(raw)} bytes, expected {expect}")
    payload = raw[_HEADER.size : -4]
    (stored_crc,) = struct.unpack_from("<I", raw, len(raw) - 4)
    if zlib.crc32(payload) & 0xFFFFFFFF != stored_crc:
        raise ChecksumError("CRC-32 mismatch: file is corrupted")

    grid = GridSpec(period=period, nx=nx, dt_record=dt, nt_record=nt)
    pde = PdeParams(eta=eta, gamma=gamma)
    trajs = []
    tags = np.empty(n, dtype=np.uint8)
    off = 0
    for i in range(n):
        k1, k2, d1, d2, tag = _SAMPLE_HEAD.unpack_from(payload, off)
        off += _SAMPLE_HEAD.size
        u = np.frombuffer(payload, dtype="<f8", count=(nt + 1) * nx, offset=off)
        off += (nt + 1) * nx * 8
        trajs.append(
            Trajectory(
                u=u.reshape(nt + 1, nx).copy(),
                grid=grid,
                params=SolitonParams(k1=k1, k2=k2, d1=d1, d2=d2),
            )
        )
        tags[i] = tag
    return Dataset(trajectories=trajs, pde=pde, master_seed=seed, splits=tags, grid=grid)
