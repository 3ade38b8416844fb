"""Discrete one-dimensional torus and occupation configurations.

Energy configurations are float64 arrays, particle configurations int64
arrays.  Both serialize to CSV ``site,value`` rows and to a small binary
snapshot::

    offset  size  field
    0       4     magic b"GSPN"
    4       1     format version (1)
    5       1     kind: 0 = energy (float64), 1 = particle (int64)
    6       2     reserved, zero
    8       8     N, unsigned little-endian
    16      8*N   payload, little-endian
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass

import numpy as np

ENERGY = "energy"
PARTICLE = "particle"

_MAGIC = b"GSPN"
_VERSION = 1
_HEADER = struct.Struct("<4sBBHQ")
_KIND_CODES = {ENERGY: 0, PARTICLE: 1}
_KIND_DTYPES = {ENERGY: np.dtype("<f8"), PARTICLE: np.dtype("<i8")}


@dataclass(frozen=True)
class Torus:
    N: int

    def __post_init__(self) -> None:
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"torus needs N >= 2 sites, got {self.N!r}")

    def neighbor(self, x: int, dir: int) -> int:
        return neighbor(self, x, dir)

    @property
    def positions(self) -> np.ndarray:
        """Macroscopic positions x/N of the sites."""
        return np.arange(self.N) / self.N


def neighbor(torus: Torus, x: int, dir: int) -> int:
    if dir not in (1, -1):
        raise ValueError("dir must be +1 or -1")
    if not 0 <= x < torus.N:
        raise ValueError(f"site {x} outside 0..{torus.N - 1}")
    return (x + dir) % torus.N


def energy_config(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("configuration must be a 1-D array with at least 2 sites")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError("energy configuration entries must be finite and >= 0")
    return arr


def particle_config(values) -> np.ndarray:
    raw = np.asarray(values)
    arr = raw.astype(np.int64)
    if raw.dtype.kind == "f" and not np.array_equal(arr, raw):
        raise ValueError("particle configuration entries must be integers")
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("configuration must be a 1-D array with at least 2 sites")
    if np.any(arr < 0):
        raise ValueError("particle configuration entries must be >= 0")
    return arr


def config_kind(config: np.ndarray) -> str:
    return PARTICLE if np.issubdtype(np.asarray(config).dtype, np.integer) else ENERGY


def total_mass(config):
    arr = np.asarray(config)
    if np.issubdtype(arr.dtype, np.integer):
        return int(arr.sum())
    return float(np.sum(arr))


def discrete_laplacian(config, x: int, N: int | None = None) -> float:
    """N**2 (eta[x+1] + eta[x-1] - 2 eta[x]) with periodic wrap."""
    arr = np.asarray(config)
    n = arr.size if N is None else N
    return float(n * n * (arr[(x + 1) % n] + arr[(x - 1) % n] - 2 * arr[x]))


def laplacian_all(config, N: int | None = None) -> np.ndarray:
    arr = np.asarray(config, dtype=float)
    n = arr.size if N is None else N
    return n * n * (np.roll(arr, -1) + np.roll(arr, 1) - 2.0 * arr)


# ---------------------------------------------------------------------------
# serialization


def to_csv(config, stream=None) -> str:
    arr = np.asarray(config)
    buf = io.StringIO() if stream is None else stream
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["site", "value"])
    is_int = np.issubdtype(arr.dtype, np.integer)
    for x, v in enumerate(arr.tolist()):
        writer.writerow([x, int(v) if is_int else repr(float(v))])
    return buf.getvalue() if stream is None else ""


def from_csv(text: str) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["site", "value"]:
        raise ValueError("missing 'site,value' header")
    body = rows[1:]
    sites = [int(r[0]) for r in body]
    if sites != list(range(len(body))):
        raise ValueError("sites must be listed in order 0..N-1")
    raw = [r[1] for r in body]
    if all(v.lstrip("-").isdigit() for v in raw):
        return particle_config([int(v) for v in raw])
    return energy_config([float(v) for v in raw])


def to_snapshot(config) -> bytes:
    arr = np.asarray(config)
    kind = config_kind(arr)
    payload = arr.astype(_KIND_DTYPES[kind]).tobytes()
    return _HEADER.pack(_MAGIC, _VERSION, _KIND_CODES[kind], 0, arr.size) + payload


def from_snapshot(data: bytes) -> np.ndarray:
    if len(data) < _HEADER.size:
        raise ValueError("snapshot too short")
    magic, version, kind_code, _, n = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise ValueError("bad snapshot magic")
    if version != _VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    kinds = {v: k for k, v in _KIND_CODES.items()}
    if kind_code not in kinds:
        raise ValueError(f"unknown snapshot kind {kind_code}")
    dtype = _KIND_DTYPES[kinds[kind_code]]
    expected = _HEADER.size + n * dtype.itemsize
    if len(data) != expected:
        raise ValueError(f"snapshot length {len(data)} != expected {expected}")
    arr = np.frombuffer(data, dtype=dtype, offset=_HEADER.size, count=n)
    return arr.astype(np.float64 if kind_code == 0 else np.int64)
