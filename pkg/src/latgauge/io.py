"""On-disk formats: binary checkpoints, boundary fields, loops and CSV tables.

Binary layout (all little-endian)::

    checkpoint header  "<4sI I I B3x I d Q 6Q d"
        magic b"LGCK", version, d, L, family code, N, beta, sweep index,
        six PCG64 state words, Metropolis proposal scale
    payload            link matrices in edge order, each row-major, as
                       float64 (real, imag) pairs (real entries only for SO)

    boundary header    "<4sI I I I"  magic b"LGBF", version, m, L, N
    sections           b"A\\0\\0\\0" + payload, then b"B\\0\\0\\0" + payload,
                       payload ordered by (slice vertex, direction)
"""
from __future__ import annotations

import csv
import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .groups import Family, GroupSpec
from .lattice import Loop, get_lattice
from .seeding import rng_from_words, rng_state_words
from .sigma import BoundaryFields
from .ym import GaugeField, YMParams

CHECKPOINT_MAGIC = b"LGCK"
BOUNDARY_MAGIC = b"LGBF"
FORMAT_VERSION = 1
_CK_HEADER = struct.Struct("<4sIIIB3xIdQ6Qd")
_BF_HEADER = struct.Struct("<4sIIII")
_FAMILY_CODE = {Family.U: 0, Family.SU: 1, Family.SO: 2}
_CODE_FAMILY = {v: k for k, v in _FAMILY_CODE.items()}


class FormatError(ValueError):
    pass


def matrices_to_bytes(mats: np.ndarray, is_complex: bool) -> bytes:
    mats = np.ascontiguousarray(mats)
    if is_complex:
        flat = np.ascontiguousarray(mats, dtype=np.complex128).view(np.float64)
    else:
        flat = np.ascontiguousarray(mats.real, dtype=np.float64)
    return flat.astype("<f8").tobytes()


def matrices_from_bytes(buf: bytes, count: int, n: int, is_complex: bool) -> np.ndarray:
    per = n * n * (2 if is_complex else 1)
    arr = np.frombuffer(buf, dtype="<f8", count=count * per).astype(np.float64)
    if is_complex:
        return arr.view(np.complex128).reshape(count, n, n).copy()
    return arr.reshape(count, n, n).astype(np.complex128)


@dataclass
class Checkpoint:
    field: GaugeField
    params: YMParams
    sweep: int
    rng: np.random.Generator
    proposal_scale: float


def save_checkpoint(path, field: GaugeField, params: YMParams, sweep: int, rng: np.random.Generator,
                    proposal_scale: float = 0.5) -> None:
    lat, spec = field.lattice, field.spec
    header = _CK_HEADER.pack(CHECKPOINT_MAGIC, FORMAT_VERSION, lat.d, lat.L, _FAMILY_CODE[spec.family], spec.n,
                             float(params.beta), int(sweep), *rng_state_words(rng), float(proposal_scale))
    Path(path).write_bytes(header + matrices_to_bytes(field.values, spec.is_complex))


def load_checkpoint(path) -> Checkpoint:
    data = Path(path).read_bytes()
    if len(data) < _CK_HEADER.size:
        raise FormatError("truncated checkpoint header")
    magic, version, d, L, code, n, beta, sweep, *rest = _CK_HEADER.unpack_from(data)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    words, scale = rest[:6], rest[6]
    spec = GroupSpec(_CODE_FAMILY[code], n)
    lat = get_lattice(d, L)
    expected = _CK_HEADER.size + lat.n_edges * n * n * 8 * (2 if spec.is_complex else 1)
    if len(data) != expected:
        raise FormatError(f"payload size {len(data)} != {expected}")
    vals = matrices_from_bytes(data[_CK_HEADER.size:], lat.n_edges, n, spec.is_complex)
    params = YMParams(spec, beta, lat)
    return Checkpoint(GaugeField(lat, spec, vals), params, sweep, rng_from_words(words), scale)


def save_boundary(path, bc: BoundaryFields) -> None:
    sl = bc.slice
    parts = [_BF_HEADER.pack(BOUNDARY_MAGIC, FORMAT_VERSION, sl.d, sl.L, bc.n)]
    for tag, arr in ((b"A\0\0\0", bc.A), (b"B\0\0\0", bc.B)):
        parts += [tag, matrices_to_bytes(arr.reshape(-1, bc.n, bc.n), True)]
    Path(path).write_bytes(b"".join(parts))


def load_boundary(path, label: str = "") -> BoundaryFields:
    data = Path(path).read_bytes()
    magic, version, m, L, n = _BF_HEADER.unpack_from(data)
    if magic != BOUNDARY_MAGIC or version != FORMAT_VERSION:
        raise FormatError("not a boundary-field file")
    sl = get_lattice(m, L)
    count = sl.n_vertices * m
    size = count * n * n * 16
    pos = _BF_HEADER.size
    arrays = {}
    for tag in (b"A\0\0\0", b"B\0\0\0"):
        if data[pos:pos + 4] != tag:
            raise FormatError(f"missing section {tag[:1].decode()}")
        pos += 4
        arrays[tag[:1]] = matrices_from_bytes(data[pos:pos + size], count, n, True).reshape(sl.n_vertices, m, n, n)
        pos += size
    if pos != len(data):
        raise FormatError("trailing bytes after boundary sections")
    return BoundaryFields(sl, arrays[b"A"], arrays[b"B"], label)


def loop_to_json(loop: Loop) -> str:
    return json.dumps(loop.to_json())


def loop_from_json(text: str, L: int) -> Loop:
    return Loop.from_json(json.loads(text), L)


# --- text output -----------------------------------------------------------------


def fmt(value) -> str:
    """17 significant digits for floats, so text round-trips are exact."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    return str(value)


def write_csv(path, header, rows) -> str:
    """Write a CSV table and return its SHA-256."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return file_sha256(path)


def trace_rows(trace, component: int = 0):
    """Rows (sweep, chain, re, im) of one observable component of a chain trace."""
    vals = trace.values[:, :, component]
    for c in range(vals.shape[0]):
        for s, v in zip(trace.sweeps, vals[c]):
            yield (int(s), c, float(v.real), float(v.imag))


TRACE_HEADER = ("sweep", "chain", "re", "im")
COV_HEADER = ("boundary_id", "x", "y", "distance", "i1", "j1", "i2", "j2", "re_cov", "im_cov", "stderr")


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    raise TypeError(f"cannot serialize {type(o).__name__}")


def write_json(path, obj) -> None:
    text = json.dumps(obj, default=_json_default, indent=2, sort_keys=True)
    Path(path).write_text(text + "\n")
