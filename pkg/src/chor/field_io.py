"""On-disk formats: CHOR binary field files and P5 PGM masks.

CHOR layout (little-endian):
    bytes 0:4    magic b"CHOR"
    u32          version (1)
    u32          kind: 0 = scalar field, 1 = 24-channel weight field
    u32 x3       resolution (nx, ny, nz)
    f32 x3       region center (meters)
    f32          half extent (meters)
    f32 payload  cell values, x fastest, then y, then z;
                 kind 1 stores the 24 channels contiguously per cell.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .grid import GridSpec

MAGIC = b"CHOR"
VERSION = 1
KIND_SCALAR = 0
KIND_WEIGHT24 = 1
_HEADER = struct.Struct("<4sIIIIIffff")


class ChorFormatError(ValueError):
    pass


def write_chor(path, spec: GridSpec, values: np.ndarray, kind: int) -> None:
    """values: (nx, ny, nz) for scalar, (nx, ny, nz, 24) for weights."""
    nx, ny, nz = spec.resolution
    if kind == KIND_SCALAR:
        if values.shape != (nx, ny, nz):
            raise ChorFormatError(f"scalar field shape {values.shape} != grid {spec.resolution}")
        flat = spec.flatten(values)
    elif kind == KIND_WEIGHT24:
        if values.shape != (nx, ny, nz, 24):
            raise ChorFormatError(f"weight field shape {values.shape} != grid {spec.resolution} x 24")
        flat = spec.flatten(values)
    else:
        raise ChorFormatError(f"unknown field kind {kind}")
    header = _HEADER.pack(
        MAGIC, VERSION, kind, nx, ny, nz,
        spec.center[0], spec.center[1], spec.center[2], spec.half_extent,
    )
    payload = np.ascontiguousarray(flat, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_chor(path) -> tuple[GridSpec, int, np.ndarray]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ChorFormatError(f"{path}: truncated header")
    magic, version, kind, nx, ny, nz, cx, cy, cz, he = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise ChorFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ChorFormatError(f"{path}: unsupported version {version}")
    if kind not in (KIND_SCALAR, KIND_WEIGHT24):
        raise ChorFormatError(f"{path}: unknown kind {kind}")
    spec = GridSpec(resolution=(nx, ny, nz), center=(cx, cy, cz), half_extent=he)
    channels = 24 if kind == KIND_WEIGHT24 else 1
    expected = nx * ny * nz * channels * 4
    body = raw[_HEADER.size:]
    if len(body) != expected:
        raise ChorFormatError(f"{path}: payload is {len(body)} bytes, expected {expected}")
    flat = np.frombuffer(body, dtype="<f4").astype(np.float64)
    if kind == KIND_WEIGHT24:
        flat = flat.reshape(-1, 24)
    values = spec.unflatten(flat)
    return spec, kind, values


def write_sidecar(path, meta: dict) -> None:
    Path(str(path) + ".meta.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n"
    )


def read_sidecar(path) -> dict | None:
    p = Path(str(path) + ".meta.json")
    if not p.exists():
        return None
    return json.loads(p.read_text())


def write_pgm(path, mask: np.ndarray) -> None:
    """Binary P5, 255 = inside, 0 = outside."""
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ValueError(f"mask must be 2D, got shape {m.shape}")
    data = np.where(m.astype(bool), np.uint8(255), np.uint8(0))
    h, w = data.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + data.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if not raw.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM")
    # header = magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments allowed between them
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise ValueError(f"{path}: expected maxval 255, got {maxval}")
    data = np.frombuffer(raw, dtype=np.uint8, count=w * h, offset=pos)
    if data.size != w * h:
        raise ValueError(f"{path}: truncated pixel data")
    return data.reshape(h, w) >= 128
