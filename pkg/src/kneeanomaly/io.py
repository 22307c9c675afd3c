"""MetaImage-style volume files.

A text header of ``key = value`` lines followed by a raw little-endian
payload, either in a sibling file (``.mhd`` + ``.raw``) or appended after the
header (``ElementDataFile = LOCAL``, usually ``.mha``). Header vectors are in
``x y z`` order; the payload is x-fastest, so it maps directly onto a C-order
``(z, y, x)`` array.
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .volume import LabelMap, Volume

_ELEMENT_TYPES = {
    "FLOAT32": np.dtype("<f4"),
    "MET_FLOAT": np.dtype("<f4"),
    "UINT8": np.dtype("u1"),
    "MET_UCHAR": np.dtype("u1"),
}


class MetaImageError(ValueError):
    pass


def _parse_header(lines):
    header = {}
    for line in lines:
        line = line.strip()
        if not line:
            continue
        if "=" not in line:
            raise MetaImageError(f"malformed header line: {line!r}")
        key, value = line.split("=", 1)
        header[key.strip()] = value.strip()
    return header


def _vector(header, key, default=None, cast=float):
    if key not in header:
        if default is None:
            raise MetaImageError(f"header is missing {key}")
        return default
    try:
        values = [cast(v) for v in header[key].split()]
    except ValueError as exc:
        raise MetaImageError(f"cannot parse {key} = {header[key]!r}") from exc
    if len(values) != 3:
        raise MetaImageError(f"{key} must have 3 components, got {len(values)}")
    return values


def read_volume(path, num_classes: int = 10) -> Volume | LabelMap:
    """Read a volume; FLOAT32 files give a Volume, UINT8 files a LabelMap."""
    path = Path(path)
    raw = path.read_bytes()
    # A LOCAL payload starts right after the ElementDataFile line.
    marker = b"ElementDataFile"
    pos = raw.find(marker)
    if pos < 0:
        raise MetaImageError(f"{path}: header is missing ElementDataFile")
    eol = raw.find(b"\n", pos)
    if eol < 0:
        eol = len(raw)
    try:
        header = _parse_header(raw[: eol + 1].decode("ascii").splitlines())
    except UnicodeDecodeError as exc:
        raise MetaImageError(f"{path}: header is not ASCII text") from exc

    if header.get("NDims", "3") != "3":
        raise MetaImageError(f"{path}: only NDims = 3 is supported")
    if header.get("BinaryDataByteOrderMSB", "False").lower() == "true":
        raise MetaImageError(f"{path}: big-endian payloads are not supported")
    if header.get("CompressedData", "False").lower() == "true":
        raise MetaImageError(f"{path}: compressed payloads are not supported")
    etype = header.get("ElementType")
    if etype not in _ELEMENT_TYPES:
        raise MetaImageError(f"{path}: unsupported element type {etype!r}")
    dtype = _ELEMENT_TYPES[etype]

    nx, ny, nz = _vector(header, "DimSize", cast=int)
    if min(nx, ny, nz) < 1:
        raise MetaImageError(f"{path}: DimSize must be positive")
    sx, sy, sz = _vector(header, "ElementSpacing", default=[1.0, 1.0, 1.0])
    ox, oy, oz = _vector(header, "Offset", default=[0.0, 0.0, 0.0])

    data_file = header["ElementDataFile"]
    if data_file == "LOCAL":
        payload = raw[eol + 1 :]
    else:
        payload = (path.parent / data_file).read_bytes()
    expected = nx * ny * nz * dtype.itemsize
    if len(payload) != expected:
        raise MetaImageError(
            f"{path}: payload size mismatch, header declares {nx * ny * nz} voxels "
            f"({expected} bytes) but payload has {len(payload)} bytes"
        )
    a = np.frombuffer(payload, dtype=dtype).reshape(nz, ny, nx)
    spacing, origin = (sz, sy, sx), (oz, oy, ox)
    if dtype.kind == "f":
        return Volume(spacing, origin, values=a.astype(np.float64))
    return LabelMap(spacing, origin, labels=a.copy(), num_classes=num_classes)


def _fmt(values):
    return " ".join(repr(float(v)) for v in values)


def write_volume(v: Volume | LabelMap, path) -> None:
    """Write ``v``. ``.mha`` paths get an inline payload, anything else a ``.raw`` sibling."""
    path = Path(path)
    if isinstance(v, LabelMap):
        etype, payload = "UINT8", v.labels.astype("u1")
    elif isinstance(v, Volume):
        etype, payload = "FLOAT32", v.values.astype("<f4")
    else:
        raise TypeError(f"cannot write object of type {type(v).__name__}")
    nz, ny, nx = v.dims
    sz, sy, sx = v.spacing
    oz, oy, ox = v.origin
    local = path.suffix.lower() == ".mha"
    raw_path = path.with_suffix(".raw")
    lines = [
        "ObjectType = Image",
        "NDims = 3",
        "BinaryData = True",
        "BinaryDataByteOrderMSB = False",
        f"DimSize = {nx} {ny} {nz}",
        f"ElementSpacing = {_fmt((sx, sy, sz))}",
        f"Offset = {_fmt((ox, oy, oz))}",
        f"ElementType = {etype}",
        f"ElementDataFile = {'LOCAL' if local else raw_path.name}",
    ]
    header = ("\n".join(lines) + "\n").encode("ascii")
    data = np.ascontiguousarray(payload).tobytes()
    path.parent.mkdir(parents=True, exist_ok=True)
    if local:
        _atomic_write(path, header + data)
    else:
        _atomic_write(raw_path, data)
        _atomic_write(path, header)


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
