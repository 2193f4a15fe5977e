"""Binary field files.

Layout::

    b"CSCOPE1"                 7-byte magic
    uint32 little-endian       byte length of the JSON header
    header                     UTF-8 JSON
    payload                    little-endian float64, row-major over the grid
                               axes with vector components interleaved last

Floats in the header go through ``repr`` so a write/read cycle is exact.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .grid import Grid, ScalarField, VectorField

MAGIC = b"CSCOPE1"
ENCODING = "float64-le"


class FieldFileError(IOError):
    pass


def encode_field(fld) -> bytes:
    grid = fld.grid
    ncomp = fld.ncomp
    header = grid.to_header()
    header.update({"components": ncomp, "time": float(fld.time), "encoding": ENCODING})
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    if ncomp == 1 and isinstance(fld, ScalarField):
        payload = fld.values
    else:
        payload = np.moveaxis(fld.values, 0, -1)
    payload = np.ascontiguousarray(payload, dtype="<f8").tobytes()
    return MAGIC + struct.pack("<I", len(raw)) + raw + payload


def decode_field(buf: bytes):
    if len(buf) < len(MAGIC) + 4 or buf[:len(MAGIC)] != MAGIC:
        raise FieldFileError("bad magic: not a CSCOPE1 field file")
    (hlen,) = struct.unpack_from("<I", buf, len(MAGIC))
    start = len(MAGIC) + 4
    if start + hlen > len(buf):
        raise FieldFileError("truncated header")
    try:
        header = json.loads(buf[start:start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FieldFileError(f"malformed header: {exc}") from exc
    if header.get("encoding") != ENCODING:
        raise FieldFileError(f"unsupported payload encoding {header.get('encoding')!r}")
    try:
        grid = Grid(
            origin=tuple(float(v) for v in header["origin"]),
            extent=tuple(float(v) for v in header["extent"]),
            resolution=tuple(int(v) for v in header["resolution"]),
            periodic=tuple(bool(v) for v in header["periodic"]),
        )
        ncomp = int(header["components"])
        time = float(header["time"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FieldFileError(f"invalid header: {exc}") from exc
    if header.get("dim") != grid.dim:
        raise FieldFileError("header dim disagrees with resolution")
    payload = buf[start + hlen:]
    expected = ncomp * int(np.prod(grid.resolution)) * 8
    if len(payload) != expected:
        raise FieldFileError(
            f"payload size mismatch: header implies {expected} bytes, found {len(payload)}")
    data = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    if ncomp == 1:
        return ScalarField(grid, data.reshape(grid.shape), time)
    values = np.moveaxis(data.reshape(grid.shape + (ncomp,)), -1, 0)
    return VectorField(grid, values, time)


def write_field(fld, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_field(fld))


def read_field(path):
    with open(path, "rb") as fh:
        return decode_field(fh.read())
