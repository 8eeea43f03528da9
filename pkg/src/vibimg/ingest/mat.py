"""Reader for the numeric subset of MAT-file level 5 containers.

Only top-level double-class numeric matrices are returned. Compressed
(deflate) elements are inflated transparently. Cell arrays, structs,
character arrays, sparse and non-double matrices are skipped with a
warning.
"""

from __future__ import annotations

import struct
import warnings
import zlib
from dataclasses import dataclass

import numpy as np

HEADER_SIZE = 128

MI_INT8 = 1
MI_UINT8 = 2
MI_INT16 = 3
MI_UINT16 = 4
MI_INT32 = 5
MI_UINT32 = 6
MI_SINGLE = 7
MI_DOUBLE = 9
MI_INT64 = 12
MI_UINT64 = 13
MI_MATRIX = 14
MI_COMPRESSED = 15
MI_UTF8 = 16

MX_DOUBLE_CLASS = 6

_NUMERIC = {
    MI_INT8: "i1",
    MI_UINT8: "u1",
    MI_INT16: "i2",
    MI_UINT16: "u2",
    MI_INT32: "i4",
    MI_UINT32: "u4",
    MI_SINGLE: "f4",
    MI_DOUBLE: "f8",
    MI_INT64: "i8",
    MI_UINT64: "u8",
}

_FLAG_COMPLEX = 0x0800


class MatFormatError(ValueError):
    pass


@dataclass(frozen=True)
class MatVariable:
    name: str
    dims: tuple[int, ...]
    data: np.ndarray  # float64, column-major element order

    def __post_init__(self):
        if int(np.prod(self.dims)) != self.data.size:
            raise MatFormatError(f"variable {self.name!r}: dims {self.dims} do not match {self.data.size} elements")

    def as_vector(self) -> np.ndarray:
        return self.data


def read_mat(buf: bytes) -> list[MatVariable]:
    if len(buf) < HEADER_SIZE:
        raise MatFormatError("unsupported container: shorter than the 128-byte header")
    indicator = buf[126:128]
    if indicator == b"IM":
        order = "<"
    elif indicator == b"MI":
        order = ">"
    else:
        raise MatFormatError("unsupported container: bad endian indicator")
    (version,) = struct.unpack(order + "H", buf[124:126])
    if version != 0x0100:
        raise MatFormatError(f"unsupported container: version 0x{version:04x}")

    out = []
    pos = HEADER_SIZE
    while pos < len(buf):
        dtype, payload, pos = _next_element(buf, pos, order)
        if dtype == MI_COMPRESSED:
            try:
                inner = zlib.decompress(payload)
            except zlib.error as exc:
                raise MatFormatError(f"corrupt file: bad compressed element ({exc})") from None
            dtype, payload, _ = _next_element(inner, 0, order)
        if dtype != MI_MATRIX:
            warnings.warn(f"skipping top-level element of type {dtype}", stacklevel=2)
            continue
        var = _parse_matrix(payload, order)
        if var is not None:
            out.append(var)
    return out


def _next_element(buf, pos, order):
    """Return ``(type, payload, next_pos)`` for the element tag at ``pos``."""
    if pos + 8 > len(buf):
        raise MatFormatError("corrupt file: truncated element tag")
    (word,) = struct.unpack_from(order + "I", buf, pos)
    if word >> 16:
        # small data element: 2-byte size, 2-byte type, data in the next 4 bytes
        dtype = word & 0xFFFF
        nbytes = word >> 16
        if nbytes > 4:
            raise MatFormatError("corrupt file: oversized small element")
        return dtype, bytes(buf[pos + 4 : pos + 4 + nbytes]), pos + 8
    dtype, nbytes = struct.unpack_from(order + "II", buf, pos)
    start = pos + 8
    end = start + nbytes
    if end > len(buf):
        raise MatFormatError("corrupt file: truncated element")
    if dtype == MI_COMPRESSED:
        # compressed payloads are not padded
        return dtype, bytes(buf[start:end]), end
    return dtype, bytes(buf[start:end]), start + ((nbytes + 7) // 8) * 8


def _numeric(dtype, payload, order):
    try:
        code = _NUMERIC[dtype]
    except KeyError:
        raise MatFormatError(f"corrupt file: non-numeric data type {dtype}") from None
    dt = np.dtype(order + code)
    if len(payload) % dt.itemsize:
        raise MatFormatError("corrupt file: data length not a multiple of its element size")
    return np.frombuffer(payload, dtype=dt)


def _parse_matrix(payload, order):
    if not payload:
        # empty placeholder matrix
        return None
    pos = 0
    dtype, flags_raw, pos = _next_element(payload, pos, order)
    flags = _numeric(dtype, flags_raw, order)
    if flags.size < 1:
        raise MatFormatError("corrupt file: missing array flags")
    word = int(flags[0])
    mx_class = word & 0xFF

    dtype, dims_raw, pos = _next_element(payload, pos, order)
    dims = tuple(int(d) for d in _numeric(dtype, dims_raw, order))
    dtype, name_raw, pos = _next_element(payload, pos, order)
    name = name_raw.decode("latin-1")

    if mx_class != MX_DOUBLE_CLASS:
        warnings.warn(f"skipping {name!r}: unsupported matrix class {mx_class}", stacklevel=3)
        return None
    if word & _FLAG_COMPLEX:
        warnings.warn(f"skipping {name!r}: complex data", stacklevel=3)
        return None

    dtype, real_raw, pos = _next_element(payload, pos, order)
    data = _numeric(dtype, real_raw, order).astype(np.float64)
    if int(np.prod(dims)) != data.size:
        raise MatFormatError(f"corrupt file: {name!r} has dims {dims} but {data.size} values")
    data.setflags(write=False)
    return MatVariable(name, dims, data)


def drive_end_variables(variables):
    """Variables holding drive-end accelerometer traces (``*_DE_time``)."""
    return [v for v in variables if v.name.endswith("_DE_time")]
