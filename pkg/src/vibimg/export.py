"""Image files: binary PGM for single-channel grayscale, VIMG for raw tensors.

VIMG layout (little-endian)::

    b"VIMG" | u32 version | u32 channels | u32 side | channels*side*side f32
"""

from __future__ import annotations

import struct

import numpy as np

from .encoders import EncodedImage, quantize, to_unit_range

VIMG_MAGIC = b"VIMG"
VIMG_VERSION = 1
_VIMG_HEADER = struct.Struct("<4sIII")


def pgm_bytes(image: EncodedImage) -> bytes:
    if image.channels != 1:
        raise ValueError("PGM holds a single channel; use VIMG for multi-channel images")
    levels = quantize(to_unit_range(image.data[0], image.method))
    h, w = levels.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + levels.tobytes()


def parse_pgm(buf: bytes) -> np.ndarray:
    """Read a binary (P5, maxval 255) PGM into a uint8 array."""
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if buf[pos : pos + 1] == b"#":
            pos = buf.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos : pos + 1].isspace():
            pos += 1
        fields.append(buf[start:pos])
    if fields[0] != b"P5" or int(fields[3]) != 255:
        raise ValueError("not an 8-bit binary PGM")
    w, h = int(fields[1]), int(fields[2])
    pixels = np.frombuffer(buf, dtype=np.uint8, count=w * h, offset=pos + 1)
    return pixels.reshape(h, w)


def vimg_bytes(image: EncodedImage) -> bytes:
    c, m, _ = image.data.shape
    return _VIMG_HEADER.pack(VIMG_MAGIC, VIMG_VERSION, c, m) + image.data.astype("<f4").tobytes()


def parse_vimg(buf: bytes) -> np.ndarray:
    if len(buf) < _VIMG_HEADER.size:
        raise ValueError("truncated VIMG header")
    magic, version, c, m = _VIMG_HEADER.unpack_from(buf)
    if magic != VIMG_MAGIC:
        raise ValueError("not a VIMG file")
    if version != VIMG_VERSION:
        raise ValueError(f"unsupported VIMG version {version}")
    n = c * m * m
    if len(buf) != _VIMG_HEADER.size + 4 * n:
        raise ValueError("VIMG payload size does not match header")
    return np.frombuffer(buf, dtype="<f4", offset=_VIMG_HEADER.size).reshape(c, m, m)


def image_bytes(image: EncodedImage) -> tuple[bytes, str]:
    """Serialized image and its file suffix: PGM when single-channel, VIMG otherwise."""
    if image.channels == 1:
        return pgm_bytes(image), ".pgm"
    return vimg_bytes(image), ".vimg"
