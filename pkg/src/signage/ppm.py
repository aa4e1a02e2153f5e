"""Binary PPM (P6, maxval 255) reading and writing."""

from __future__ import annotations

import os

import numpy as np

from signage.codec import Frame
from signage.errors import MalformedHeader, UnsupportedFormat


def _tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens: list[bytes] = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace() and data[i : i + 1] != b"#":
            i += 1
        if start == i:
            raise MalformedHeader("truncated PPM header")
        tokens.append(data[start:i])
    return tokens, i


def decode_ppm(data: bytes) -> Frame:
    magic = data[:2]
    if magic in (b"P1", b"P2", b"P3", b"P4", b"P5"):
        raise UnsupportedFormat(f"only binary P6 is supported, got {magic.decode()}")
    if magic != b"P6":
        raise MalformedHeader("missing P6 magic number")
    (w, h, maxval), end = _tokens(data[2:], 3)
    try:
        width, height, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise MalformedHeader("non-numeric PPM header field") from None
    if maxval != 255:
        raise UnsupportedFormat(f"only maxval 255 is supported, got {maxval}")
    if width < 1 or height < 1:
        raise MalformedHeader("image dimensions must be positive")
    offset = 2 + end
    if offset >= len(data) or not data[offset : offset + 1].isspace():
        raise MalformedHeader("header must end with a single whitespace byte")
    pixels = data[offset + 1 :]
    size = width * height * 3
    if len(pixels) < size:
        raise MalformedHeader(f"expected {size} pixel bytes, found {len(pixels)}")
    arr = np.frombuffer(pixels[:size], dtype=np.uint8).reshape(height, width, 3)
    return Frame(arr.copy())


def encode_ppm(frame: Frame) -> bytes:
    return b"P6\n%d %d\n255\n" % (frame.width, frame.height) + frame.tobytes()


def load_frame_ppm(path: str | os.PathLike) -> Frame:
    with open(path, "rb") as fh:
        return decode_ppm(fh.read())


def store_frame_ppm(frame: Frame, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_ppm(frame))
