"""Framing of a web-link string for the screen-to-camera bit stream.

Layout, MSB first within every byte::

    0xAA preamble | length L (1..255) | L payload bytes | CRC-8(length + payload)

The preamble ``10101010`` doubles as a sync pattern. CRC-8 uses polynomial
0x07, initial value 0, no reflection and no final XOR.
"""

from __future__ import annotations

from typing import Sequence

from signage.errors import CrcMismatch, LengthOutOfRange, NoPreamble, NonPrintablePayload, PayloadTooLong

PREAMBLE = 0xAA
MAX_PAYLOAD = 255


def crc8(data: bytes | Sequence[int]) -> int:
    crc = 0
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = ((crc << 1) ^ 0x07) & 0xFF if crc & 0x80 else (crc << 1) & 0xFF
    return crc


def bytes_to_bits(data: bytes | Sequence[int]) -> list[int]:
    return [(byte >> (7 - i)) & 1 for byte in data for i in range(8)]


def bits_to_bytes(bits: Sequence[int]) -> bytes:
    if len(bits) % 8:
        raise ValueError("bit count must be a multiple of 8")
    out = bytearray()
    for k in range(0, len(bits), 8):
        value = 0
        for bit in bits[k : k + 8]:
            value = (value << 1) | (1 if bit else 0)
        out.append(value)
    return bytes(out)


def _encode_text(text: str) -> bytes:
    if any(not (0x20 <= ord(ch) <= 0x7E) for ch in text):
        raise NonPrintablePayload("payload must be printable 7-bit ASCII")
    data = text.encode("ascii")
    if not 1 <= len(data) <= MAX_PAYLOAD:
        raise PayloadTooLong(f"payload must be 1..{MAX_PAYLOAD} bytes, got {len(data)}")
    return data


def frame_payload(text: str) -> list[int]:
    data = _encode_text(text)
    body = bytes([len(data)]) + data
    return bytes_to_bits(bytes([PREAMBLE]) + body + bytes([crc8(body)]))


def deframe_payload(bits: Sequence[int]) -> str:
    """Locate the first byte-aligned preamble and return the validated payload.

    Trailing bits after the CRC must be zero padding; anything else means the
    length byte is inconsistent with the stream.
    """
    usable = len(bits) - len(bits) % 8
    data = bits_to_bytes(list(bits[:usable]))
    try:
        start = data.index(PREAMBLE)
    except ValueError:
        raise NoPreamble("no preamble found in bit stream") from None
    if start + 1 >= len(data):
        raise LengthOutOfRange("stream ends before the length byte")
    length = data[start + 1]
    end = start + 2 + length + 1
    if length == 0 or end > len(data):
        raise LengthOutOfRange(f"length byte {length} does not fit the stream")
    if any(data[end:]) or any(bits[usable:]):
        raise LengthOutOfRange(f"non-zero data after a frame of length {length}")
    body = data[start + 1 : end - 1]
    if crc8(body) != data[end - 1]:
        raise CrcMismatch(f"crc {data[end - 1]:#04x} does not match computed {crc8(body):#04x}")
    payload = body[1:]
    if any(not 0x20 <= b <= 0x7E for b in payload):
        raise NonPrintablePayload("decoded payload is not printable ASCII")
    return payload.decode("ascii")
