"""Byte-level codecs: character stuffing, CRC-32 and integer-vector packing.

These are the primitives the exercises and the mini transport protocol are
built on. Stuffing follows the PPP/HDLC convention (FLAG 0x7E, ESC 0x7D,
escaped byte XOR 0x20). The CRC is the IEEE 802.3 variant: polynomial
0x04C11DB7, reflected input/output, init and final XOR 0xFFFFFFFF.
"""

from __future__ import annotations

import struct

FLAG = 0x7E
ESC = 0x7D
ESC_XOR = 0x20

MAX_PAYLOAD = 1 << 16


class PayloadTooLargeError(ValueError):
    pass


class MalformedFrameError(ValueError):
    """Bad stuffed frame; `offset` is the byte position of the defect."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class VectorLengthError(ValueError):
    pass


def stuff(payload: bytes) -> bytes:
    """Frame `payload` between FLAG bytes, escaping in-payload FLAG/ESC."""
    if len(payload) > MAX_PAYLOAD:
        raise PayloadTooLargeError(
            f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    out = bytearray([FLAG])
    for b in payload:
        if b == FLAG or b == ESC:
            out.append(ESC)
            out.append(b ^ ESC_XOR)
        else:
            out.append(b)
    out.append(FLAG)
    return bytes(out)


def destuff(frame: bytes) -> bytes:
    """Inverse of stuff(). Raises MalformedFrameError on bad framing."""
    if len(frame) < 2 or frame[0] != FLAG:
        raise MalformedFrameError("missing opening flag", 0)
    if frame[-1] != FLAG:
        raise MalformedFrameError("missing closing flag", len(frame) - 1)
    out = bytearray()
    i = 1
    end = len(frame) - 1
    while i < end:
        b = frame[i]
        if b == FLAG:
            raise MalformedFrameError("unescaped flag byte inside frame", i)
        if b == ESC:
            if i + 1 >= end:
                raise MalformedFrameError("dangling escape byte", i)
            nxt = frame[i + 1]
            if nxt not in (FLAG ^ ESC_XOR, ESC ^ ESC_XOR):
                raise MalformedFrameError(
                    f"invalid escape pair 7d {nxt:02x}", i)
            out.append(nxt ^ ESC_XOR)
            i += 2
        else:
            out.append(b)
            i += 1
    return bytes(out)


def _make_crc_table() -> tuple[int, ...]:
    # reflected form of polynomial 0x04C11DB7
    poly = 0xEDB88320
    table = []
    for byte in range(256):
        crc = byte
        for _ in range(8):
            crc = (crc >> 1) ^ poly if crc & 1 else crc >> 1
        table.append(crc)
    return tuple(table)


_CRC_TABLE = _make_crc_table()


def crc32(data: bytes) -> int:
    """IEEE CRC-32 (the zlib/Ethernet variant), as an unsigned 32-bit int."""
    crc = 0xFFFFFFFF
    table = _CRC_TABLE
    for b in data:
        crc = table[(crc ^ b) & 0xFF] ^ (crc >> 8)
    return crc ^ 0xFFFFFFFF


def encode_vector(values: list[int]) -> bytes:
    """Pack signed 32-bit integers big-endian (network byte order)."""
    return struct.pack(f">{len(values)}i", *values)


def decode_vector(data: bytes) -> list[int]:
    if len(data) % 4 != 0:
        raise VectorLengthError(
            f"vector encoding must be a multiple of 4 bytes, got {len(data)}")
    return list(struct.unpack(f">{len(data) // 4}i", data))


def sum_vector(values: list[int]) -> int:
    """Sum with two's-complement wrap-around into a signed 32-bit result."""
    total = sum(values) & 0xFFFFFFFF
    return total - (1 << 32) if total >= (1 << 31) else total
