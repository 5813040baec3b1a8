"""Framed binary protocol for database servers over reliable byte streams.

Frame layout: 4-byte magic "EPIR", 1-byte version 0x01, 1-byte message
type, 4-byte big-endian payload length, payload. Selector bits pack
LSB-first within each byte: bit k of the vector is bit (k mod 8) of byte
floor(k / 8). All integers are big-endian.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .mechanisms import FetchIndices, ServerRequest, XorSelect
from .server import Records, ServerResponse, XorBlock

MAGIC = b"EPIR"
VERSION = 1

MSG_FETCH_INDICES = 0x01
MSG_XOR_SELECT = 0x02
MSG_RECORDS = 0x81
MSG_XOR_BLOCK = 0x82
MSG_ERROR = 0xFF

ERR_MALFORMED = 0x0001
ERR_REQUEST = 0x0002

_HEADER = struct.Struct(">4sBBI")
MAX_PAYLOAD = 64 * 1024 * 1024


class WireError(ValueError):
    """A frame or payload violates the protocol."""


@dataclass(frozen=True)
class ErrorReply:
    code: int
    message: str


WireMessage = ServerRequest | ServerResponse | ErrorReply


def pack_selector(selector: np.ndarray) -> bytes:
    return np.packbits(selector.astype(np.uint8), bitorder="little").tobytes()


def unpack_selector(data: bytes, n: int) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
    return bits[:n].copy()


def encode_payload(msg: WireMessage) -> tuple[int, bytes]:
    """(msg_type, payload bytes) for any protocol message."""
    if isinstance(msg, FetchIndices):
        return MSG_FETCH_INDICES, struct.pack(
            f">I{len(msg.indices)}I", len(msg.indices), *msg.indices
        )
    if isinstance(msg, XorSelect):
        n = len(msg.selector)
        return MSG_XOR_SELECT, struct.pack(">I", n) + pack_selector(msg.selector)
    if isinstance(msg, Records):
        parts = [struct.pack(">I", len(msg.items))]
        for idx, rec in msg.items:
            parts.append(struct.pack(">I", idx) + rec)
        return MSG_RECORDS, b"".join(parts)
    if isinstance(msg, XorBlock):
        return MSG_XOR_BLOCK, msg.block
    if isinstance(msg, ErrorReply):
        return MSG_ERROR, struct.pack(">H", msg.code) + msg.message.encode("utf-8")
    raise WireError(f"cannot encode {type(msg).__name__}")


def decode_payload(msg_type: int, payload: bytes) -> WireMessage:
    try:
        if msg_type == MSG_FETCH_INDICES:
            (count,) = struct.unpack_from(">I", payload)
            indices = struct.unpack_from(f">{count}I", payload, 4)
            if len(payload) != 4 + 4 * count:
                raise WireError("fetch payload length mismatch")
            return FetchIndices(tuple(int(i) for i in indices))
        if msg_type == MSG_XOR_SELECT:
            (n,) = struct.unpack_from(">I", payload)
            body = payload[4:]
            if len(body) != (n + 7) // 8:
                raise WireError("selector payload length mismatch")
            return XorSelect(unpack_selector(body, n))
        if msg_type == MSG_RECORDS:
            (count,) = struct.unpack_from(">I", payload)
            body = payload[4:]
            if count == 0:
                if body:
                    raise WireError("records payload length mismatch")
                return Records(())
            if len(body) % count != 0:
                raise WireError("records payload length mismatch")
            stride = len(body) // count
            if stride < 4:
                raise WireError("records payload too short for indices")
            items = []
            for k in range(count):
                chunk = body[k * stride : (k + 1) * stride]
                (idx,) = struct.unpack_from(">I", chunk)
                items.append((int(idx), chunk[4:]))
            return Records(tuple(items))
        if msg_type == MSG_XOR_BLOCK:
            return XorBlock(payload)
        if msg_type == MSG_ERROR:
            (code,) = struct.unpack_from(">H", payload)
            return ErrorReply(int(code), payload[2:].decode("utf-8"))
    except (struct.error, UnicodeDecodeError) as exc:
        raise WireError(f"bad payload: {exc}") from exc
    raise WireError(f"unknown message type 0x{msg_type:02x}")


def encode_frame(msg: WireMessage) -> bytes:
    msg_type, payload = encode_payload(msg)
    return _HEADER.pack(MAGIC, VERSION, msg_type, len(payload)) + payload


def read_exact(sock_read, size: int) -> bytes | None:
    """Read exactly size bytes from a file-like reader; None at clean EOF."""
    data = b""
    while len(data) < size:
        chunk = sock_read(size - len(data))
        if not chunk:
            return None if not data else data
        data += chunk
    return data


def read_frame(sock_read) -> tuple[int, bytes] | None:
    """Next (msg_type, payload) from the stream; None at EOF before a frame.

    Raises WireError on bad magic, bad version, or oversized length; the
    caller decides whether the connection can be kept.
    """
    header = read_exact(sock_read, _HEADER.size)
    if header is None:
        return None
    if len(header) < _HEADER.size:
        raise WireError("truncated frame header")
    magic, version, msg_type, length = _HEADER.unpack(header)
    if magic != MAGIC:
        raise WireError("bad magic")
    if version != VERSION:
        raise WireError(f"unsupported version {version}")
    if length > MAX_PAYLOAD:
        raise WireError(f"payload length {length} exceeds cap")
    payload = read_exact(sock_read, length)
    if payload is None or len(payload) < length:
        raise WireError("truncated payload")
    return msg_type, payload
