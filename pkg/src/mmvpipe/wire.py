"""Binary framing for external executors (see PROTOCOL.md for the contract).

A frame is ``b"MMVX" + u32-LE header length + canonical JSON header +
payload``. Payloads are raw little-endian float32 and exist only on infer
and result frames, where their length must equal 4 * product(shape).
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import ExternalProtocolError

WIRE_MAGIC = b"MMVX"
PROTOCOL_VERSION = 1
FRAME_TYPES = ("hello", "infer", "result", "error")


def encode_frame(header: dict, payload: np.ndarray | None = None) -> bytes:
    """Serialize a frame; the header is canonical JSON (sorted keys, compact)."""
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [WIRE_MAGIC, struct.pack("<I", len(header_bytes)), header_bytes]
    if payload is not None:
        arr = np.ascontiguousarray(payload, dtype="<f4")
        expected = int(np.prod(header.get("shape", ()))) if "shape" in header else arr.size
        if arr.size != expected:
            raise ValueError(f"payload has {arr.size} elements, header shape wants {expected}")
        parts.append(arr.tobytes())
    return b"".join(parts)


def tensor_header(frame_type: str, shape) -> dict:
    return {
        "v": PROTOCOL_VERSION,
        "type": frame_type,
        "dtype": "f32",
        "shape": [int(s) for s in shape],
    }


def decode_header(buf: bytes) -> tuple[dict, int]:
    """Parse magic + header from the front of a buffer.

    Returns (header, total header bytes consumed). Raises
    ExternalProtocolError on any structural violation.
    """
    if len(buf) < 8:
        raise ExternalProtocolError("frame shorter than magic + length prefix")
    if buf[:4] != WIRE_MAGIC:
        raise ExternalProtocolError(f"bad frame magic {buf[:4]!r}")
    (hlen,) = struct.unpack_from("<I", buf, 4)
    if len(buf) < 8 + hlen:
        raise ExternalProtocolError("frame header truncated")
    try:
        header = json.loads(buf[8 : 8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ExternalProtocolError(f"frame header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict) or header.get("type") not in FRAME_TYPES:
        raise ExternalProtocolError(f"unknown frame type in header {header!r}")
    return header, 8 + hlen


def payload_length(header: dict) -> int:
    """Expected payload byte count for a decoded header (0 for hello/error)."""
    if header["type"] not in ("infer", "result"):
        return 0
    shape = header.get("shape")
    if (
        not isinstance(shape, list)
        or not shape
        or not all(isinstance(s, int) and s >= 1 for s in shape)
    ):
        raise ExternalProtocolError(f"{header['type']} frame has invalid shape {shape!r}")
    if header.get("dtype") != "f32":
        raise ExternalProtocolError(f"unsupported dtype {header.get('dtype')!r} (v1 is f32 only)")
    n = 1
    for s in shape:
        n *= s
    return 4 * n


def decode_frame(buf: bytes) -> tuple[dict, np.ndarray | None, int]:
    """Parse one complete frame; returns (header, payload array, bytes consumed)."""
    header, consumed = decode_header(buf)
    nbytes = payload_length(header)
    if len(buf) < consumed + nbytes:
        raise ExternalProtocolError(
            f"frame payload truncated: have {len(buf) - consumed} of {nbytes} bytes"
        )
    payload = None
    if nbytes:
        payload = np.frombuffer(buf[consumed : consumed + nbytes], dtype="<f4").reshape(
            header["shape"]
        )
    return header, payload, consumed + nbytes
