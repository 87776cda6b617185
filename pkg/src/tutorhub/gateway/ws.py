"""Minimal RFC 6455 WebSocket framing: server-side upgrade plus a small client.

Only what the live channel needs: text/binary messages, close, ping/pong,
continuation frames, and 7/16/64-bit payload lengths. Clients must mask
(per the RFC); the server never does. The application-level envelope codec
(gateway.frames) rides on top and treats the concatenated message payloads
as one byte stream.
"""

from __future__ import annotations

import base64
import hashlib
import os
import socket
import struct
from typing import Optional

_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_CONT = 0x0
OP_TEXT = 0x1
OP_BINARY = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


class WsError(Exception):
    pass


def accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + _GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def encode_ws_frame(opcode: int, payload: bytes, mask: bool = False) -> bytes:
    header = bytearray([0x80 | opcode])
    length = len(payload)
    mask_bit = 0x80 if mask else 0
    if length < 126:
        header.append(mask_bit | length)
    elif length < 1 << 16:
        header.append(mask_bit | 126)
        header.extend(struct.pack(">H", length))
    else:
        header.append(mask_bit | 127)
        header.extend(struct.pack(">Q", length))
    if mask:
        key = os.urandom(4)
        header.extend(key)
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return bytes(header) + payload


def _read_exact(rfile, count: int) -> bytes:
    data = b""
    while len(data) < count:
        chunk = rfile.read(count - len(data))
        if not chunk:
            raise WsError("connection closed mid-frame")
        data += chunk
    return data


def read_ws_message(rfile) -> Optional[tuple[int, bytes]]:
    """Read one complete message, reassembling continuations.

    Returns (opcode, payload), (OP_CLOSE, reason) on close, or None on EOF
    at a message boundary. Control frames interleaved inside a fragmented
    message are handled (pings are surfaced as their own messages).
    """
    message_opcode = None
    buffer = b""
    while True:
        first = rfile.read(1)
        if not first:
            return None
        b0 = first[0]
        fin = bool(b0 & 0x80)
        opcode = b0 & 0x0F
        b1 = _read_exact(rfile, 1)[0]
        masked = bool(b1 & 0x80)
        length = b1 & 0x7F
        if length == 126:
            length = struct.unpack(">H", _read_exact(rfile, 2))[0]
        elif length == 127:
            length = struct.unpack(">Q", _read_exact(rfile, 8))[0]
        if length > (1 << 24):
            raise WsError(f"frame too large: {length}")
        mask_key = _read_exact(rfile, 4) if masked else None
        payload = _read_exact(rfile, length) if length else b""
        if mask_key:
            payload = bytes(b ^ mask_key[i % 4] for i, b in enumerate(payload))
        if opcode in (OP_CLOSE, OP_PING, OP_PONG):
            return opcode, payload
        if opcode in (OP_TEXT, OP_BINARY):
            if message_opcode is not None:
                raise WsError("new data frame inside fragmented message")
            message_opcode = opcode
        elif opcode == OP_CONT:
            if message_opcode is None:
                raise WsError("continuation with no message in progress")
        else:
            raise WsError(f"unsupported opcode: {opcode}")
        buffer += payload
        if fin:
            return message_opcode, buffer


class WsClient:
    """Blocking client used by the test-suite and the CLI demo driver."""

    def __init__(self, host: str, port: int, path: str, timeout: float = 10.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.rfile = self.sock.makefile("rb")
        key = base64.b64encode(os.urandom(16)).decode("ascii")
        request = (
            f"GET {path} HTTP/1.1\r\n"
            f"Host: {host}:{port}\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Key: {key}\r\n"
            "Sec-WebSocket-Version: 13\r\n\r\n"
        )
        self.sock.sendall(request.encode("ascii"))
        status = self.rfile.readline()
        if b"101" not in status:
            raise WsError(f"upgrade refused: {status!r}")
        expected = accept_key(key)
        accepted = None
        while True:
            line = self.rfile.readline().strip()
            if not line:
                break
            name, _, value = line.partition(b":")
            if name.strip().lower() == b"sec-websocket-accept":
                accepted = value.strip().decode("ascii")
        if accepted != expected:
            raise WsError("bad Sec-WebSocket-Accept")

    def send_bytes(self, payload: bytes) -> None:
        self.sock.sendall(encode_ws_frame(OP_BINARY, payload, mask=True))

    def send_text(self, text: str) -> None:
        self.sock.sendall(encode_ws_frame(OP_TEXT, text.encode("utf-8"), mask=True))

    def recv_message(self) -> Optional[tuple[int, bytes]]:
        while True:
            message = read_ws_message(self.rfile)
            if message is None:
                return None
            opcode, payload = message
            if opcode == OP_PING:
                self.sock.sendall(encode_ws_frame(OP_PONG, payload, mask=True))
                continue
            return opcode, payload

    def close(self) -> None:
        try:
            self.sock.sendall(encode_ws_frame(OP_CLOSE, b"", mask=True))
        except OSError:
            pass
        self.sock.close()
