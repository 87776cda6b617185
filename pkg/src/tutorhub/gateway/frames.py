"""Stream frame model and the length-prefixed envelope codec.

Wire grammar (documented for interoperating clients): one frame is

    <LEN>\\n<BODY>

where LEN is the decimal byte length of BODY and BODY is a UTF-8 JSON
object with exactly the keys ``kind`` (frame kind name), ``session``
(session id), ``seq`` (per-direction sequence number, gapless from 0), and
``payload`` (object). Envelopes are self-delimiting, so any byte transport
works: over the live WebSocket each message carries one envelope, but a
decoder must treat the byte stream as the unit, not message boundaries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum


class FrameError(Exception):
    pass


class FrameKind(str, Enum):
    CLIENT_TURN = "ClientTurn"
    CLARIFICATION_QUESTION = "ClarificationQuestion"
    SUMMARY_FOR_CONFIRMATION = "SummaryForConfirmation"
    CONFIRM = "Confirm"
    REVISE = "Revise"
    AGENT_RESPONSE = "AgentResponse"
    VOICE_CHUNK = "VoiceChunk"
    ERROR = "Error"
    HEARTBEAT = "Heartbeat"


CLIENT_KINDS = (
    FrameKind.CLIENT_TURN,
    FrameKind.CONFIRM,
    FrameKind.REVISE,
    FrameKind.VOICE_CHUNK,
    FrameKind.HEARTBEAT,
)


@dataclass(frozen=True)
class StreamFrame:
    kind: FrameKind
    session_id: str
    seq: int
    payload: dict = field(default_factory=dict)


def encode_frame(frame: StreamFrame) -> bytes:
    body = json.dumps(
        {
            "kind": frame.kind.value,
            "session": frame.session_id,
            "seq": frame.seq,
            "payload": frame.payload,
        },
        ensure_ascii=False,
        sort_keys=True,
    ).encode("utf-8")
    return str(len(body)).encode("ascii") + b"\n" + body


def decode_body(body: bytes) -> StreamFrame:
    try:
        raw = json.loads(body.decode("utf-8"))
        return StreamFrame(
            kind=FrameKind(raw["kind"]),
            session_id=raw["session"],
            seq=int(raw["seq"]),
            payload=raw.get("payload") or {},
        )
    except (ValueError, KeyError, TypeError) as exc:
        raise FrameError(f"bad frame body: {exc}") from exc


class FrameDecoder:
    """Incremental decoder over an arbitrary chunking of the byte stream."""

    MAX_FRAME_BYTES = 1 << 20

    def __init__(self) -> None:
        self._buffer = bytearray()

    def feed(self, data: bytes) -> list[StreamFrame]:
        self._buffer.extend(data)
        frames = []
        while True:
            newline = self._buffer.find(b"\n")
            if newline < 0:
                if len(self._buffer) > 20:
                    raise FrameError("length prefix too long")
                break
            prefix = bytes(self._buffer[:newline])
            try:
                length = int(prefix)
            except ValueError:
                raise FrameError(f"bad length prefix: {prefix!r}") from None
            if length < 0 or length > self.MAX_FRAME_BYTES:
                raise FrameError(f"frame length out of range: {length}")
            if len(self._buffer) - newline - 1 < length:
                break
            body = bytes(self._buffer[newline + 1 : newline + 1 + length])
            del self._buffer[: newline + 1 + length]
            frames.append(decode_body(body))
        return frames
