/**
 * Stream frame envelope codec, mirroring the gateway's documented grammar:
 *
 *     <LEN>\n<BODY>
 *
 * LEN is the decimal byte length of BODY; BODY is UTF-8 JSON with keys
 * kind, session, seq, payload. Envelopes are self-delimiting, so the
 * decoder treats incoming WebSocket messages as one continuous byte stream.
 */

export type FrameKind =
  | "ClientTurn"
  | "ClarificationQuestion"
  | "SummaryForConfirmation"
  | "Confirm"
  | "Revise"
  | "AgentResponse"
  | "VoiceChunk"
  | "Error"
  | "Heartbeat";

export const FRAME_KINDS: readonly FrameKind[] = [
  "ClientTurn",
  "ClarificationQuestion",
  "SummaryForConfirmation",
  "Confirm",
  "Revise",
  "AgentResponse",
  "VoiceChunk",
  "Error",
  "Heartbeat",
];

export interface StreamFrame {
  kind: FrameKind;
  session: string;
  seq: number;
  payload: Record<string, unknown>;
}

const encoder = new TextEncoder();
const decoder = new TextDecoder();

export function encodeFrame(frame: StreamFrame): Uint8Array {
  const body = encoder.encode(
    JSON.stringify({
      kind: frame.kind,
      session: frame.session,
      seq: frame.seq,
      payload: frame.payload,
    }),
  );
  const prefix = encoder.encode(`${body.length}\n`);
  const out = new Uint8Array(prefix.length + body.length);
  out.set(prefix, 0);
  out.set(body, prefix.length);
  return out;
}

function parseBody(body: Uint8Array): StreamFrame {
  const raw = JSON.parse(decoder.decode(body)) as Record<string, unknown>;
  const kind = raw.kind as FrameKind;
  if (!FRAME_KINDS.includes(kind)) {
    throw new Error(`unknown frame kind: ${String(raw.kind)}`);
  }
  return {
    kind,
    session: String(raw.session ?? ""),
    seq: Number(raw.seq ?? 0),
    payload: (raw.payload ?? {}) as Record<string, unknown>,
  };
}

const NEWLINE = 0x0a;

export class StreamDecoder {
  private buffer = new Uint8Array(0);

  feed(chunk: Uint8Array): StreamFrame[] {
    const merged = new Uint8Array(this.buffer.length + chunk.length);
    merged.set(this.buffer, 0);
    merged.set(chunk, this.buffer.length);
    this.buffer = merged;

    const frames: StreamFrame[] = [];
    for (;;) {
      const newline = this.buffer.indexOf(NEWLINE);
      if (newline < 0) {
        if (this.buffer.length > 20) throw new Error("length prefix too long");
        break;
      }
      const prefix = decoder.decode(this.buffer.subarray(0, newline));
      const length = Number(prefix);
      if (!Number.isInteger(length) || length < 0 || length > 1 << 20) {
        throw new Error(`bad length prefix: ${prefix}`);
      }
      if (this.buffer.length - newline - 1 < length) break;
      const body = this.buffer.subarray(newline + 1, newline + 1 + length);
      frames.push(parseBody(body));
      this.buffer = this.buffer.slice(newline + 1 + length);
    }
    return frames;
  }
}
