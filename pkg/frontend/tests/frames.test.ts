import { describe, expect, it } from "vitest";

import { encodeFrame, StreamDecoder } from "../src/frames.js";
import type { StreamFrame } from "../src/frames.js";

const encoder = new TextEncoder();

// A frame envelope exactly as the gateway emits it (captured bytes).
const SERVER_ENVELOPE = encoder.encode(
  '136\n{"kind": "SummaryForConfirmation", "payload": {"revision_count": 1, ' +
    '"text": "mmɔfra songs → music"}, "seq": 4, "session": "s-abc123"}',
);

describe("envelope codec", () => {
  it("decodes a server-encoded envelope", () => {
    const frames = new StreamDecoder().feed(SERVER_ENVELOPE);
    expect(frames).toHaveLength(1);
    expect(frames[0].kind).toBe("SummaryForConfirmation");
    expect(frames[0].session).toBe("s-abc123");
    expect(frames[0].seq).toBe(4);
    expect(frames[0].payload.text).toBe("mmɔfra songs → music");
    expect(frames[0].payload.revision_count).toBe(1);
  });

  it("round-trips its own encoding", () => {
    const frame: StreamFrame = {
      kind: "ClientTurn",
      session: "s-1",
      seq: 0,
      payload: { text: "teach adinkra symbols" },
    };
    const frames = new StreamDecoder().feed(encodeFrame(frame));
    expect(frames).toEqual([frame]);
  });

  it("uses byte length, not character length, in the prefix", () => {
    const frame: StreamFrame = {
      kind: "Revise",
      session: "s",
      seq: 1,
      payload: { text: "ɛ and ɔ" }, // multi-byte characters
    };
    const data = encodeFrame(frame);
    const newline = data.indexOf("\n".charCodeAt(0));
    const declared = Number(new TextDecoder().decode(data.subarray(0, newline)));
    expect(declared).toBe(data.length - newline - 1);
  });

  it("handles arbitrary chunking", () => {
    const frames: StreamFrame[] = [0, 1, 2].map((seq) => ({
      kind: "Heartbeat",
      session: "s",
      seq,
      payload: {},
    }));
    const blob = frames.map(encodeFrame);
    const merged = new Uint8Array(blob.reduce((n, b) => n + b.length, 0));
    let offset = 0;
    for (const piece of blob) {
      merged.set(piece, offset);
      offset += piece.length;
    }
    const decoder = new StreamDecoder();
    const seen: StreamFrame[] = [];
    for (let i = 0; i < merged.length; i += 3) {
      seen.push(...decoder.feed(merged.subarray(i, i + 3)));
    }
    expect(seen).toEqual(frames);
  });

  it("rejects unknown kinds", () => {
    const body = '{"kind": "Telepathy", "session": "s", "seq": 0, "payload": {}}';
    const envelope = encoder.encode(`${encoder.encode(body).length}\n${body}`);
    expect(() => new StreamDecoder().feed(envelope)).toThrow(/unknown frame kind/);
  });
});
