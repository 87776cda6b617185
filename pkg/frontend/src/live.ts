/** Live chat channel: one WebSocket per open session, envelope codec on top.
 * The socket constructor is injectable so tests can use the `ws` package
 * where the browser would supply `window.WebSocket`. */

import { encodeFrame, StreamDecoder } from "./frames.js";
import type { FrameKind, StreamFrame } from "./frames.js";

export interface WebSocketLike {
  binaryType: string;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  send(data: Uint8Array): void;
  close(): void;
}

export type SocketFactory = (url: string) => WebSocketLike;

export class LiveSession {
  private socket: WebSocketLike | null = null;
  private decoder = new StreamDecoder();
  private seq = 0;
  onFrame: (frame: StreamFrame) => void = () => {};
  onClose: () => void = () => {};

  constructor(
    private readonly factory: SocketFactory,
    private readonly url: string,
    readonly sessionId: string,
  ) {}

  connect(): Promise<void> {
    return new Promise((resolve, reject) => {
      const socket = this.factory(this.url);
      socket.binaryType = "arraybuffer";
      socket.onopen = () => resolve();
      socket.onerror = (event) => reject(new Error(`socket error: ${String(event)}`));
      socket.onclose = () => this.onClose();
      socket.onmessage = (event) => {
        const data = event.data;
        const bytes =
          data instanceof ArrayBuffer
            ? new Uint8Array(data)
            : new Uint8Array(data as ArrayBufferLike);
        for (const frame of this.decoder.feed(bytes)) {
          this.onFrame(frame);
        }
      };
      this.socket = socket;
    });
  }

  private sendFrame(kind: FrameKind, payload: Record<string, unknown>): void {
    if (!this.socket) throw new Error("not connected");
    const frame: StreamFrame = {
      kind,
      session: this.sessionId,
      seq: this.seq,
      payload,
    };
    this.seq += 1;
    this.socket.send(encodeFrame(frame));
  }

  sendTurn(text: string, complete = false): void {
    this.sendFrame("ClientTurn", complete ? { text, complete } : { text });
  }

  confirm(): void {
    this.sendFrame("Confirm", {});
  }

  revise(text: string): void {
    this.sendFrame("Revise", { text });
  }

  sendVoice(audioB64: string, language = "en"): void {
    this.sendFrame("VoiceChunk", { audio_b64: audioB64, language });
  }

  heartbeat(): void {
    this.sendFrame("Heartbeat", {});
  }

  close(): void {
    this.socket?.close();
  }
}
