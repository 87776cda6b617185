/**
 * Pure view-state reducer for one chat session.
 *
 * The badge mirrors the server's dialogue state as frames arrive; the
 * gating rules are structural: Confirm/Revise controls exist only in
 * AwaitingConfirmation, and nothing can be sent while a summary is pending
 * or a response is generating, so a correctly driven client can never emit
 * a frame sequence the gateway would reject.
 */

import type { StreamFrame } from "./frames.js";

export type BadgeState =
  | "AwaitingInput"
  | "Clarifying"
  | "Summarizing"
  | "AwaitingConfirmation"
  | "Generating"
  | "Delivered"
  | "Failed";

export interface Message {
  who: "you" | "agent" | "system";
  kind: string;
  text: string;
}

export interface SessionView {
  state: BadgeState;
  messages: Message[];
  pendingSummary: string | null;
  /** text entry + send allowed */
  inputEnabled: boolean;
  /** confirm/revise controls rendered */
  confirmControls: boolean;
  lastError: string | null;
}

export function initialView(): SessionView {
  return {
    state: "AwaitingInput",
    messages: [],
    pendingSummary: null,
    inputEnabled: true,
    confirmControls: false,
    lastError: null,
  };
}

/** The user pressed send / confirm / revise; lock the relevant controls. */
export function applyOutbound(
  view: SessionView,
  kind: "ClientTurn" | "Confirm" | "Revise",
  text?: string,
): SessionView {
  if (kind === "ClientTurn") {
    return {
      ...view,
      state: view.state === "AwaitingInput" ? "Summarizing" : view.state,
      messages: [...view.messages, { who: "you", kind, text: text ?? "" }],
      inputEnabled: false,
      lastError: null,
    };
  }
  if (kind === "Confirm") {
    return {
      ...view,
      state: "Generating",
      messages: [...view.messages, { who: "you", kind, text: "[confirmed]" }],
      pendingSummary: null,
      confirmControls: false,
      inputEnabled: false,
      lastError: null,
    };
  }
  return {
    ...view,
    state: "Summarizing",
    messages: [...view.messages, { who: "you", kind, text: text ?? "" }],
    pendingSummary: null,
    confirmControls: false,
    inputEnabled: false,
    lastError: null,
  };
}

/** A server frame arrived; frames are applied strictly in arrival order. */
export function applyFrame(view: SessionView, frame: StreamFrame): SessionView {
  const text = String(frame.payload.text ?? "");
  switch (frame.kind) {
    case "ClarificationQuestion":
      return {
        ...view,
        state: "Clarifying",
        messages: [...view.messages, { who: "agent", kind: frame.kind, text }],
        inputEnabled: true,
      };
    case "SummaryForConfirmation":
      return {
        ...view,
        state: "AwaitingConfirmation",
        messages: [...view.messages, { who: "agent", kind: frame.kind, text }],
        pendingSummary: text,
        confirmControls: true,
        inputEnabled: false,
      };
    case "AgentResponse":
      return {
        ...view,
        state: "Delivered",
        messages: [...view.messages, { who: "agent", kind: frame.kind, text }],
        inputEnabled: false,
        confirmControls: false,
      };
    case "VoiceChunk":
      return {
        ...view,
        messages: [
          ...view.messages,
          {
            who: "agent",
            kind: frame.kind,
            text: String(frame.payload.audio_handle ?? frame.payload.transcript ?? ""),
          },
        ],
      };
    case "Error": {
      const code = String(frame.payload.code ?? "ERROR");
      const message = String(frame.payload.message ?? "");
      const fatal = code === "PROVIDER_FAILED" || code === "SESSION_TIMEOUT";
      return {
        ...view,
        state: fatal ? "Failed" : view.state,
        messages: [
          ...view.messages,
          { who: "system", kind: frame.kind, text: `${code}: ${message}` },
        ],
        lastError: code,
        // non-fatal rejections give control back in the same state
        inputEnabled: fatal ? false : view.state === "AwaitingInput" || view.state === "Clarifying",
        confirmControls: fatal ? false : view.state === "AwaitingConfirmation",
      };
    }
    case "Heartbeat":
      return view;
    default:
      return {
        ...view,
        messages: [...view.messages, { who: "system", kind: frame.kind, text }],
      };
  }
}
