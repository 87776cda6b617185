/** Chat view: renders frames in arrival order and physically enforces the
 * human-in-the-loop gate — while a summary awaits confirmation the text
 * input is disabled and only Confirm / Revise are operable. */

import type { StreamFrame } from "../frames.js";
import { applyFrame, applyOutbound, initialView } from "../state.js";
import type { SessionView } from "../state.js";

export interface ChatChannel {
  sendTurn(text: string, complete?: boolean): void;
  confirm(): void;
  revise(text: string): void;
}

export class ChatView {
  readonly root: HTMLElement;
  view: SessionView = initialView();

  private badge: HTMLElement;
  private messages: HTMLUListElement;
  private input: HTMLTextAreaElement;
  private sendButton: HTMLButtonElement;
  private summaryPane: HTMLElement;
  private confirmButton: HTMLButtonElement;
  private reviseText: HTMLInputElement;
  private reviseButton: HTMLButtonElement;

  constructor(
    private readonly channel: ChatChannel,
    doc: Document = document,
  ) {
    this.root = doc.createElement("section");
    this.root.className = "chat-view";
    this.root.innerHTML = `
      <header class="chat-head">
        <span data-role="badge" class="badge"></span>
        <label class="mode-toggle">
          <input type="checkbox" data-role="voice-toggle" /> voice input
        </label>
      </header>
      <ul data-role="messages" class="messages"></ul>
      <div data-role="summary-pane" class="summary-pane" hidden>
        <p class="summary-text" data-role="summary-text"></p>
        <button data-role="confirm" type="button">Confirm</button>
        <input data-role="revise-text" type="text"
               placeholder="Ask for changes instead…" />
        <button data-role="revise" type="button">Revise</button>
      </div>
      <footer class="composer">
        <textarea data-role="input" rows="2"
                  placeholder="Describe what you want to teach…"></textarea>
        <button data-role="send" type="button">Send</button>
      </footer>
    `;
    this.badge = this.root.querySelector("[data-role=badge]")!;
    this.messages = this.root.querySelector("[data-role=messages]")!;
    this.input = this.root.querySelector("[data-role=input]")!;
    this.sendButton = this.root.querySelector("[data-role=send]")!;
    this.summaryPane = this.root.querySelector("[data-role=summary-pane]")!;
    this.confirmButton = this.root.querySelector("[data-role=confirm]")!;
    this.reviseText = this.root.querySelector("[data-role=revise-text]")!;
    this.reviseButton = this.root.querySelector("[data-role=revise]")!;

    this.sendButton.addEventListener("click", () => this.send());
    this.input.addEventListener("keydown", (event) => {
      if (event.key === "Enter" && !event.shiftKey) {
        event.preventDefault();
        this.send();
      }
    });
    this.confirmButton.addEventListener("click", () => this.confirm());
    this.reviseButton.addEventListener("click", () => this.revise());
    this.render();
  }

  private send(): void {
    const text = this.input.value.trim();
    if (!text || !this.view.inputEnabled) return;
    this.input.value = "";
    this.view = applyOutbound(this.view, "ClientTurn", text);
    this.channel.sendTurn(text);
    this.render();
  }

  private confirm(): void {
    if (!this.view.confirmControls) return;
    this.view = applyOutbound(this.view, "Confirm");
    this.channel.confirm();
    this.render();
  }

  private revise(): void {
    const text = this.reviseText.value.trim();
    if (!text || !this.view.confirmControls) return;
    this.reviseText.value = "";
    this.view = applyOutbound(this.view, "Revise", text);
    this.channel.revise(text);
    this.render();
  }

  handleFrame(frame: StreamFrame): void {
    this.view = applyFrame(this.view, frame);
    this.render();
  }

  render(): void {
    this.badge.textContent = this.view.state;
    this.badge.dataset.state = this.view.state;

    this.messages.replaceChildren(
      ...this.view.messages.map((message) => {
        const item = this.messages.ownerDocument.createElement("li");
        item.dataset.kind = message.kind;
        item.dataset.who = message.who;
        item.textContent = message.text;
        return item;
      }),
    );

    const summaryVisible = this.view.confirmControls;
    this.summaryPane.hidden = !summaryVisible;
    this.root.querySelector("[data-role=summary-text]")!.textContent =
      this.view.pendingSummary ?? "";
    this.confirmButton.disabled = !summaryVisible;
    this.reviseButton.disabled = !summaryVisible;
    this.reviseText.disabled = !summaryVisible;

    this.input.disabled = !this.view.inputEnabled;
    this.sendButton.disabled = !this.view.inputEnabled;
  }
}
