/** Group panel: mint a passkey for a new group, join by passkey, and render
 * GroupFull / InvalidPasskey outcomes distinctly. */

import { ApiClient, ApiError } from "../api.js";
import type { GroupInfo } from "../api.js";

export class GroupPanel {
  readonly root: HTMLElement;
  onJoined: (group: GroupInfo) => void = () => {};

  constructor(
    private readonly api: ApiClient,
    doc: Document = document,
  ) {
    this.root = doc.createElement("section");
    this.root.className = "group-panel";
    this.root.innerHTML = `
      <div class="group-create">
        <input data-role="agent-id" type="text" placeholder="agent id" />
        <button data-role="create" type="button">Create group</button>
        <p data-role="passkey" class="passkey" hidden></p>
      </div>
      <div class="group-join">
        <input data-role="passkey-entry" type="text"
               placeholder="enter passkey" maxlength="26" />
        <button data-role="join" type="button">Join</button>
        <p data-role="join-error" class="error" hidden></p>
        <ul data-role="members" class="members"></ul>
      </div>
    `;
    this.root
      .querySelector("[data-role=create]")!
      .addEventListener("click", () => void this.create());
    this.root
      .querySelector("[data-role=join]")!
      .addEventListener("click", () => void this.join());
  }

  private input(role: string): HTMLInputElement {
    return this.root.querySelector(`[data-role=${role}]`)!;
  }

  private async create(): Promise<void> {
    const agentId = this.input("agent-id").value.trim();
    if (!agentId) return;
    const group = await this.api.createGroup(agentId);
    const pane = this.root.querySelector<HTMLElement>("[data-role=passkey]")!;
    pane.hidden = false;
    pane.textContent = group.passkey ?? "";
    this.renderMembers(group.members);
  }

  private async join(): Promise<void> {
    const key = this.input("passkey-entry").value.trim();
    const errorPane = this.root.querySelector<HTMLElement>("[data-role=join-error]")!;
    errorPane.hidden = true;
    errorPane.textContent = "";
    errorPane.dataset.code = "";
    try {
      const group = await this.api.joinGroup(key);
      this.renderMembers(group.members);
      this.onJoined(group);
    } catch (error) {
      if (error instanceof ApiError) {
        errorPane.hidden = false;
        errorPane.dataset.code = error.code;
        errorPane.textContent =
          error.code === "GROUP_FULL"
            ? "This group already has five members."
            : error.code === "INVALID_PASSKEY"
              ? "That passkey is not recognized — check for typos."
              : `${error.code}: ${error.message}`;
        return;
      }
      throw error;
    }
  }

  renderMembers(members: string[]): void {
    const list = this.root.querySelector<HTMLUListElement>("[data-role=members]")!;
    list.replaceChildren(
      ...members.map((member) => {
        const item = list.ownerDocument.createElement("li");
        item.textContent = member;
        return item;
      }),
    );
  }
}
