/** Agent builder: client-side validation mirrors the server's reasons, but
 * the server remains authoritative (its errors render inline too). */

import { ApiClient, ApiError } from "../api.js";
import type { AgentSummary } from "../api.js";
import {
  GRADE_LEVELS,
  SUPPORTED_LANGUAGES,
  validateAgentDraft,
} from "../validate.js";

export class AgentBuilder {
  readonly root: HTMLElement;
  onCreated: (agent: AgentSummary) => void = () => {};

  constructor(
    private readonly api: ApiClient,
    doc: Document = document,
  ) {
    this.root = doc.createElement("section");
    this.root.className = "agent-builder";
    const grades = GRADE_LEVELS.map(
      (grade) => `<option value="${grade}">${grade}</option>`,
    ).join("");
    const languages = SUPPORTED_LANGUAGES.map(
      (tag) => `<option value="${tag}">${tag}</option>`,
    ).join("");
    this.root.innerHTML = `
      <form data-role="form">
        <input data-role="display_name" placeholder="Assistant name" />
        <input data-role="subject" placeholder="Subject (must exist in curriculum)" />
        <select data-role="grade_level">${grades}</select>
        <select data-role="language">${languages}</select>
        <textarea data-role="tone_descriptor" rows="2"
                  placeholder="Tone, e.g. warm, reflective"></textarea>
        <input data-role="voice_profile_id" placeholder="Voice profile id (optional)" />
        <button data-role="submit" type="submit">Create assistant</button>
      </form>
      <ul data-role="problems" class="error"></ul>
      <ul data-role="agent-list" class="agent-list"></ul>
    `;
    this.root
      .querySelector<HTMLFormElement>("[data-role=form]")!
      .addEventListener("submit", (event) => {
        event.preventDefault();
        void this.submit();
      });
  }

  private value(role: string): string {
    return (
      this.root.querySelector<HTMLInputElement | HTMLSelectElement>(
        `[data-role=${role}]`,
      )?.value ?? ""
    ).trim();
  }

  private showProblems(reasons: string[]): void {
    const list = this.root.querySelector<HTMLUListElement>("[data-role=problems]")!;
    list.replaceChildren(
      ...reasons.map((reason) => {
        const item = list.ownerDocument.createElement("li");
        item.textContent = reason;
        return item;
      }),
    );
  }

  private async submit(): Promise<void> {
    const draft = {
      display_name: this.value("display_name"),
      subject: this.value("subject"),
      grade_level: this.value("grade_level"),
      tone_descriptor: this.value("tone_descriptor"),
      language: this.value("language"),
    };
    const problems = validateAgentDraft(draft);
    this.showProblems(problems);
    if (problems.length) return;
    const body: Record<string, unknown> = { ...draft };
    const voiceProfile = this.value("voice_profile_id");
    if (voiceProfile) body.voice_profile_id = voiceProfile;
    try {
      const agent = await this.api.createAgent(body);
      this.onCreated(agent);
      await this.refresh();
    } catch (error) {
      if (error instanceof ApiError) {
        this.showProblems([`${error.code}: ${error.message}`]);
        return;
      }
      throw error;
    }
  }

  async refresh(): Promise<void> {
    const { agents } = await this.api.listAgents();
    const list = this.root.querySelector<HTMLUListElement>("[data-role=agent-list]")!;
    list.replaceChildren(
      ...agents.map((agent) => {
        const item = list.ownerDocument.createElement("li");
        item.dataset.agentId = agent.agent_id;
        item.textContent = `${agent.display_name} — ${agent.subject} (${agent.grade_level})`;
        return item;
      }),
    );
  }
}
