/** Application shell: login, hash navigation, role-gated panes, and the
 * wiring from LiveSession frames into the chat view. */

import { ApiClient } from "./api.js";
import { LiveSession } from "./live.js";
import type { SocketFactory } from "./live.js";
import { AgentBuilder } from "./views/agents.js";
import { ChatView } from "./views/chat.js";
import { AnalyticsPanel, CurriculumBrowser } from "./views/dashboards.js";
import { GroupPanel } from "./views/groups.js";

export class App {
  readonly root: HTMLElement;
  readonly api: ApiClient;
  private chat: ChatView | null = null;
  private live: LiveSession | null = null;

  constructor(
    baseUrl: string,
    private readonly socketFactory: SocketFactory,
    private readonly doc: Document = document,
  ) {
    this.api = new ApiClient(baseUrl);
    this.root = doc.createElement("main");
    this.root.innerHTML = `
      <nav data-role="nav" hidden>
        <a href="#/chat">Chat</a>
        <a href="#/agents">My assistants</a>
        <a href="#/groups">Groups</a>
        <a href="#/curriculum">Curriculum</a>
        <a href="#/analytics" data-role="analytics-link">Analytics</a>
      </nav>
      <form data-role="login" class="login">
        <input data-role="handle" placeholder="handle" />
        <input data-role="secret" type="password" placeholder="secret" />
        <button type="submit">Sign in</button>
        <p data-role="login-error" class="error" hidden></p>
      </form>
      <section data-role="outlet"></section>
    `;
    this.root
      .querySelector<HTMLFormElement>("[data-role=login]")!
      .addEventListener("submit", (event) => {
        event.preventDefault();
        void this.login();
      });
  }

  private async login(): Promise<void> {
    const handle = this.root.querySelector<HTMLInputElement>("[data-role=handle]")!.value;
    const secret = this.root.querySelector<HTMLInputElement>("[data-role=secret]")!.value;
    const errorPane = this.root.querySelector<HTMLElement>("[data-role=login-error]")!;
    try {
      await this.api.login(handle, secret);
    } catch (error) {
      errorPane.hidden = false;
      errorPane.textContent = String((error as Error).message);
      return;
    }
    errorPane.hidden = true;
    this.root.querySelector<HTMLElement>("[data-role=login]")!.hidden = true;
    const nav = this.root.querySelector<HTMLElement>("[data-role=nav]")!;
    nav.hidden = false;
    // analytics stays server-gated; hiding the entry mirrors the permission matrix
    if (this.api.role === "StudentTeacher") {
      nav.querySelector<HTMLElement>("[data-role=analytics-link]")!.hidden = true;
    }
  }

  outlet(): HTMLElement {
    return this.root.querySelector<HTMLElement>("[data-role=outlet]")!;
  }

  async openChat(agentId: string, groupId?: string): Promise<ChatView> {
    const session = await this.api.openSession(agentId, "text", groupId);
    const live = new LiveSession(
      this.socketFactory,
      this.api.liveUrl(),
      session.session_id,
    );
    await live.connect();
    const chat = new ChatView(live, this.doc);
    live.onFrame = (frame) => chat.handleFrame(frame);
    this.chat = chat;
    this.live = live;
    this.outlet().replaceChildren(chat.root);
    return chat;
  }

  async showAgents(): Promise<AgentBuilder> {
    const builder = new AgentBuilder(this.api, this.doc);
    await builder.refresh();
    this.outlet().replaceChildren(builder.root);
    return builder;
  }

  showGroups(): GroupPanel {
    const panel = new GroupPanel(this.api, this.doc);
    this.outlet().replaceChildren(panel.root);
    return panel;
  }

  async showCurriculum(): Promise<CurriculumBrowser> {
    const browser = new CurriculumBrowser(this.api, this.doc);
    await browser.refresh();
    this.outlet().replaceChildren(browser.root);
    return browser;
  }

  async showAnalytics(): Promise<AnalyticsPanel> {
    const panel = new AnalyticsPanel(this.api, this.doc);
    await panel.refresh();
    this.outlet().replaceChildren(panel.root);
    return panel;
  }

  closeChat(): void {
    this.live?.close();
    this.live = null;
    this.chat = null;
  }
}

/** Browser bootstrap; tests construct App directly with a ws factory. */
export function mount(baseUrl = window.location.origin): App {
  const app = new App(baseUrl, (url) => new WebSocket(url) as never);
  document.body.append(app.root);
  return app;
}
