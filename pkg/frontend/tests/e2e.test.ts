// @vitest-environment jsdom
//
// Drives the real browser client (DOM views + live socket + REST client)
// against a locally running primary server spawned from the Python package.
import { spawn } from "node:child_process";
import type { ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import WebSocket from "ws";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { App } from "../src/app.js";
import type { ChatView } from "../src/views/chat.js";
import { GroupPanel } from "../src/views/groups.js";

// vitest runs with cwd = frontend/; the Python package is one level up
const REPO_ROOT = resolve(process.cwd(), "..");
const FIXTURE = join(REPO_ROOT, "tests/data/curriculum_fixture.json");

let server: ChildProcess;
let baseUrl: string;

const socketFactory = (url: string) => new WebSocket(url) as never;

function waitFor(
  predicate: () => boolean,
  label: string,
  timeoutMs = 15_000,
): Promise<void> {
  const started = Date.now();
  return new Promise((resolvePromise, rejectPromise) => {
    const tick = () => {
      if (predicate()) return resolvePromise();
      if (Date.now() - started > timeoutMs) {
        return rejectPromise(new Error(`timed out waiting for ${label}`));
      }
      setTimeout(tick, 25);
    };
    tick();
  });
}

beforeAll(async () => {
  const scratch = mkdtempSync(join(tmpdir(), "tutorhub-e2e-"));
  const configPath = join(scratch, "config.json");
  writeFileSync(
    configPath,
    JSON.stringify({
      host: "127.0.0.1",
      port: 0,
      media_dir: join(scratch, "media"),
      corpus_path: FIXTURE,
      admin_handle: "root",
      admin_secret: "admin-secret",
      scrypt_n: 2048,
    }),
  );
  server = spawn(
    "python3",
    ["-u", "-m", "tutorhub.cli", "serve", "--config", configPath],
    { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "inherit"] },
  );
  baseUrl = await new Promise<string>((resolvePromise, rejectPromise) => {
    const timer = setTimeout(
      () => rejectPromise(new Error("server did not start")),
      20_000,
    );
    server.stdout!.on("data", (chunk: Buffer) => {
      const match = /listening on (http:\/\/[\d.]+:\d+)/.exec(chunk.toString());
      if (match) {
        clearTimeout(timer);
        resolvePromise(match[1]);
      }
    });
    server.on("exit", (code) =>
      rejectPromise(new Error(`server exited early with ${code}`)),
    );
  });
});

afterAll(() => {
  server?.kill("SIGTERM");
});

async function freshTeacher(handle: string): Promise<App> {
  const app = new App(baseUrl, socketFactory, document);
  document.body.replaceChildren(app.root);
  const bootstrap = new ApiClient(baseUrl);
  await bootstrap.register(handle, `pw-${handle}`, "Teacher");
  (app.root.querySelector("[data-role=handle]") as HTMLInputElement).value = handle;
  (app.root.querySelector("[data-role=secret]") as HTMLInputElement).value =
    `pw-${handle}`;
  (app.root.querySelector("[data-role=login]") as HTMLFormElement).dispatchEvent(
    new window.Event("submit", { bubbles: true, cancelable: true }),
  );
  await waitFor(() => app.api.token !== null, "login");
  return app;
}

function type(chat: ChatView, text: string): void {
  const input = chat.root.querySelector<HTMLTextAreaElement>("[data-role=input]")!;
  input.value = text;
  chat.root.querySelector<HTMLButtonElement>("[data-role=send]")!.click();
}

describe("browser client against the live server", () => {
  it(
    "golden flow renders frames in order, gates on confirmation, and " +
      "round-trips revise text",
    async () => {
      const app = await freshTeacher("ama");
      const agent = await app.api.createAgent({
        display_name: "Mr. Mensah",
        subject: "Art Education",
        grade_level: "JHS",
        tone_descriptor: "warm, reflective",
      });
      const chat = await app.openChat(agent.agent_id);

      type(chat, "help me teach adinkra symbols");
      await waitFor(() => chat.view.state === "Clarifying", "first question");
      type(chat, "JHS two, double period");
      await waitFor(
        () => chat.view.messages.filter((m) => m.kind === "ClarificationQuestion").length === 2,
        "second question",
      );
      type(chat, "focus on symbol meanings");
      await waitFor(
        () => chat.view.state === "AwaitingConfirmation",
        "summary for confirmation",
      );

      // the composer is physically blocked while the summary is pending
      const input = chat.root.querySelector<HTMLTextAreaElement>("[data-role=input]")!;
      expect(input.disabled).toBe(true);
      const summaryPane = chat.root.querySelector<HTMLElement>(
        "[data-role=summary-pane]",
      )!;
      expect(summaryPane.hidden).toBe(false);
      const firstSummary = chat.view.pendingSummary!;

      // revise: the note must round-trip into the next summary
      const reviseText = chat.root.querySelector<HTMLInputElement>(
        "[data-role=revise-text]",
      )!;
      reviseText.value = "use local market examples";
      chat.root.querySelector<HTMLButtonElement>("[data-role=revise]")!.click();
      await waitFor(
        () => chat.view.state === "AwaitingConfirmation" && chat.view.pendingSummary !== firstSummary,
        "revised summary",
      );
      expect(chat.view.pendingSummary).toContain("use local market examples");

      chat.root.querySelector<HTMLButtonElement>("[data-role=confirm]")!.click();
      await waitFor(() => chat.view.state === "Delivered", "agent response");

      const kinds = [...chat.root.querySelectorAll("[data-role=messages] li")].map(
        (li) => (li as HTMLElement).dataset.kind,
      );
      expect(kinds).toEqual([
        "ClientTurn",
        "ClarificationQuestion",
        "ClientTurn",
        "ClarificationQuestion",
        "ClientTurn",
        "SummaryForConfirmation",
        "Revise",
        "SummaryForConfirmation",
        "Confirm",
        "AgentResponse",
      ]);
      expect(new Set(kinds).size).toBe(6);
      app.closeChat();
    },
  );

  it("passkey join succeeds and the sixth member sees GroupFull", async () => {
    const app = await freshTeacher("owner");
    const agent = await app.api.createAgent({
      display_name: "Group Host",
      subject: "Science",
      grade_level: "UpperPrimary",
      tone_descriptor: "steady",
    });
    const group = await app.api.createGroup(agent.agent_id);
    expect(group.passkey).toHaveLength(26);

    // four student teachers join through the panel (creator is member five)
    for (let i = 0; i < 4; i += 1) {
      const api = new ApiClient(baseUrl);
      await api.register(`member${i}`, "pw-member", "StudentTeacher");
      await api.login(`member${i}`, "pw-member");
      const panel = new GroupPanel(api, document);
      document.body.append(panel.root);
      panel.root.querySelector<HTMLInputElement>("[data-role=passkey-entry]")!.value =
        group.passkey!;
      panel.root.querySelector<HTMLButtonElement>("[data-role=join]")!.click();
      await waitFor(
        () => panel.root.querySelectorAll("[data-role=members] li").length > 0,
        `member ${i} join`,
      );
      const members = panel.root.querySelectorAll("[data-role=members] li");
      expect(members.length).toBe(i + 2);
      panel.root.remove();
    }

    const sixth = new ApiClient(baseUrl);
    await sixth.register("member-late", "pw-late", "StudentTeacher");
    await sixth.login("member-late", "pw-late");
    const panel = new GroupPanel(sixth, document);
    document.body.append(panel.root);
    panel.root.querySelector<HTMLInputElement>("[data-role=passkey-entry]")!.value =
      group.passkey!;
    panel.root.querySelector<HTMLButtonElement>("[data-role=join]")!.click();
    await waitFor(
      () =>
        !panel.root.querySelector<HTMLElement>("[data-role=join-error]")!.hidden,
      "GroupFull error",
    );
    const errorPane = panel.root.querySelector<HTMLElement>("[data-role=join-error]")!;
    expect(errorPane.dataset.code).toBe("GROUP_FULL");
    expect(errorPane.textContent).toContain("five members");

    // a typo key renders the other failure mode distinctly
    panel.root.querySelector<HTMLInputElement>("[data-role=passkey-entry]")!.value =
      "ABCDEFGHJKMNPQRSTVWXYZ2345";
    panel.root.querySelector<HTMLButtonElement>("[data-role=join]")!.click();
    await waitFor(
      () =>
        panel.root.querySelector<HTMLElement>("[data-role=join-error]")!.dataset
          .code === "INVALID_PASSKEY",
      "InvalidPasskey error",
    );
    panel.root.remove();
  });

  it("dashboards: curriculum drill-down and verbatim analytics numbers", async () => {
    const app = await freshTeacher("dash");
    const browser = await app.showCurriculum();
    const grades = [...browser.root.querySelectorAll("[data-grade]")].map(
      (el) => (el as HTMLElement).dataset.grade,
    );
    expect(new Set(grades)).toEqual(new Set(["EarlyGrade", "UpperPrimary", "JHS"]));
    expect(
      browser.root.querySelector("[data-role=count]")!.textContent,
    ).toContain("50");

    const served = await app.api.analytics();
    const panel = await app.showAnalytics();
    expect(
      panel.root.querySelector("[data-role=turn_count]")!.textContent,
    ).toBe(String(served.turn_count));
    expect(
      panel.root.querySelector("[data-role=latency_p95_ms]")!.textContent,
    ).toBe(String(served.latency_p95_ms));
  });

  it("analytics nav entry is hidden from student teachers", async () => {
    const api = new ApiClient(baseUrl);
    await api.register("st-nav", "pw-nav", "StudentTeacher");
    const app = new App(baseUrl, socketFactory, document);
    document.body.replaceChildren(app.root);
    (app.root.querySelector("[data-role=handle]") as HTMLInputElement).value = "st-nav";
    (app.root.querySelector("[data-role=secret]") as HTMLInputElement).value = "pw-nav";
    (app.root.querySelector("[data-role=login]") as HTMLFormElement).dispatchEvent(
      new window.Event("submit", { bubbles: true, cancelable: true }),
    );
    await waitFor(() => app.api.token !== null, "student login");
    expect(
      app.root.querySelector<HTMLElement>("[data-role=analytics-link]")!.hidden,
    ).toBe(true);
    // and the server still denies direct access
    await expect(app.api.analytics()).rejects.toMatchObject({ code: "UNAUTHORIZED" });
  });
});
