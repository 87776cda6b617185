/** Curriculum browser (grade → subject → strand → sub-strand → indicator)
 * and the analytics pane. Every number shown is a verbatim server value. */

import { ApiClient } from "../api.js";

export class CurriculumBrowser {
  readonly root: HTMLElement;

  constructor(
    private readonly api: ApiClient,
    doc: Document = document,
  ) {
    this.root = doc.createElement("section");
    this.root.className = "curriculum-browser";
    this.root.innerHTML = `<p data-role="count"></p><div data-role="tree"></div>`;
  }

  async refresh(): Promise<void> {
    const { tree, item_count } = await this.api.curriculumTree();
    this.root.querySelector("[data-role=count]")!.textContent =
      `${item_count} indicators indexed`;
    const host = this.root.querySelector<HTMLElement>("[data-role=tree]")!;
    const doc = host.ownerDocument;
    host.replaceChildren();
    for (const [grade, subjects] of Object.entries(tree)) {
      const gradePane = doc.createElement("details");
      gradePane.dataset.grade = grade;
      const gradeLabel = doc.createElement("summary");
      gradeLabel.textContent = grade;
      gradePane.append(gradeLabel);
      for (const [subject, strands] of Object.entries(
        subjects as Record<string, unknown>,
      )) {
        const subjectPane = doc.createElement("details");
        const subjectLabel = doc.createElement("summary");
        subjectLabel.textContent = subject;
        subjectPane.append(subjectLabel);
        for (const [strand, subStrands] of Object.entries(
          strands as Record<string, unknown>,
        )) {
          for (const [subStrand, items] of Object.entries(
            subStrands as Record<string, unknown>,
          )) {
            const list = doc.createElement("ul");
            list.dataset.path = `${strand} → ${subStrand}`;
            for (const item of items as Array<Record<string, string>>) {
              const leaf = doc.createElement("li");
              leaf.dataset.itemId = item.item_id;
              leaf.textContent = `${strand} → ${subStrand} → ${item.learning_indicator}`;
              list.append(leaf);
            }
            subjectPane.append(list);
          }
        }
        gradePane.append(subjectPane);
      }
      host.append(gradePane);
    }
  }
}

export class AnalyticsPanel {
  readonly root: HTMLElement;

  constructor(
    private readonly api: ApiClient,
    doc: Document = document,
  ) {
    this.root = doc.createElement("section");
    this.root.className = "analytics-panel";
    this.root.innerHTML = `
      <dl>
        <dt>Turns</dt><dd data-role="turn_count">-</dd>
        <dt>p50 latency (ms)</dt><dd data-role="latency_p50_ms">-</dd>
        <dt>p95 latency (ms)</dt><dd data-role="latency_p95_ms">-</dd>
        <dt>max latency (ms)</dt><dd data-role="latency_max_ms">-</dd>
        <dt>Feedback mean</dt><dd data-role="feedback_mean">-</dd>
      </dl>
      <ul data-role="unit-totals"></ul>
    `;
  }

  async refresh(): Promise<void> {
    const snapshot = await this.api.analytics();
    for (const key of [
      "turn_count",
      "latency_p50_ms",
      "latency_p95_ms",
      "latency_max_ms",
    ] as const) {
      this.root.querySelector(`[data-role=${key}]`)!.textContent = String(
        snapshot[key],
      );
    }
    this.root.querySelector("[data-role=feedback_mean]")!.textContent =
      snapshot.feedback_mean === null ? "none yet" : String(snapshot.feedback_mean);
    const totals = this.root.querySelector<HTMLUListElement>("[data-role=unit-totals]")!;
    totals.replaceChildren(
      ...Object.entries(snapshot.unit_totals).map(([model, units]) => {
        const item = totals.ownerDocument.createElement("li");
        item.textContent = `${model}: ${units} units`;
        return item;
      }),
    );
  }
}
