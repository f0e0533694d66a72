/** Run history: newest first, paged, with a detail view of the selected
 * run's full recommendation JSON. */

import { ApiClient } from "./api.js";
import type { RunDto } from "./types.js";

export class RunHistory {
  private runs: RunDto[] = [];
  private total = 0;
  private selected: RunDto | null = null;
  private readonly pageSize: number;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    pageSize = 10,
  ) {
    this.pageSize = pageSize;
    this.root.addEventListener("click", (event) => {
      const target = event.target as HTMLElement;
      if (target.dataset.runRow) {
        const id = Number(target.dataset.runRow);
        this.selected = this.runs.find((r) => r.run_id === id) ?? null;
        this.render();
      } else if (target.dataset.action === "load-more") {
        void this.loadMore();
      }
    });
  }

  setRuns(runs: RunDto[], total?: number): void {
    this.runs = [...runs].sort((a, b) => b.run_id - a.run_id);
    this.total = total ?? this.runs.length;
    this.render();
  }

  upsert(run: RunDto): void {
    const index = this.runs.findIndex((r) => r.run_id === run.run_id);
    if (index >= 0) {
      this.runs[index] = run;
    } else {
      this.runs.unshift(run);
      this.total += 1;
    }
    if (this.selected && this.selected.run_id === run.run_id) {
      this.selected = run;
    }
    this.render();
  }

  async reload(): Promise<void> {
    const page = await this.api.listRuns(Math.max(this.runs.length, this.pageSize), 0);
    this.runs = page.runs;
    this.total = page.total;
    this.render();
  }

  private async loadMore(): Promise<void> {
    const page = await this.api.listRuns(this.pageSize, this.runs.length);
    this.runs = [...this.runs, ...page.runs];
    this.total = page.total;
    this.render();
  }

  render(): void {
    const rows = this.runs
      .map((run) => {
        const action = run.operator_action
          ? `${run.operator_action.kind} by ${run.operator_action.actor}`
          : "pending";
        const selected = this.selected?.run_id === run.run_id ? " selected" : "";
        return `<tr class="run-row${selected}" data-run-row="${run.run_id}">
            <td data-run-row="${run.run_id}">#${run.run_id}</td>
            <td data-run-row="${run.run_id}">${run.created_at}</td>
            <td data-run-row="${run.run_id}" data-role="action-status">${action}</td>
          </tr>`;
      })
      .join("");
    const more =
      this.runs.length < this.total
        ? `<button data-action="load-more">Load more (${this.runs.length}/${this.total})</button>`
        : "";
    const detail = this.selected
      ? `<pre class="run-detail" data-role="run-detail">${JSON.stringify(this.selected.recommendation, null, 2)}</pre>`
      : "";
    this.root.innerHTML = `
      <table class="runs-table">
        <thead><tr><th>run</th><th>created</th><th>action</th></tr></thead>
        <tbody>${rows}</tbody>
      </table>
      ${more}
      ${detail}`;
  }
}
