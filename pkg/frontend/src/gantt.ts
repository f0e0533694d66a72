/** Schedule lanes per reactor with override editing.
 *
 * The proposed schedule (latest recommendation) renders as editable cells;
 * clicking toggles a pending edit. "Accept" posts the recommendation
 * unchanged, "Apply override" posts the collected edits. The active
 * schedule (what /sim/tick executes) renders as a separate visual state.
 */

import { ApiClient, ApiError } from "./api.js";
import type {
  ActiveScheduleDto,
  OpPoint,
  RecommendationDto,
  ScheduleEdit,
} from "./types.js";

export class ScheduleGantt {
  private recommendation: RecommendationDto | null = null;
  private runId: number | null = null;
  private active: ActiveScheduleDto | null = null;
  private edits = new Map<string, boolean>();
  private attachedPoint: OpPoint | null = null;
  private toast = "";

  onActioned: (() => void) | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly refresh: () => Promise<void>,
  ) {
    this.root.addEventListener("click", (event) => {
      const target = event.target as HTMLElement;
      if (target.dataset.cell) {
        const [r, t] = target.dataset.cell.split(":").map(Number);
        this.toggleCell(r, t);
      } else if (target.dataset.action === "accept") {
        void this.submit("accept");
      } else if (target.dataset.action === "override") {
        void this.submit("override");
      }
    });
  }

  setProposed(recommendation: RecommendationDto | null, runId: number | null): void {
    this.recommendation = recommendation;
    this.runId = runId;
    this.edits.clear();
    this.toast = "";
    this.render();
  }

  setActive(active: ActiveScheduleDto | null): void {
    this.active = active;
    this.render();
  }

  attachPoint(point: OpPoint): void {
    this.attachedPoint = point;
    this.render();
  }

  get pendingEdits(): ScheduleEdit[] {
    return [...this.edits.entries()].map(([key, on]) => {
      const [r, t] = key.split(":").map(Number);
      return { reactor: r + 1, step: t, on };
    });
  }

  private toggleCell(r: number, t: number): void {
    if (!this.recommendation) {
      return;
    }
    const key = `${r}:${t}`;
    const proposed = this.recommendation.schedule[r][t] === 1;
    const current = this.edits.has(key) ? this.edits.get(key)! : proposed;
    const next = !current;
    if (next === proposed) {
      this.edits.delete(key);
    } else {
      this.edits.set(key, next);
    }
    this.render();
  }

  private async submit(kind: "accept" | "override"): Promise<void> {
    if (this.runId === null) {
      return;
    }
    try {
      const edits = kind === "override" ? this.pendingEdits : undefined;
      await this.api.operatorAction(this.runId, kind, edits, this.attachedPoint ?? undefined);
      this.edits.clear();
      this.attachedPoint = null;
      this.toast = kind === "accept" ? "schedule accepted" : "override applied";
      this.onActioned?.();
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        this.toast = `run already actioned: ${error.message}`;
        await this.refresh();
      } else if (error instanceof ApiError) {
        this.toast = `action failed: ${error.message}`;
      } else {
        this.toast = "action failed: network error";
      }
    }
    this.render();
  }

  cellState(r: number, t: number): "on" | "off" {
    const key = `${r}:${t}`;
    if (this.edits.has(key)) {
      return this.edits.get(key) ? "on" : "off";
    }
    return this.recommendation && this.recommendation.schedule[r][t] === 1 ? "on" : "off";
  }

  render(): void {
    const sections: string[] = [];
    if (this.recommendation) {
      const lanes = this.recommendation.schedule
        .map((row, r) => {
          const cells = row
            .map((_, t) => {
              const state = this.cellState(r, t);
              const edited = this.edits.has(`${r}:${t}`) ? " edited" : "";
              return `<button class="cell proposed ${state}${edited}" data-cell="${r}:${t}" title="reactor ${r + 1}, step ${t}"></button>`;
            })
            .join("");
          return `<div class="lane"><span class="lane-label">R${r + 1}</span>${cells}</div>`;
        })
        .join("");
      const flags = this.recommendation.flags;
      const flagText = [
        flags.quality_risk ? "quality risk" : "",
        flags.not_proven_optimal ? "not proven optimal" : "",
        flags.level_bound_violation ? "level bound violation" : "",
      ]
        .filter(Boolean)
        .join(", ");
      sections.push(`
        <div class="proposed-block" data-run-id="${this.runId ?? ""}">
          <h3>Proposed schedule ${this.runId !== null ? `(run ${this.runId})` : ""}</h3>
          ${lanes}
          <div class="gantt-meta">
            <span data-role="predicted-energy">predicted energy ${this.recommendation.predicted_total_energy_kwh.toFixed(1)} kWh</span>
            <span data-role="flags">${flagText || "no flags"}</span>
            ${this.attachedPoint ? `<span data-role="attached-point">attached point: ${this.attachedPoint.temp_setpoint_c}C / ${this.attachedPoint.dry_solids_frac} / ${this.attachedPoint.cycle_minutes}min</span>` : ""}
          </div>
          <button data-action="accept">Accept</button>
          <button data-action="override">Apply override (${this.edits.size} edits)</button>
        </div>`);
    } else {
      sections.push(`<p class="placeholder">No recommendation yet.</p>`);
    }
    if (this.active) {
      const lanes = this.active.schedule
        .map((row, r) => {
          const cells = row
            .map(
              (value, t) =>
                `<span class="cell active ${value === 1 ? "on" : "off"}${t === this.active!.cursor ? " cursor" : ""}" data-active-cell="${r}:${t}"></span>`,
            )
            .join("");
          return `<div class="lane"><span class="lane-label">R${r + 1}</span>${cells}</div>`;
        })
        .join("");
      sections.push(`
        <div class="active-block" data-active-run-id="${this.active.run_id}">
          <h3>Active schedule (run ${this.active.run_id}, step ${this.active.cursor})</h3>
          ${lanes}
        </div>`);
    }
    if (this.toast) {
      sections.push(`<div class="toast" role="status">${this.toast}</div>`);
    }
    this.root.innerHTML = sections.join("\n");
  }
}
