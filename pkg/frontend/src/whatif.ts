/** What-if explorer: three sliders bounded to the operating-point ranges.
 *
 * Slider changes debounce into a single in-flight /whatif call; the panel
 * renders the service's predicted energy, quality, and feasibility badge
 * verbatim. "Use this point" hands the point to the override flow.
 */

import { ApiClient, ApiError } from "./api.js";
import { DebouncedRequestQueue } from "./requestQueue.js";
import type { OpPoint, ServiceConfigDto, WhatIfDto } from "./types.js";

interface SliderSpec {
  key: keyof OpPoint;
  label: string;
  step: number;
}

const SLIDERS: SliderSpec[] = [
  { key: "temp_setpoint_c", label: "Temperature (C)", step: 1 },
  { key: "dry_solids_frac", label: "Dry solids", step: 0.01 },
  { key: "cycle_minutes", label: "Cycle (min)", step: 1 },
];

export class WhatIfPanel {
  private point: OpPoint;
  private result: WhatIfDto | null = null;
  private message = "";
  private readonly queue: DebouncedRequestQueue<OpPoint, WhatIfDto>;

  onUsePoint: ((point: OpPoint) => void) | null = null;

  constructor(
    private readonly root: HTMLElement,
    api: ApiClient,
    private readonly config: ServiceConfigDto,
    debounceMs = 250,
  ) {
    const bounds = config.op_bounds;
    this.point = {
      temp_setpoint_c: bounds.temp_setpoint_c[0],
      dry_solids_frac: bounds.dry_solids_frac[0],
      cycle_minutes: bounds.cycle_minutes[0],
    };
    this.queue = new DebouncedRequestQueue<OpPoint, WhatIfDto>(
      (point) => api.whatIf(point),
      (result) => {
        this.result = result;
        this.message = "";
        this.renderResult();
      },
      (error) => {
        if (error instanceof ApiError && error.status === 400) {
          this.clampToBounds();
          this.message = `out of bounds, clamped: ${error.message}`;
        } else if (error instanceof ApiError) {
          this.message = `what-if failed: ${error.message}`;
        } else {
          this.message = "what-if failed: network error";
        }
        this.renderResult();
      },
      debounceMs,
    );
    this.mount();
  }

  get currentPoint(): OpPoint {
    return { ...this.point };
  }

  setPoint(point: OpPoint): void {
    this.point = { ...point };
    this.mount();
    this.queue.schedule(this.currentPoint);
  }

  private clampToBounds(): void {
    const bounds = this.config.op_bounds;
    this.point = {
      temp_setpoint_c: Math.min(
        Math.max(this.point.temp_setpoint_c, bounds.temp_setpoint_c[0]),
        bounds.temp_setpoint_c[1],
      ),
      dry_solids_frac: Math.min(
        Math.max(this.point.dry_solids_frac, bounds.dry_solids_frac[0]),
        bounds.dry_solids_frac[1],
      ),
      cycle_minutes: Math.min(
        Math.max(this.point.cycle_minutes, bounds.cycle_minutes[0]),
        bounds.cycle_minutes[1],
      ),
    };
    this.mount();
  }

  private mount(): void {
    const bounds = this.config.op_bounds;
    const rows = SLIDERS.map((spec) => {
      const [lo, hi] = bounds[spec.key];
      const value = this.point[spec.key];
      return `
        <label class="slider-row">
          <span>${spec.label}</span>
          <input type="range" name="${spec.key}" min="${lo}" max="${hi}" step="${spec.step}" value="${value}">
          <output data-for="${spec.key}">${value}</output>
        </label>`;
    }).join("");
    this.root.innerHTML = `
      <div class="whatif-sliders">${rows}</div>
      <div class="whatif-result" data-role="whatif-result"></div>
      <button data-action="use-point">Use this point</button>`;
    for (const input of this.root.querySelectorAll<HTMLInputElement>("input[type=range]")) {
      input.addEventListener("input", () => {
        const key = input.name as keyof OpPoint;
        this.point = { ...this.point, [key]: Number(input.value) };
        const output = this.root.querySelector<HTMLOutputElement>(`output[data-for="${key}"]`);
        if (output) {
          output.textContent = input.value;
        }
        this.queue.schedule(this.currentPoint);
      });
    }
    this.root
      .querySelector<HTMLButtonElement>("button[data-action=use-point]")
      ?.addEventListener("click", () => {
        this.onUsePoint?.(this.currentPoint);
      });
    this.renderResult();
  }

  private renderResult(): void {
    const target = this.root.querySelector<HTMLElement>("[data-role=whatif-result]");
    if (!target) {
      return;
    }
    if (!this.result) {
      target.innerHTML = this.message
        ? `<span class="whatif-message">${this.message}</span>`
        : `<span class="placeholder">move a slider to query the model</span>`;
      return;
    }
    const badge = this.result.feasible
      ? `<span class="badge feasible" data-role="feasibility">feasible</span>`
      : `<span class="badge risk" data-role="feasibility">quality risk</span>`;
    target.innerHTML = `
      <span data-role="predicted-energy">energy ${this.result.predicted_energy.toFixed(2)} kWh/m3</span>
      <span data-role="predicted-quality">quality ${this.result.predicted_quality.toFixed(4)}</span>
      ${badge}
      <span class="hint">threshold ${(this.config.q_min + this.config.margin).toFixed(2)}</span>
      ${this.message ? `<span class="whatif-message">${this.message}</span>` : ""}`;
  }
}
