/** SVG chart of tank level vs target with violation markers and the
 * planned forecast band. All plotted values come from service payloads. */

import type { LevelPoint } from "./types.js";

export interface ChartMarker {
  index: number;
  kind: "overflow" | "underflow";
}

const WIDTH = 720;
const HEIGHT = 220;
const PAD = 28;

export class LevelChart {
  private history: LevelPoint[] = [];
  private markers: ChartMarker[] = [];
  private target = 60;
  private forecast: number[] = [];

  constructor(
    private readonly root: HTMLElement,
    private readonly maxPoints = 400,
  ) {}

  setTarget(target: number): void {
    this.target = target;
    this.render();
  }

  setHistory(points: LevelPoint[]): void {
    this.history = points.slice(-this.maxPoints);
    this.markers = this.markers.filter((m) => m.index < this.history.length);
    this.render();
  }

  appendPoint(point: LevelPoint, flags?: { overflow?: boolean; underflow?: boolean }): void {
    this.history.push(point);
    if (this.history.length > this.maxPoints) {
      const drop = this.history.length - this.maxPoints;
      this.history = this.history.slice(drop);
      this.markers = this.markers
        .map((m) => ({ ...m, index: m.index - drop }))
        .filter((m) => m.index >= 0);
    }
    if (flags?.overflow) {
      this.markers.push({ index: this.history.length - 1, kind: "overflow" });
    }
    if (flags?.underflow) {
      this.markers.push({ index: this.history.length - 1, kind: "underflow" });
    }
    this.render();
  }

  setForecast(levels: number[]): void {
    this.forecast = levels.slice();
    this.render();
  }

  get pointCount(): number {
    return this.history.length;
  }

  private x(i: number, total: number): number {
    if (total <= 1) {
      return PAD;
    }
    return PAD + (i * (WIDTH - 2 * PAD)) / (total - 1);
  }

  private y(level: number): number {
    return HEIGHT - PAD - ((HEIGHT - 2 * PAD) * level) / 100;
  }

  render(): void {
    const total = this.history.length + this.forecast.length;
    const path = this.history
      .map((p, i) => `${i === 0 ? "M" : "L"}${this.x(i, total).toFixed(1)},${this.y(p.level_pct).toFixed(1)}`)
      .join(" ");
    const forecastPath = this.forecast
      .map((level, j) => {
        const i = this.history.length + j;
        return `${j === 0 ? "M" : "L"}${this.x(i, total).toFixed(1)},${this.y(level).toFixed(1)}`;
      })
      .join(" ");
    const ty = this.y(this.target).toFixed(1);
    const markers = this.markers
      .map((m) => {
        const p = this.history[m.index];
        if (!p) {
          return "";
        }
        const cx = this.x(m.index, total).toFixed(1);
        const cy = this.y(p.level_pct).toFixed(1);
        return `<circle class="marker ${m.kind}" data-kind="${m.kind}" cx="${cx}" cy="${cy}" r="5"></circle>`;
      })
      .join("");
    const last = this.history[this.history.length - 1];
    this.root.innerHTML = `
      <svg viewBox="0 0 ${WIDTH} ${HEIGHT}" role="img" aria-label="tank level">
        <line class="target" x1="${PAD}" y1="${ty}" x2="${WIDTH - PAD}" y2="${ty}"></line>
        <path class="level" d="${path}" fill="none"></path>
        ${forecastPath ? `<path class="forecast" d="${forecastPath}" fill="none"></path>` : ""}
        ${markers}
      </svg>
      <div class="chart-caption">
        <span data-role="current-level">${last ? `level ${last.level_pct.toFixed(2)}%` : "no data"}</span>
        <span data-role="target-level">target ${this.target.toFixed(1)}%</span>
        <span data-role="point-count">${this.history.length} points</span>
      </div>`;
  }
}
