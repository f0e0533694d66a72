/** Dashboard wiring: one SSE subscription drives every panel; all operator
 * gestures go through the documented endpoints. */

import { ApiClient } from "./api.js";
import { ScheduleGantt } from "./gantt.js";
import { LevelChart } from "./levelChart.js";
import { RunHistory } from "./runs.js";
import { EventStream } from "./sse.js";
import type { SnapshotPayload, StreamEvent } from "./types.js";
import { WhatIfPanel } from "./whatif.js";

export interface AppHandles {
  chart: LevelChart;
  gantt: ScheduleGantt;
  runs: RunHistory;
  whatif: WhatIfPanel | null;
  stream: EventStream;
  displayedVersion: () => number;
}

export async function startApp(
  root: HTMLElement,
  baseUrl: string,
  fetchFn: typeof fetch = fetch,
  debounceMs = 250,
): Promise<AppHandles> {
  root.innerHTML = `
    <header class="topbar">
      <h1>hydrotwin operator console</h1>
      <span data-role="state-version">v0</span>
      <span data-role="connection" class="connection">connecting</span>
    </header>
    <section id="chart-panel"><h2>Storage level</h2><div id="chart"></div></section>
    <section id="gantt-panel"><h2>Schedule</h2><div id="gantt"></div></section>
    <section id="whatif-panel"><h2>What-if explorer</h2><div id="whatif"></div></section>
    <section id="runs-panel"><h2>Run history</h2><div id="runs"></div></section>`;

  const api = new ApiClient(baseUrl, fetchFn);
  const chart = new LevelChart(root.querySelector<HTMLElement>("#chart")!);
  const runs = new RunHistory(root.querySelector<HTMLElement>("#runs")!, api);
  const gantt = new ScheduleGantt(
    root.querySelector<HTMLElement>("#gantt")!,
    api,
    async () => {
      await applyState(await api.getState());
      await runs.reload();
    },
  );
  gantt.onActioned = () => {
    void runs.reload();
  };

  let whatif: WhatIfPanel | null = null;
  let displayedVersion = 0;
  const versionEl = root.querySelector<HTMLElement>("[data-role=state-version]")!;
  const connectionEl = root.querySelector<HTMLElement>("[data-role=connection]")!;

  function setVersion(version: number): void {
    if (version < displayedVersion) {
      return; // never render a stale version
    }
    displayedVersion = version;
    versionEl.textContent = `v${version}`;
  }

  async function applyState(state: {
    latest_recommendation: SnapshotPayload["latest_recommendation"];
    latest_run_id: number | null;
    active_schedule: SnapshotPayload["active_schedule"];
    state_version: number;
    config: SnapshotPayload["config"];
    plant: SnapshotPayload["plant"];
  }): Promise<void> {
    gantt.setProposed(state.latest_recommendation, state.latest_run_id);
    gantt.setActive(state.active_schedule);
    chart.setTarget(state.config.target_level_pct);
    if (state.latest_recommendation) {
      chart.setForecast(state.latest_recommendation.planned_levels_pct.slice(1));
    }
    setVersion(state.state_version);
  }

  function onEvent(event: StreamEvent): void {
    switch (event.type) {
      case "snapshot": {
        const payload = event.payload;
        chart.setHistory(payload.level_history);
        void applyState(payload);
        runs.setRuns(payload.runs);
        if (!whatif && payload.config.model_trained) {
          whatif = new WhatIfPanel(
            root.querySelector<HTMLElement>("#whatif")!,
            api,
            payload.config,
            debounceMs,
          );
          whatif.onUsePoint = (point) => gantt.attachPoint(point);
        }
        break;
      }
      case "state":
        chart.appendPoint(
          { timestamp: event.payload.clock, level_pct: event.payload.level_pct },
          { overflow: event.payload.overflow, underflow: event.payload.underflow },
        );
        setVersion(event.state_version);
        break;
      case "recommendation":
        gantt.setProposed(event.payload.recommendation, event.payload.run_id);
        chart.setForecast(event.payload.recommendation.planned_levels_pct.slice(1));
        setVersion(event.state_version);
        void runs.reload();
        break;
      case "action":
        runs.upsert(event.payload);
        void api.getState().then(applyState);
        setVersion(event.state_version);
        break;
      case "violation":
        setVersion(event.state_version);
        break;
    }
  }

  const stream = new EventStream(
    baseUrl,
    {
      onEvent,
      onConnectionChange: (connected) => {
        connectionEl.textContent = connected ? "live" : "disconnected";
        connectionEl.classList.toggle("down", !connected);
      },
    },
    fetchFn,
  );
  stream.start();

  return {
    chart,
    gantt,
    runs,
    get whatif() {
      return whatif;
    },
    stream,
    displayedVersion: () => displayedVersion,
  } as AppHandles;
}
