import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { ScheduleGantt } from "../src/gantt.js";
import { LevelChart } from "../src/levelChart.js";
import { RunHistory } from "../src/runs.js";
import { WhatIfPanel } from "../src/whatif.js";
import {
  fetchStub,
  makeConfig,
  makeRecommendation,
  makeRun,
} from "./helpers.js";

function mount(): HTMLElement {
  const root = document.createElement("div");
  document.body.appendChild(root);
  return root;
}

afterEach(() => {
  document.body.innerHTML = "";
});

describe("ApiClient", () => {
  it("raises typed errors from the service envelope", async () => {
    const { fn } = fetchStub({
      "GET /api/v1/state": () => ({
        status: 409,
        body: { error: { status: 409, code: "conflict", message: "already actioned" } },
      }),
    });
    const api = new ApiClient("http://svc", fn);
    await expect(api.getState()).rejects.toMatchObject({ status: 409, code: "conflict" });
  });
});

describe("LevelChart", () => {
  it("renders history, target line and service numbers verbatim", () => {
    const root = mount();
    const chart = new LevelChart(root);
    chart.setTarget(60);
    chart.setHistory([
      { timestamp: "t0", level_pct: 58.25 },
      { timestamp: "t1", level_pct: 61.75 },
    ]);
    expect(root.querySelectorAll("path.level")).toHaveLength(1);
    expect(root.querySelector("[data-role=current-level]")?.textContent).toBe("level 61.75%");
    expect(root.querySelector("[data-role=target-level]")?.textContent).toBe("target 60.0%");
    expect(root.querySelector("[data-role=point-count]")?.textContent).toBe("2 points");
  });

  it("appends points and marks violations", () => {
    const root = mount();
    const chart = new LevelChart(root);
    chart.setHistory([{ timestamp: "t0", level_pct: 70 }]);
    chart.appendPoint({ timestamp: "t1", level_pct: 100 }, { overflow: true });
    expect(chart.pointCount).toBe(2);
    const marker = root.querySelector(".marker");
    expect(marker?.getAttribute("data-kind")).toBe("overflow");
  });

  it("draws the forecast band after the history", () => {
    const root = mount();
    const chart = new LevelChart(root);
    chart.setHistory([{ timestamp: "t0", level_pct: 60 }]);
    chart.setForecast([61, 62, 63]);
    expect(root.querySelectorAll("path.forecast")).toHaveLength(1);
  });
});

describe("ScheduleGantt", () => {
  function ganttWith(routes: Parameters<typeof fetchStub>[0]) {
    const { fn, calls } = fetchStub(routes);
    const api = new ApiClient("http://svc", fn);
    const refresh = vi.fn(async () => {});
    const root = mount();
    const gantt = new ScheduleGantt(root, api, refresh);
    return { root, gantt, calls, refresh };
  }

  it("renders proposed lanes from the recommendation", () => {
    const { root, gantt } = ganttWith({});
    gantt.setProposed(makeRecommendation(), 1);
    expect(root.querySelectorAll(".proposed-block .lane")).toHaveLength(2);
    expect(root.querySelectorAll(".cell.proposed.on")).toHaveLength(4);
    expect(root.querySelector("[data-role=predicted-energy]")?.textContent).toContain("1234.5");
  });

  it("click toggles a cell into the pending edit set", () => {
    const { root, gantt } = ganttWith({});
    gantt.setProposed(makeRecommendation(), 1);
    const cell = root.querySelector<HTMLButtonElement>('button[data-cell="0:1"]')!;
    cell.click();
    expect(gantt.pendingEdits).toEqual([{ reactor: 1, step: 1, on: true }]);
    root.querySelector<HTMLButtonElement>('button[data-cell="0:1"]')!.click();
    expect(gantt.pendingEdits).toEqual([]);
  });

  it("accept posts the action unchanged", async () => {
    const { root, gantt, calls } = ganttWith({
      "POST /api/v1/operator/action": (body) => ({ body: makeRun(1, { operator_action: { kind: "accept", actor: "operator", at: "t", schedule_edits: [] } }) }),
    });
    gantt.setProposed(makeRecommendation(), 1);
    root.querySelector<HTMLButtonElement>("button[data-action=accept]")!.click();
    await vi.waitFor(() => expect(calls.length).toBe(1));
    expect(calls[0].body).toEqual({ run_id: 1, kind: "accept" });
  });

  it("override posts exactly the edited cells", async () => {
    const { root, gantt, calls } = ganttWith({
      "POST /api/v1/operator/action": () => ({ body: makeRun(1) }),
    });
    gantt.setProposed(makeRecommendation(), 1);
    root.querySelector<HTMLButtonElement>('button[data-cell="1:0"]')!.click();
    root.querySelector<HTMLButtonElement>("button[data-action=override]")!.click();
    await vi.waitFor(() => expect(calls.length).toBe(1));
    expect(calls[0].body).toEqual({
      run_id: 1,
      kind: "override",
      schedule_edits: [{ reactor: 2, step: 0, on: true }],
    });
  });

  it("includes an attached what-if point in the override", async () => {
    const { root, gantt, calls } = ganttWith({
      "POST /api/v1/operator/action": () => ({ body: makeRun(1) }),
    });
    gantt.setProposed(makeRecommendation(), 1);
    gantt.attachPoint({ temp_setpoint_c: 170, dry_solids_frac: 0.18, cycle_minutes: 35 });
    expect(root.querySelector("[data-role=attached-point]")?.textContent).toContain("170");
    root.querySelector<HTMLButtonElement>('button[data-cell="0:1"]')!.click();
    root.querySelector<HTMLButtonElement>("button[data-action=override]")!.click();
    await vi.waitFor(() => expect(calls.length).toBe(1));
    expect((calls[0].body as Record<string, unknown>).op_point).toEqual({
      temp_setpoint_c: 170,
      dry_solids_frac: 0.18,
      cycle_minutes: 35,
    });
  });

  it("409 shows a toast and refreshes the view", async () => {
    const { root, gantt, refresh } = ganttWith({
      "POST /api/v1/operator/action": () => ({
        status: 409,
        body: { error: { status: 409, code: "conflict", message: "run 1 already actioned" } },
      }),
    });
    gantt.setProposed(makeRecommendation(), 1);
    root.querySelector<HTMLButtonElement>("button[data-action=accept]")!.click();
    await vi.waitFor(() => expect(root.querySelector(".toast")).toBeTruthy());
    expect(root.querySelector(".toast")?.textContent).toContain("already actioned");
    expect(refresh).toHaveBeenCalledOnce();
  });

  it("renders the active schedule as a distinct visual state", () => {
    const { root, gantt } = ganttWith({});
    gantt.setProposed(makeRecommendation(), 1);
    gantt.setActive({
      run_id: 1,
      cursor: 2,
      schedule: [
        [1, 1, 0, 0],
        [0, 0, 0, 0],
      ],
      op_points: [null, null, null, null],
    });
    expect(root.querySelectorAll(".active-block .cell.active")).toHaveLength(8);
    expect(root.querySelectorAll(".cell.active.cursor")).toHaveLength(2);
  });
});

describe("WhatIfPanel", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  function panelWith(routes: Parameters<typeof fetchStub>[0], debounce = 250) {
    const { fn, calls } = fetchStub(routes);
    const api = new ApiClient("http://svc", fn);
    const root = mount();
    const panel = new WhatIfPanel(root, api, makeConfig(), debounce);
    return { root, panel, calls };
  }

  function drag(root: HTMLElement, name: string, value: string): void {
    const input = root.querySelector<HTMLInputElement>(`input[name=${name}]`)!;
    input.value = value;
    input.dispatchEvent(new Event("input", { bubbles: true }));
  }

  it("debounces rapid drags into exactly one call and renders the response", async () => {
    const { root, calls } = panelWith({
      "POST /api/v1/whatif": () => ({
        body: { predicted_energy: 41.23, predicted_quality: 0.9517, feasible: true },
      }),
    });
    for (const value of ["155", "160", "164"]) {
      drag(root, "temp_setpoint_c", value);
      vi.advanceTimersByTime(80);
    }
    await vi.advanceTimersByTimeAsync(300);
    expect(calls).toHaveLength(1);
    expect((calls[0].body as { op_point: { temp_setpoint_c: number } }).op_point.temp_setpoint_c).toBe(164);
    expect(root.querySelector("[data-role=predicted-energy]")?.textContent).toContain("41.23");
    expect(root.querySelector("[data-role=predicted-quality]")?.textContent).toContain("0.9517");
    expect(root.querySelector("[data-role=feasibility]")?.textContent).toBe("feasible");
  });

  it("shows the quality-risk badge when the service says infeasible", async () => {
    const { root } = panelWith({
      "POST /api/v1/whatif": () => ({
        body: { predicted_energy: 35.1, predicted_quality: 0.31, feasible: false },
      }),
    });
    drag(root, "temp_setpoint_c", "151");
    await vi.advanceTimersByTimeAsync(300);
    expect(root.querySelector("[data-role=feasibility]")?.textContent).toBe("quality risk");
  });

  it("clamps and reports a message on a 400", async () => {
    const { root } = panelWith({
      "POST /api/v1/whatif": () => ({
        status: 400,
        body: { error: { status: 400, code: "out_of_bounds", message: "temp outside [150, 180]" } },
      }),
    });
    drag(root, "temp_setpoint_c", "175");
    await vi.advanceTimersByTimeAsync(300);
    expect(root.querySelector(".whatif-message")?.textContent).toContain("clamped");
  });

  it("use-this-point hands the current point to the callback", () => {
    const { root, panel } = panelWith({});
    const received: unknown[] = [];
    panel.onUsePoint = (point) => received.push(point);
    drag(root, "cycle_minutes", "35");
    root.querySelector<HTMLButtonElement>("button[data-action=use-point]")!.click();
    expect(received).toEqual([
      { temp_setpoint_c: 150, dry_solids_frac: 0.12, cycle_minutes: 35 },
    ]);
  });
});

describe("RunHistory", () => {
  it("lists runs newest first with action status", () => {
    const root = mount();
    const { fn } = fetchStub({});
    const history = new RunHistory(root, new ApiClient("http://svc", fn));
    history.setRuns([
      makeRun(1, {
        operator_action: { kind: "accept", actor: "alex", at: "t", schedule_edits: [] },
      }),
      makeRun(2),
    ]);
    const rows = [...root.querySelectorAll("tbody tr")];
    expect(rows.map((r) => r.querySelector("td")?.textContent)).toEqual(["#2", "#1"]);
    const statuses = [...root.querySelectorAll("[data-role=action-status]")].map(
      (el) => el.textContent,
    );
    expect(statuses).toEqual(["pending", "accept by alex"]);
  });

  it("selecting a run shows its recommendation JSON", () => {
    const root = mount();
    const { fn } = fetchStub({});
    const history = new RunHistory(root, new ApiClient("http://svc", fn));
    history.setRuns([makeRun(3)]);
    root.querySelector<HTMLElement>('[data-run-row="3"]')!.click();
    const detail = root.querySelector("[data-role=run-detail]")!;
    expect(detail.textContent).toContain('"input_hash": "deadbeef"');
  });

  it("load-more pages via limit/offset", async () => {
    const root = mount();
    const { fn, calls } = fetchStub({
      "GET /api/v1/runs": (_body, url) => {
        expect(url).toContain("offset=2");
        return { body: { runs: [makeRun(1)], total: 3, limit: 2, offset: 2 } };
      },
    });
    const history = new RunHistory(root, new ApiClient("http://svc", fn), 2);
    history.setRuns([makeRun(3), makeRun(2)], 3);
    root.querySelector<HTMLButtonElement>("button[data-action=load-more]")!.click();
    await vi.waitFor(() =>
      expect([...root.querySelectorAll("tbody tr")]).toHaveLength(3),
    );
    expect(calls).toHaveLength(1);
  });
});
