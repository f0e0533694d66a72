import type {
  RecommendationDto,
  RunDto,
  ServiceConfigDto,
  SnapshotPayload,
} from "../src/types.js";

export function makeConfig(overrides: Partial<ServiceConfigDto> = {}): ServiceConfigDto {
  return {
    target_level_pct: 60,
    q_min: 0.9,
    margin: 0,
    omega: 0.1,
    step_minutes: 15,
    horizon_steps: 4,
    op_bounds: {
      temp_setpoint_c: [150, 180],
      dry_solids_frac: [0.12, 0.2],
      cycle_minutes: [20, 40],
    },
    model_trained: true,
    ...overrides,
  };
}

export function makeRecommendation(
  overrides: Partial<RecommendationDto> = {},
): RecommendationDto {
  return {
    id: "rec-abc",
    created_at: "2024-03-01T00:00:00Z",
    schedule: [
      [1, 0, 0, 1],
      [0, 0, 1, 1],
    ],
    op_points: [
      { temp_setpoint_c: 164, dry_solids_frac: 0.2, cycle_minutes: 40 },
      null,
      { temp_setpoint_c: 164, dry_solids_frac: 0.2, cycle_minutes: 40 },
      { temp_setpoint_c: 164, dry_solids_frac: 0.2, cycle_minutes: 40 },
    ],
    predicted_total_energy_kwh: 1234.5,
    min_predicted_quality: 0.9241,
    flags: { quality_risk: false, not_proven_optimal: false, level_bound_violation: false },
    input_hash: "deadbeef",
    target_level_pct: 60,
    inflow_forecast_pct: [5, 5, 5, 5],
    planned_levels_pct: [60, 59, 64, 61, 60],
    objective: 6.5,
    deviation_sum: 6.0,
    switch_count: 1,
    selected_candidate: {
      temp_setpoint_c: 164,
      dry_solids_frac: 0.2,
      cycle_minutes: 40,
      predicted_energy: 39.44,
      predicted_quality: 0.9241,
      feasible: true,
    },
    ...overrides,
  };
}

export function makeRun(runId: number, overrides: Partial<RunDto> = {}): RunDto {
  return {
    run_id: runId,
    created_at: "2024-03-01T00:00:00Z",
    recommendation: makeRecommendation(),
    operator_action: null,
    ...overrides,
  };
}

export function makeSnapshot(overrides: Partial<SnapshotPayload> = {}): SnapshotPayload {
  return {
    plant: {
      t_index: 2,
      clock: "2024-03-01T00:30:00Z",
      level_pct: 61.5,
      capacity_m3: 2000,
      reactors: [
        { id: 1, running: false, steps_in_state: 2 },
        { id: 2, running: false, steps_in_state: 2 },
      ],
      op_point: { temp_setpoint_c: 165, dry_solids_frac: 0.16, cycle_minutes: 30 },
    },
    latest_recommendation: null,
    latest_run_id: null,
    active_schedule: null,
    state_version: 2,
    config: makeConfig(),
    level_history: [
      { timestamp: "2024-03-01T00:00:00Z", level_pct: 60.0 },
      { timestamp: "2024-03-01T00:15:00Z", level_pct: 61.5 },
    ],
    runs: [],
    ...overrides,
  };
}

export interface RecordedCall {
  url: string;
  method: string;
  body: unknown;
}

/** fetch stub: route handlers by "METHOD path-prefix"; records every call. */
export function fetchStub(
  routes: Record<string, (body: unknown, url: string) => { status?: number; body: unknown }>,
) {
  const calls: RecordedCall[] = [];
  const fn = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    const method = init?.method ?? "GET";
    const parsed = init?.body ? JSON.parse(String(init.body)) : null;
    calls.push({ url, method, body: parsed });
    for (const [key, handler] of Object.entries(routes)) {
      const [routeMethod, prefix] = key.split(" ");
      if (method === routeMethod && url.includes(prefix)) {
        const result = handler(parsed, url);
        return new Response(JSON.stringify(result.body), {
          status: result.status ?? 200,
          headers: { "content-type": "application/json" },
        });
      }
    }
    throw new Error(`no stub for ${method} ${url}`);
  }) as typeof fetch;
  return { fn, calls };
}

export function sseStreamResponse(blocks: string[]): Response {
  const encoder = new TextEncoder();
  const stream = new ReadableStream<Uint8Array>({
    start(controller) {
      for (const block of blocks) {
        controller.enqueue(encoder.encode(block));
      }
      // leave the stream open like a live SSE connection
    },
  });
  return new Response(stream, {
    status: 200,
    headers: { "content-type": "text/event-stream" },
  });
}
